/**
 * @file trainer.cc
 * @brief Weighted SGNS training loop
 */

#include "tai2vec/trainer.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <thread>
#include <type_traits>

#include "tai2vec/error.h"
#include "text_util.h"

namespace tai2vec::trainer {

namespace {

// Independent streams derived from (seed, epoch, purpose).
Rng make_rng(uint64_t seed, uint64_t epoch, uint64_t stream) {
  std::seed_seq seq{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32),
                    static_cast<uint32_t>(epoch), static_cast<uint32_t>(stream)};
  return Rng(seq);
}

constexpr uint64_t kStreamInit = 0;
constexpr uint64_t kStreamMask = 1;
constexpr uint64_t kStreamShuffle = 2;
constexpr uint64_t kStreamNegatives = 3;  // + worker index

// [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline size_t uniform_index(Rng& rng, size_t n) { return static_cast<size_t>(rng() % n); }

template <class T>
void shuffle(std::vector<T>& values, Rng& rng) {
  for (size_t i = values.size(); i > 1; --i) {
    std::swap(values[i - 1], values[uniform_index(rng, i)]);
  }
}

struct PlainAccess {
  static double load(const double& x) { return x; }
  static void store(double& x, double value) { x = value; }
};

// Lock-free shared access for asynchronous workers. Individual loads and
// stores are atomic; read-modify-write sequences may lose updates.
struct SharedAccess {
  static double load(const double& x) {
    return std::atomic_ref<double>(const_cast<double&>(x)).load(std::memory_order_relaxed);
  }
  static void store(double& x, double value) {
    std::atomic_ref<double>(x).store(value, std::memory_order_relaxed);
  }
};

struct LogisticTerms {
  double sigmoid;       // s(x)
  double log_sig_pos;   // log s(x)
  double log_sig_neg;   // log s(-x)
};

inline LogisticTerms logistic(double x) {
  const double e = std::exp(-std::abs(x));
  const double l = std::log1p(e);
  if (x >= 0) {
    return {1.0 / (1.0 + e), -l, -x - l};
  }
  return {e / (1.0 + e), x - l, -l};
}

struct Scratch {
  std::vector<double> v_snapshot;
  std::vector<double> grad_v;
  std::vector<double> coef;
  std::vector<double*> rows;

  Scratch(size_t dim, size_t max_rows)
      : v_snapshot(dim), grad_v(dim), coef(max_rows), rows(max_rows) {}
};

// One exact SGD step on the weighted pair loss. rows[0] is the positive
// context row. All gradients are evaluated at the incoming state.
template <class Access>
double sgd_pair_update(double* v, size_t row_count, size_t dim, double weight, double lr,
                       Scratch& scratch) {
  double* vs = scratch.v_snapshot.data();
  for (size_t d = 0; d < dim; ++d) {
    vs[d] = Access::load(v[d]);
  }
  double log_likelihood = 0.0;
  for (size_t r = 0; r < row_count; ++r) {
    const double* c = scratch.rows[r];
    double x = 0.0;
    for (size_t d = 0; d < dim; ++d) {
      x += vs[d] * Access::load(c[d]);
    }
    const LogisticTerms terms = logistic(x);
    const double label = r == 0 ? 1.0 : 0.0;
    scratch.coef[r] = weight * (terms.sigmoid - label);
    log_likelihood += r == 0 ? terms.log_sig_pos : terms.log_sig_neg;
  }
  double* gv = scratch.grad_v.data();
  std::fill(gv, gv + dim, 0.0);
  for (size_t r = 0; r < row_count; ++r) {
    const double* c = scratch.rows[r];
    const double g = scratch.coef[r];
    for (size_t d = 0; d < dim; ++d) {
      gv[d] += g * Access::load(c[d]);
    }
  }
  for (size_t r = 0; r < row_count; ++r) {
    double* c = scratch.rows[r];
    const double step = lr * scratch.coef[r];
    for (size_t d = 0; d < dim; ++d) {
      Access::store(c[d], Access::load(c[d]) - step * vs[d]);
    }
  }
  for (size_t d = 0; d < dim; ++d) {
    Access::store(v[d], vs[d] - lr * gv[d]);
  }
  return -weight * log_likelihood;
}

// Adam moments for both matrices; updated lazily on touched rows.
struct AdamState {
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;
  Matrix m_target, v_target, m_context, v_context;
  std::vector<uint64_t> steps_target, steps_context;

  AdamState(size_t rows, size_t cols)
      : m_target(rows, cols), v_target(rows, cols), m_context(rows, cols),
        v_context(rows, cols), steps_target(rows, 0), steps_context(rows, 0) {}
};

template <class Access>
void adam_row_update(double* param, const double* grad, double* m, double* v, uint64_t& steps,
                     size_t dim, double lr) {
  uint64_t t = 0;
  if constexpr (std::is_same_v<Access, SharedAccess>) {
    t = std::atomic_ref<uint64_t>(steps).fetch_add(1, std::memory_order_relaxed) + 1;
  } else {
    t = ++steps;
  }
  const double c1 = 1.0 - std::pow(AdamState::kBeta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(AdamState::kBeta2, static_cast<double>(t));
  for (size_t d = 0; d < dim; ++d) {
    const double mm = AdamState::kBeta1 * Access::load(m[d]) + (1 - AdamState::kBeta1) * grad[d];
    const double vv =
        AdamState::kBeta2 * Access::load(v[d]) + (1 - AdamState::kBeta2) * grad[d] * grad[d];
    Access::store(m[d], mm);
    Access::store(v[d], vv);
    const double update = lr * (mm / c1) / (std::sqrt(vv / c2) + AdamState::kEps);
    Access::store(param[d], Access::load(param[d]) - update);
  }
}

template <class Access>
double adam_pair_update(const TrainingPair& pair, std::span<const ItemIndex> negatives,
                        EmbeddingModel& model, AdamState& state, double lr, Scratch& scratch,
                        std::vector<double>& row_grad) {
  const size_t dim = model.dim();
  double* v = model.target.row(pair.target).data();
  double* vs = scratch.v_snapshot.data();
  for (size_t d = 0; d < dim; ++d) {
    vs[d] = Access::load(v[d]);
  }
  const size_t row_count = negatives.size() + 1;
  double log_likelihood = 0.0;
  for (size_t r = 0; r < row_count; ++r) {
    const double* c = scratch.rows[r];
    double x = 0.0;
    for (size_t d = 0; d < dim; ++d) {
      x += vs[d] * Access::load(c[d]);
    }
    const LogisticTerms terms = logistic(x);
    scratch.coef[r] = pair.weight * (terms.sigmoid - (r == 0 ? 1.0 : 0.0));
    log_likelihood += r == 0 ? terms.log_sig_pos : terms.log_sig_neg;
  }
  double* gv = scratch.grad_v.data();
  std::fill(gv, gv + dim, 0.0);
  for (size_t r = 0; r < row_count; ++r) {
    for (size_t d = 0; d < dim; ++d) {
      gv[d] += scratch.coef[r] * Access::load(scratch.rows[r][d]);
    }
  }
  for (size_t r = 0; r < row_count; ++r) {
    const ItemIndex row = r == 0 ? pair.context : negatives[r - 1];
    for (size_t d = 0; d < dim; ++d) {
      row_grad[d] = scratch.coef[r] * vs[d];
    }
    adam_row_update<Access>(scratch.rows[r], row_grad.data(), state.m_context.row(row).data(),
                            state.v_context.row(row).data(), state.steps_context[row], dim, lr);
  }
  adam_row_update<Access>(v, gv, state.m_target.row(pair.target).data(),
                          state.v_target.row(pair.target).data(),
                          state.steps_target[pair.target], dim, lr);
  return -pair.weight * log_likelihood;
}

size_t count_pairs(const temporal::UserTimeline& timeline, int window,
                   std::span<const char> keep_mask) {
  const auto& events = timeline.events;
  const auto n = static_cast<ptrdiff_t>(events.size());
  size_t count = 0;
  for (ptrdiff_t p = 0; p < n; ++p) {
    if (!keep_mask[p]) continue;
    const ptrdiff_t lo = std::max<ptrdiff_t>(0, p - window);
    const ptrdiff_t hi = std::min<ptrdiff_t>(n - 1, p + window);
    for (ptrdiff_t q = lo; q <= hi; ++q) {
      if (q != p && keep_mask[q] && events[q].item != events[p].item) ++count;
    }
  }
  return count;
}

ItemIndex draw_negative(const NegativeSampler& sampler, ItemIndex context, Rng& rng) {
  ItemIndex drawn = sampler.draw(rng);
  for (int tries = 0; drawn == context && tries < 16; ++tries) {
    drawn = sampler.draw(rng);
  }
  return drawn;
}

}  // namespace

// ---------------------------------------------------------------------------
// Vocabulary and model

Vocabulary Vocabulary::build(const corpus::Dataset& train) {
  if (train.empty()) {
    throw Error(ErrorCategory::kData, "cannot build a vocabulary from an empty dataset");
  }
  std::map<std::string, uint64_t> counts;
  for (const auto& interaction : train.interactions) {
    ++counts[interaction.item_id];
  }
  std::vector<std::pair<std::string, uint64_t>> ordered(counts.begin(), counts.end());
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocabulary vocabulary;
  for (auto& [item, count] : ordered) {
    vocabulary.index_.emplace(item, static_cast<ItemIndex>(vocabulary.items_.size()));
    vocabulary.items_.push_back(item);
    vocabulary.frequencies_.push_back(count);
    vocabulary.total_ += count;
  }
  return vocabulary;
}

Vocabulary Vocabulary::from_items(std::vector<std::string> items) {
  Vocabulary vocabulary;
  for (auto& item : items) {
    if (!vocabulary.index_.emplace(item, static_cast<ItemIndex>(vocabulary.items_.size())).second) {
      throw Error(ErrorCategory::kData, "duplicate item '" + item + "' in vocabulary");
    }
    vocabulary.items_.push_back(std::move(item));
    vocabulary.frequencies_.push_back(1);
    ++vocabulary.total_;
  }
  return vocabulary;
}

std::optional<ItemIndex> Vocabulary::find(std::string_view item_id) const {
  auto it = index_.find(std::string(item_id));
  if (it == index_.end()) {
    return std::nullopt;
  }
  return it->second;
}

bool EmbeddingModel::all_finite() const {
  auto finite = [](const Matrix& m) {
    return std::all_of(m.data().begin(), m.data().end(), [](double x) { return std::isfinite(x); });
  };
  return finite(target) && finite(context);
}

std::string_view optimizer_name(Optimizer optimizer) {
  return optimizer == Optimizer::kAdaptiveMoments ? "adaptive_moments" : "sgd_linear_decay";
}

Optimizer parse_optimizer(std::string_view name) {
  if (name == "sgd_linear_decay" || name == "sgd") return Optimizer::kSgdLinearDecay;
  if (name == "adaptive_moments" || name == "adam") return Optimizer::kAdaptiveMoments;
  throw Error(ErrorCategory::kUsage, "unknown optimizer '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  if (dim < 1 || window < 1 || negatives < 1 || epochs < 1) {
    throw Error(ErrorCategory::kUsage, "dim, window, negatives and epochs must be >= 1");
  }
  if (!(learning_rate > 0.0)) {
    throw Error(ErrorCategory::kUsage, "learning_rate must be > 0");
  }
  if (!(subsample_t >= 0.0)) {
    throw Error(ErrorCategory::kUsage, "subsample_t must be >= 0");
  }
  if (!std::isfinite(neg_exponent)) {
    throw Error(ErrorCategory::kUsage, "neg_exponent must be finite");
  }
  if (batch_size < 1 || workers < 1) {
    throw Error(ErrorCategory::kUsage, "batch_size and workers must be >= 1");
  }
}

// ---------------------------------------------------------------------------
// Pair stream

double subsample_keep_probability(double freq_fraction, double t) {
  if (t <= 0.0) {
    return 1.0;
  }
  const double ratio = t / freq_fraction;
  return std::min(1.0, std::sqrt(ratio) + ratio);
}

std::vector<TrainingPair> generate_pairs(const temporal::UserTimeline& timeline,
                                         const temporal::UserTemporalProfile& profile,
                                         int window, const weighting::WeightConfig& config,
                                         std::span<const char> keep_mask, double epsilon) {
  std::vector<TrainingPair> pairs;
  const auto& events = timeline.events;
  const auto n = static_cast<ptrdiff_t>(events.size());
  for (ptrdiff_t p = 0; p < n; ++p) {
    if (!keep_mask[p]) continue;
    const ptrdiff_t lo = std::max<ptrdiff_t>(0, p - window);
    const ptrdiff_t hi = std::min<ptrdiff_t>(n - 1, p + window);
    for (ptrdiff_t q = lo; q <= hi; ++q) {
      if (q == p || !keep_mask[q] || events[q].item == events[p].item) continue;
      pairs.push_back({events[p].item, events[q].item,
                       weighting::pair_weight(profile, static_cast<size_t>(p),
                                              static_cast<size_t>(q), config, epsilon)});
    }
  }
  return pairs;
}

// ---------------------------------------------------------------------------
// Negative sampling

NegativeSampler::NegativeSampler(std::span<const double> weights) {
  const size_t n = weights.size();
  if (n == 0) {
    throw Error(ErrorCategory::kData, "negative sampler needs a non-empty vocabulary");
  }
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!std::isfinite(total) || !(total > 0.0)) {
    throw Error(ErrorCategory::kUsage, "negative sampling weights are not finite");
  }
  probabilities_.resize(n);
  accept_.assign(n, 1.0);
  alias_.resize(n);
  std::vector<double> scaled(n);
  std::vector<size_t> small, large;
  for (size_t i = 0; i < n; ++i) {
    probabilities_[i] = weights[i] / total;
    scaled[i] = probabilities_[i] * static_cast<double>(n);
    alias_[i] = static_cast<ItemIndex>(i);
    (scaled[i] < 1.0 ? small : large).push_back(i);
  }
  while (!small.empty() && !large.empty()) {
    const size_t s = small.back();
    small.pop_back();
    const size_t l = large.back();
    accept_[s] = scaled[s];
    alias_[s] = static_cast<ItemIndex>(l);
    scaled[l] = (scaled[l] + scaled[s]) - 1.0;
    if (scaled[l] < 1.0) {
      large.pop_back();
      small.push_back(l);
    }
  }
  // Leftovers are 1 up to rounding.
  for (size_t i : small) accept_[i] = 1.0;
  for (size_t i : large) accept_[i] = 1.0;
}

ItemIndex NegativeSampler::draw(Rng& rng) const {
  const size_t column = uniform_index(rng, accept_.size());
  return uniform01(rng) < accept_[column] ? static_cast<ItemIndex>(column) : alias_[column];
}

NegativeSampler negative_table(const Vocabulary& vocabulary, double eta) {
  std::vector<double> weights(vocabulary.size());
  for (size_t i = 0; i < weights.size(); ++i) {
    weights[i] = std::pow(static_cast<double>(vocabulary.frequency(static_cast<ItemIndex>(i))), eta);
  }
  return NegativeSampler(weights);
}

// ---------------------------------------------------------------------------
// Gradient and step

SgnsGradient sgns_gradient(const TrainingPair& pair, std::span<const ItemIndex> negatives,
                           const EmbeddingModel& model) {
  const size_t dim = model.dim();
  SgnsGradient gradient;
  gradient.target.assign(dim, 0.0);
  gradient.rows.push_back(pair.context);
  gradient.rows.insert(gradient.rows.end(), negatives.begin(), negatives.end());
  const auto v = model.target.row(pair.target);
  double log_likelihood = 0.0;
  for (size_t r = 0; r < gradient.rows.size(); ++r) {
    const auto c = model.context.row(gradient.rows[r]);
    double x = 0.0;
    for (size_t d = 0; d < dim; ++d) x += v[d] * c[d];
    const LogisticTerms terms = logistic(x);
    const double g = pair.weight * (terms.sigmoid - (r == 0 ? 1.0 : 0.0));
    log_likelihood += r == 0 ? terms.log_sig_pos : terms.log_sig_neg;
    std::vector<double> row_grad(dim);
    for (size_t d = 0; d < dim; ++d) {
      gradient.target[d] += g * c[d];
      row_grad[d] = g * v[d];
    }
    gradient.row_grads.push_back(std::move(row_grad));
  }
  gradient.loss = -pair.weight * log_likelihood;
  return gradient;
}

double sgns_step(const TrainingPair& pair, std::span<const ItemIndex> negatives,
                 EmbeddingModel& model, double lr) {
  const size_t dim = model.dim();
  const size_t n = model.vocabulary.size();
  if (pair.target >= n || pair.context >= n ||
      std::any_of(negatives.begin(), negatives.end(), [n](ItemIndex i) { return i >= n; })) {
    throw Error(ErrorCategory::kTraining, "item index out of range in sgns_step");
  }
  Scratch scratch(dim, negatives.size() + 1);
  scratch.rows[0] = model.context.row(pair.context).data();
  for (size_t r = 0; r < negatives.size(); ++r) {
    scratch.rows[r + 1] = model.context.row(negatives[r]).data();
  }
  const double loss = sgd_pair_update<PlainAccess>(model.target.row(pair.target).data(),
                                                   negatives.size() + 1, dim, pair.weight, lr,
                                                   scratch);
  if (!std::isfinite(loss)) {
    throw Error(ErrorCategory::kTraining, "non-finite loss: training diverged");
  }
  return loss;
}

double learning_rate_at(double initial, size_t step, size_t total) {
  if (total == 0) {
    return initial;
  }
  const double progress = static_cast<double>(step) / static_cast<double>(total);
  return initial * (1.0 - progress * (1.0 - 0.01));
}

// ---------------------------------------------------------------------------
// Corpus and training loop

TrainingCorpus build_training_corpus(const corpus::Dataset& data,
                                     const temporal::TemporalConfig& temporal_config,
                                     const weighting::WeightConfig& weight_config) {
  TrainingCorpus corpus;
  corpus.vocabulary = Vocabulary::build(data);
  std::map<std::string, std::vector<temporal::TimelineEvent>> by_user;
  for (const auto& interaction : data.interactions) {
    by_user[interaction.user_id].push_back(
        {*corpus.vocabulary.find(interaction.item_id), interaction.timestamp});
  }
  const auto config = weighting::temporal_config_for(temporal_config, weight_config);
  config.validate();
  for (auto& [user, events] : by_user) {
    std::sort(events.begin(), events.end(), [](const auto& a, const auto& b) {
      return a.timestamp != b.timestamp ? a.timestamp < b.timestamp : a.item < b.item;
    });
    temporal::UserTimeline timeline{user, std::move(events)};
    corpus.profiles.push_back(temporal::user_profile(timeline, config));
    corpus.timelines.push_back(std::move(timeline));
  }
  return corpus;
}

TrainResult train(const TrainingCorpus& corpus, const TrainConfig& train_config,
                  const weighting::WeightConfig& weight_config, double epsilon) {
  train_config.validate();
  weight_config.validate();
  const Vocabulary& vocabulary = corpus.vocabulary;
  if (vocabulary.empty()) {
    throw Error(ErrorCategory::kTraining, "empty vocabulary");
  }
  const auto dim = static_cast<size_t>(train_config.dim);
  const size_t n = vocabulary.size();

  TrainResult result;
  EmbeddingModel& model = result.model;
  model.vocabulary = vocabulary;
  model.target = Matrix(n, dim);
  model.context = Matrix(n, dim);
  {
    Rng rng = make_rng(train_config.seed, 0, kStreamInit);
    const double half = 0.5 / static_cast<double>(dim);
    for (double& x : model.target.data()) {
      x = (uniform01(rng) * 2.0 - 1.0) * half;
    }
  }

  std::vector<double> keep_probability(n);
  for (size_t i = 0; i < n; ++i) {
    const double fraction = static_cast<double>(vocabulary.frequency(static_cast<ItemIndex>(i))) /
                            static_cast<double>(vocabulary.total());
    keep_probability[i] = subsample_keep_probability(fraction, train_config.subsample_t);
  }
  const NegativeSampler sampler = negative_table(vocabulary, train_config.neg_exponent);

  // Subsampling masks for every epoch are drawn before the first step.
  std::vector<size_t> offsets(corpus.timelines.size() + 1, 0);
  for (size_t u = 0; u < corpus.timelines.size(); ++u) {
    offsets[u + 1] = offsets[u] + corpus.timelines[u].events.size();
  }
  const auto epochs = static_cast<size_t>(train_config.epochs);
  std::vector<std::vector<char>> masks(epochs, std::vector<char>(offsets.back(), 1));
  std::vector<size_t> epoch_pairs(epochs, 0);
  size_t total_steps = 0;
  for (size_t e = 0; e < epochs; ++e) {
    Rng rng = make_rng(train_config.seed, e + 1, kStreamMask);
    for (size_t u = 0; u < corpus.timelines.size(); ++u) {
      const auto& events = corpus.timelines[u].events;
      std::span<char> mask(masks[e].data() + offsets[u], events.size());
      for (size_t k = 0; k < events.size(); ++k) {
        const double draw = uniform01(rng);
        mask[k] = draw < keep_probability[events[k].item] ? 1 : 0;
      }
      epoch_pairs[e] += count_pairs(corpus.timelines[u], train_config.window, mask);
    }
    total_steps += epoch_pairs[e];
  }
  if (total_steps == 0) {
    throw Error(ErrorCategory::kTraining, "empty pair stream: no user has two usable events");
  }

  const auto negatives = static_cast<size_t>(train_config.negatives);
  const bool adam = train_config.optimizer == Optimizer::kAdaptiveMoments;
  std::optional<AdamState> adam_state;
  if (adam) adam_state.emplace(n, dim);

  // Runs pairs [begin, end) of the epoch stream; steps are numbered globally.
  auto run_range = [&]<class Access>(Access, const std::vector<TrainingPair>& pairs, size_t begin,
                                     size_t end, size_t step_base, Rng& rng) {
    Scratch scratch(dim, negatives + 1);
    std::vector<ItemIndex> drawn(negatives);
    std::vector<double> row_grad(dim);
    double loss = 0.0;
    for (size_t s = begin; s < end; ++s) {
      const TrainingPair& pair = pairs[s];
      const double lr = learning_rate_at(train_config.learning_rate, step_base + s, total_steps);
      scratch.rows[0] = model.context.row(pair.context).data();
      for (size_t k = 0; k < negatives; ++k) {
        drawn[k] = draw_negative(sampler, pair.context, rng);
        scratch.rows[k + 1] = model.context.row(drawn[k]).data();
      }
      const double pair_loss =
          adam ? adam_pair_update<Access>(pair, drawn, model, *adam_state, lr, scratch, row_grad)
               : sgd_pair_update<Access>(model.target.row(pair.target).data(), negatives + 1,
                                         dim, pair.weight, lr, scratch);
      if (!std::isfinite(pair_loss)) {
        throw Error(ErrorCategory::kTraining, "non-finite loss: training diverged");
      }
      loss += pair_loss;
    }
    return loss;
  };

  size_t step_base = 0;
  for (size_t e = 0; e < epochs; ++e) {
    std::vector<TrainingPair> pairs;
    pairs.reserve(epoch_pairs[e]);
    for (size_t u = 0; u < corpus.timelines.size(); ++u) {
      std::span<const char> mask(masks[e].data() + offsets[u], corpus.timelines[u].events.size());
      auto user_pairs = generate_pairs(corpus.timelines[u], corpus.profiles[u],
                                       train_config.window, weight_config, mask, epsilon);
      pairs.insert(pairs.end(), user_pairs.begin(), user_pairs.end());
    }
    if (train_config.unit_weights) {
      for (auto& pair : pairs) pair.weight = 1.0;
    }
    Rng shuffle_rng = make_rng(train_config.seed, e + 1, kStreamShuffle);
    shuffle(pairs, shuffle_rng);

    double epoch_loss = 0.0;
    if (train_config.workers == 1) {
      Rng rng = make_rng(train_config.seed, e + 1, kStreamNegatives);
      epoch_loss = run_range(PlainAccess{}, pairs, 0, pairs.size(), step_base, rng);
    } else {
      const auto batch = static_cast<size_t>(train_config.batch_size);
      std::atomic<size_t> next_batch{0};
      std::vector<double> losses(static_cast<size_t>(train_config.workers), 0.0);
      std::vector<std::exception_ptr> failures(losses.size());
      std::vector<std::thread> threads;
      for (size_t w = 0; w < losses.size(); ++w) {
        threads.emplace_back([&, w] {
          try {
            Rng rng = make_rng(train_config.seed, e + 1, kStreamNegatives + w);
            while (true) {
              const size_t begin = next_batch.fetch_add(1) * batch;
              if (begin >= pairs.size()) break;
              const size_t end = std::min(pairs.size(), begin + batch);
              losses[w] += run_range(SharedAccess{}, pairs, begin, end, step_base, rng);
            }
          } catch (...) {
            failures[w] = std::current_exception();
          }
        });
      }
      for (auto& thread : threads) thread.join();
      for (auto& failure : failures) {
        if (failure) std::rethrow_exception(failure);
      }
      epoch_loss = std::accumulate(losses.begin(), losses.end(), 0.0);
    }
    step_base += pairs.size();
    if (!model.all_finite()) {
      throw Error(ErrorCategory::kTraining, "non-finite parameters: training diverged");
    }
    result.log.push_back({static_cast<int>(e + 1),
                          pairs.empty() ? 0.0 : epoch_loss / static_cast<double>(pairs.size()),
                          learning_rate_at(train_config.learning_rate, step_base, total_steps),
                          pairs.size()});
  }
  return result;
}

TrainResult train(const corpus::Dataset& data, const temporal::TemporalConfig& temporal_config,
                  const TrainConfig& train_config, const weighting::WeightConfig& weight_config) {
  const TrainingCorpus corpus = build_training_corpus(data, temporal_config, weight_config);
  return train(corpus, train_config, weight_config, temporal_config.epsilon);
}

// ---------------------------------------------------------------------------
// Files

void write_embeddings(std::ostream& out, const Vocabulary& vocabulary, const Matrix& matrix) {
  out << matrix.rows() << ' ' << matrix.cols() << '\n';
  for (size_t r = 0; r < matrix.rows(); ++r) {
    out << vocabulary.item(static_cast<ItemIndex>(r));
    for (double x : matrix.row(r)) {
      out << ' ' << text::format_double(x);
    }
    out << '\n';
  }
}

std::string context_sidecar_path(const std::string& model_path) {
  return model_path + ".context";
}

void write_model_file(const std::string& path, const EmbeddingModel& model,
                      bool with_context_sidecar) {
  auto write = [](const std::string& file, const Vocabulary& vocabulary, const Matrix& matrix) {
    std::ofstream out(file, std::ios::binary);
    if (!out) {
      throw Error(ErrorCategory::kIo, "cannot write " + file);
    }
    write_embeddings(out, vocabulary, matrix);
    if (!out) {
      throw Error(ErrorCategory::kIo, "write failed for " + file);
    }
  };
  write(path, model.vocabulary, model.target);
  if (with_context_sidecar) {
    write(context_sidecar_path(path), model.vocabulary, model.context);
  }
}

void write_training_log(std::ostream& out, const std::vector<EpochLog>& log) {
  out << "epoch\tmean_loss\tlearning_rate\tpairs\n";
  for (const auto& entry : log) {
    out << entry.epoch << '\t' << text::format_double(entry.mean_loss) << '\t'
        << text::format_double(entry.learning_rate) << '\t' << entry.pairs << '\n';
  }
}

namespace {

std::pair<std::vector<std::string>, Matrix> read_embeddings(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) {
    throw Error(ErrorCategory::kData, "model file is empty");
  }
  std::istringstream header(line);
  size_t rows = 0;
  size_t cols = 0;
  if (!(header >> rows >> cols) || cols == 0) {
    throw Error(ErrorCategory::kData, "bad model header '" + line + "'");
  }
  std::vector<std::string> items;
  items.reserve(rows);
  Matrix matrix(rows, cols);
  for (size_t r = 0; r < rows; ++r) {
    if (!std::getline(in, line)) {
      throw Error(ErrorCategory::kData, "model file truncated");
    }
    auto fields = text::split(text::trim(line), ' ');
    if (fields.size() != cols + 1) {
      throw Error(ErrorCategory::kData, "model row " + std::to_string(r) + " has wrong width");
    }
    items.emplace_back(fields[0]);
    auto row = matrix.row(r);
    for (size_t d = 0; d < cols; ++d) {
      auto value = text::parse_double(fields[d + 1]);
      if (!value) {
        throw Error(ErrorCategory::kData, "bad number in model row " + std::to_string(r));
      }
      row[d] = *value;
    }
  }
  return {std::move(items), std::move(matrix)};
}

}  // namespace

EmbeddingModel read_model(std::istream& in) {
  auto [items, matrix] = read_embeddings(in);
  EmbeddingModel model;
  model.vocabulary = Vocabulary::from_items(std::move(items));
  model.context = Matrix(matrix.rows(), matrix.cols());
  model.target = std::move(matrix);
  return model;
}

EmbeddingModel read_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCategory::kIo, "cannot open model " + path);
  }
  EmbeddingModel model = read_model(in);
  std::ifstream sidecar(context_sidecar_path(path));
  if (sidecar) {
    auto [items, matrix] = read_embeddings(sidecar);
    if (items != model.vocabulary.items() || matrix.cols() != model.dim()) {
      throw Error(ErrorCategory::kData, "context sidecar does not match model " + path);
    }
    model.context = std::move(matrix);
  }
  return model;
}

}  // namespace tai2vec::trainer

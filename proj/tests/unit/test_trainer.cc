/**
 * @file test_trainer.cc
 * @brief Vocabulary, pair stream, negative sampler, gradients and training runs
 */

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "tai2vec/error.h"
#include "tai2vec/trainer.h"
#include "test_support.h"

using namespace tai2vec;
using namespace tai2vec::trainer;
using tai2vec::fixtures::dataset;
using tai2vec::fixtures::row;

namespace {

EmbeddingModel random_model(std::mt19937_64& rng, size_t items, size_t dim, double scale) {
  std::vector<std::string> names;
  for (size_t i = 0; i < items; ++i) names.push_back("i" + std::to_string(i));
  EmbeddingModel m;
  m.vocabulary = Vocabulary::from_items(names);
  m.target = Matrix(items, dim);
  m.context = Matrix(items, dim);
  std::uniform_real_distribution<double> value(-scale, scale);
  for (double& x : m.target.data()) x = value(rng);
  for (double& x : m.context.data()) x = value(rng);
  return m;
}

// Reference loss written from the definition.
double reference_loss(const EmbeddingModel& m, const TrainingPair& p,
                      const std::vector<ItemIndex>& negatives) {
  auto dot = [&](ItemIndex c) {
    double s = 0;
    for (size_t d = 0; d < m.dim(); ++d) s += m.target.row(p.target)[d] * m.context.row(c)[d];
    return s;
  };
  auto log_sigmoid = [](double x) { return -std::log1p(std::exp(-x)); };
  double total = log_sigmoid(dot(p.context));
  for (ItemIndex n : negatives) total += log_sigmoid(-dot(n));
  return -p.weight * total;
}

double norm(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

std::vector<TrainingPair> all_pairs(const temporal::UserTimeline& tl, int window,
                                    const weighting::WeightConfig& cfg) {
  const auto profile = temporal::user_profile(tl, weighting::temporal_config_for({}, cfg));
  std::vector<char> keep(tl.events.size(), 1);
  return generate_pairs(tl, profile, window, cfg, keep, 1e-6);
}

corpus::Dataset toy_log() {
  corpus::Dataset d;
  std::mt19937_64 rng(77);
  std::lognormal_distribution<double> gap(7.0, 2.0);
  for (int u = 0; u < 30; ++u) {
    int64_t t = 0;
    for (int k = 0; k < 15; ++k) {
      t += 1 + static_cast<int64_t>(gap(rng));
      d.interactions.push_back(
          row("u" + std::to_string(u), "i" + std::to_string((u * 3 + k * 7 + k * k) % 40), t));
    }
  }
  return corpus::dedupe(d);
}

TrainConfig small_config() {
  TrainConfig c;
  c.dim = 8;
  c.window = 3;
  c.negatives = 3;
  c.epochs = 3;
  c.seed = 9;
  return c;
}

}  // namespace

TEST(Vocabulary, FrequencyOrderAndTies) {
  auto v = Vocabulary::build(dataset({row("u", "b", 1), row("u", "a", 2), row("v", "a", 3),
                                      row("w", "a", 4)}));
  EXPECT_EQ(*v.find("a"), 0u);
  EXPECT_EQ(*v.find("b"), 1u);
  EXPECT_EQ(v.frequency(0), 3u);
  auto tied = Vocabulary::build(dataset({row("u", "zeta", 1), row("u", "alpha", 2), row("u", "mid", 3)}));
  EXPECT_EQ(tied.items(), (std::vector<std::string>{"alpha", "mid", "zeta"}));
  EXPECT_EQ(Vocabulary::build(dataset({row("u", "x", 1)})).size(), 1u);
  EXPECT_FALSE(v.find("missing").has_value());
}

TEST(Subsample, KeepProbability) {
  EXPECT_EQ(subsample_keep_probability(1e-5, 1e-4), 1.0);
  EXPECT_EQ(subsample_keep_probability(1e-4, 1e-4), 1.0);
  EXPECT_NEAR(subsample_keep_probability(1e-2, 1e-4), 0.11, 1e-12);
  EXPECT_EQ(subsample_keep_probability(0.5, 0.0), 1.0);
}

TEST(Pairs, ThreeEventsWideWindow) {
  auto pairs = all_pairs(fixtures::timeline({0, 10, 20}), 10, {});
  ASSERT_EQ(pairs.size(), 6u);
  for (const auto& p : pairs) EXPECT_EQ(p.weight, 1.0);
  std::set<std::pair<ItemIndex, ItemIndex>> seen;
  for (const auto& p : pairs) seen.insert({p.target, p.context});
  EXPECT_EQ(seen.size(), 6u);
}

TEST(Pairs, WindowOneIsAdjacentOnly) {
  auto pairs = all_pairs(fixtures::timeline({0, 10, 20, 30}), 1, {});
  EXPECT_EQ(pairs.size(), 6u);
  for (const auto& p : pairs) {
    EXPECT_EQ(std::abs(static_cast<int>(p.target) - static_cast<int>(p.context)), 1);
  }
}

TEST(Pairs, DiscWeightsAcrossABreak) {
  // Four quiet gaps give a valid profile; the large one breaks the session.
  temporal::UserTimeline tl = fixtures::timeline({0, 400, 100000, 100400, 100800, 101200});
  weighting::WeightConfig cfg;
  cfg.mode = weighting::WeightMode::kDisc;
  const auto profile = temporal::user_profile(tl, weighting::temporal_config_for({}, cfg));
  ASSERT_FALSE(profile.degenerate);
  ASSERT_EQ(profile.session_of[1], 0);
  ASSERT_EQ(profile.session_of[2], 1);
  std::vector<char> keep{1, 1, 1, 0, 0, 0};
  auto pairs = generate_pairs(tl, profile, 10, cfg, keep, 1e-6);
  ASSERT_EQ(pairs.size(), 6u);
  for (const auto& p : pairs) {
    const bool same = (p.target < 2) == (p.context < 2);
    EXPECT_EQ(p.weight, same ? 2.0 : 1.0) << p.target << "->" << p.context;
  }
}

TEST(Pairs, RepeatedItemIsNotItsOwnContext) {
  temporal::UserTimeline tl = fixtures::timeline({0, 10, 20});
  tl.events[2].item = tl.events[0].item;
  auto pairs = all_pairs(tl, 5, {});
  for (const auto& p : pairs) EXPECT_NE(p.target, p.context);
  EXPECT_EQ(pairs.size(), 4u);
}

TEST(Sampler, HandNormalizedDistributions) {
  auto v = Vocabulary::build(dataset({row("a", "x", 1), row("b", "x", 2), row("c", "x", 3),
                                      row("d", "x", 4), row("e", "x", 5), row("f", "x", 6),
                                      row("g", "x", 7), row("h", "x", 8), row("a", "y", 9),
                                      row("b", "y", 10)}));
  auto linear = negative_table(v, 1.0);
  EXPECT_NEAR(linear.probability(0), 0.8, 1e-12);
  EXPECT_NEAR(linear.probability(1), 0.2, 1e-12);
  auto uniform = negative_table(v, 0.0);
  EXPECT_NEAR(uniform.probability(0), 0.5, 1e-12);

  auto v2 = Vocabulary::build(dataset({row("a", "x", 1), row("b", "x", 2), row("c", "x", 3),
                                       row("d", "x", 4), row("a", "y", 5)}));
  auto inverse = negative_table(v2, -1.0);
  EXPECT_NEAR(inverse.probability(0), 0.2, 1e-12);
  EXPECT_NEAR(inverse.probability(1), 0.8, 1e-12);
}

TEST(Sampler, EmpiricalFrequenciesMatch) {
  const std::vector<double> weights{5, 1, 3, 0.5, 0.5};
  NegativeSampler sampler(weights);
  Rng rng(1);
  std::vector<int> counts(weights.size(), 0);
  const int draws = 200000;
  for (int n = 0; n < draws; ++n) ++counts[sampler.draw(rng)];
  for (size_t i = 0; i < weights.size(); ++i) {
    EXPECT_NEAR(counts[i] / static_cast<double>(draws), weights[i] / 10.0, 0.01);
  }
}

TEST(Gradient, MatchesCentralDifferences) {
  std::mt19937_64 rng(2025);
  const double weights[] = {0.3, 1.0, 2.0};
  for (int config = 0; config < 100; ++config) {
    const size_t dim = 1 + rng() % 8;
    const size_t k = 1 + rng() % 3;
    const size_t items = 2 + rng() % 6;
    auto model = random_model(rng, items, dim, 0.8);
    TrainingPair pair{static_cast<ItemIndex>(rng() % items), static_cast<ItemIndex>(rng() % items),
                      weights[config % 3]};
    std::vector<ItemIndex> negatives(k);
    for (auto& n : negatives) n = static_cast<ItemIndex>(rng() % items);

    const auto g = sgns_gradient(pair, negatives, model);
    EXPECT_NEAR(g.loss, reference_loss(model, pair, negatives), 1e-12);

    // Analytic gradient flattened over the touched parameters.
    std::vector<double> analytic = g.target;
    std::map<ItemIndex, std::vector<double>> rows;
    for (size_t r = 0; r < g.rows.size(); ++r) {
      auto& acc = rows[g.rows[r]];
      acc.resize(dim, 0.0);
      for (size_t d = 0; d < dim; ++d) acc[d] += g.row_grads[r][d];
    }
    for (auto& [row_index, grad] : rows) analytic.insert(analytic.end(), grad.begin(), grad.end());

    const double h = 1e-6;
    std::vector<double> numeric;
    auto probe = [&](double& param) {
      const double saved = param;
      param = saved + h;
      const double up = reference_loss(model, pair, negatives);
      param = saved - h;
      const double down = reference_loss(model, pair, negatives);
      param = saved;
      numeric.push_back((up - down) / (2 * h));
    };
    for (size_t d = 0; d < dim; ++d) probe(model.target.row(pair.target)[d]);
    for (auto& [row_index, grad] : rows) {
      for (size_t d = 0; d < dim; ++d) probe(model.context.row(row_index)[d]);
    }
    ASSERT_EQ(analytic.size(), numeric.size());
    std::vector<double> diff(analytic.size());
    for (size_t i = 0; i < diff.size(); ++i) diff[i] = analytic[i] - numeric[i];
    const double scale = std::max(norm(analytic) + norm(numeric), 1e-12);
    EXPECT_LT(norm(diff) / scale, 1e-4) << "config " << config;
  }
}

TEST(Gradient, WeightTwoExactlyDoubles) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    auto model = random_model(rng, 6, 1 + rng() % 8, 0.5);
    std::vector<ItemIndex> negatives{static_cast<ItemIndex>(rng() % 6), static_cast<ItemIndex>(rng() % 6)};
    TrainingPair one{static_cast<ItemIndex>(rng() % 6), static_cast<ItemIndex>(rng() % 6), 1.0};
    TrainingPair two = one;
    two.weight = 2.0;
    const auto g1 = sgns_gradient(one, negatives, model);
    const auto g2 = sgns_gradient(two, negatives, model);
    for (size_t d = 0; d < g1.target.size(); ++d) ASSERT_EQ(g2.target[d], 2.0 * g1.target[d]);
    for (size_t r = 0; r < g1.rows.size(); ++r)
      for (size_t d = 0; d < g1.target.size(); ++d) ASSERT_EQ(g2.row_grads[r][d], 2.0 * g1.row_grads[r][d]);
    ASSERT_EQ(g2.loss, 2.0 * g1.loss);

    auto m1 = model;
    auto m2 = model;
    sgns_step(one, negatives, m1, 0.05);
    sgns_step(two, negatives, m2, 0.05);
    for (size_t i = 0; i < model.target.data().size(); ++i) {
      const double d1 = m1.target.data()[i] - model.target.data()[i];
      const double d2 = m2.target.data()[i] - model.target.data()[i];
      ASSERT_NEAR(d2, 2.0 * d1, 1e-15 + 1e-12 * std::abs(d2));
    }
    for (size_t i = 0; i < model.context.data().size(); ++i) {
      const double d1 = m1.context.data()[i] - model.context.data()[i];
      const double d2 = m2.context.data()[i] - model.context.data()[i];
      ASSERT_NEAR(d2, 2.0 * d1, 1e-15 + 1e-12 * std::abs(d2));
    }
  }
}

TEST(Gradient, StepFromZeroContextDoublesBitwise) {
  std::mt19937_64 rng(32);
  auto model = random_model(rng, 4, 6, 0.5);
  std::fill(model.context.data().begin(), model.context.data().end(), 0.0);
  std::vector<ItemIndex> negatives{2, 3};
  auto m1 = model;
  auto m2 = model;
  sgns_step({0, 1, 1.0}, negatives, m1, 0.025);
  sgns_step({0, 1, 2.0}, negatives, m2, 0.025);
  for (size_t i = 0; i < model.context.data().size(); ++i) {
    EXPECT_EQ(m2.context.data()[i] - model.context.data()[i],
              2.0 * (m1.context.data()[i] - model.context.data()[i]));
  }
  EXPECT_EQ(m1.target, m2.target);
}

TEST(Gradient, ZeroWeightChangesNothing) {
  std::mt19937_64 rng(33);
  auto model = random_model(rng, 5, 4, 0.5);
  auto stepped = model;
  std::vector<ItemIndex> negatives{1, 2, 3};
  sgns_step({0, 4, 0.0}, negatives, stepped, 0.1);
  EXPECT_EQ(stepped.target, model.target);
  EXPECT_EQ(stepped.context, model.context);
}

TEST(Gradient, StepAppliesNegativeScaledGradient) {
  std::mt19937_64 rng(34);
  auto model = random_model(rng, 5, 5, 0.5);
  std::vector<ItemIndex> negatives{2, 2, 3};
  const TrainingPair pair{0, 1, 1.0};
  const auto g = sgns_gradient(pair, negatives, model);
  auto stepped = model;
  const double lr = 0.01;
  sgns_step(pair, negatives, stepped, lr);
  for (size_t d = 0; d < model.dim(); ++d) {
    EXPECT_NEAR(stepped.target.row(0)[d], model.target.row(0)[d] - lr * g.target[d], 1e-15);
    const double twice = g.row_grads[1][d] + g.row_grads[2][d];
    EXPECT_NEAR(stepped.context.row(2)[d], model.context.row(2)[d] - lr * twice, 1e-15);
  }
  EXPECT_THROW(sgns_step({0, 9, 1.0}, negatives, stepped, lr), Error);
}

TEST(Schedule, LinearDecay) {
  EXPECT_DOUBLE_EQ(learning_rate_at(0.025, 0, 100), 0.025);
  EXPECT_DOUBLE_EQ(learning_rate_at(0.025, 50, 100), 0.025 * (1 - 0.5 * 0.99));
  EXPECT_NEAR(learning_rate_at(0.025, 100, 100), 0.00025, 1e-15);
}

TEST(Train, SingleWorkerIsDeterministic) {
  const auto data = toy_log();
  weighting::WeightConfig w;
  w.mode = weighting::WeightMode::kCont;
  const auto a = train(data, {}, small_config(), w);
  const auto b = train(data, {}, small_config(), w);
  EXPECT_EQ(a.model.target, b.model.target);
  EXPECT_EQ(a.model.context, b.model.context);
  std::ostringstream fa, fb;
  write_embeddings(fa, a.model.vocabulary, a.model.target);
  write_embeddings(fb, b.model.vocabulary, b.model.target);
  EXPECT_EQ(fa.str(), fb.str());
  auto other = small_config();
  other.seed = 10;
  EXPECT_NE(train(data, {}, other, w).model.target, a.model.target);
}

TEST(Train, UniformEqualsHardCodedUnitWeights) {
  const auto data = toy_log();
  weighting::WeightConfig uniform;
  for (auto mode : {weighting::WeightMode::kCont, weighting::WeightMode::kDisc}) {
    weighting::WeightConfig w;
    w.mode = mode;
    auto forced = small_config();
    forced.unit_weights = true;
    const auto a = train(data, {}, small_config(), uniform);
    const auto b = train(data, {}, forced, w);
    EXPECT_EQ(a.model.target, b.model.target);
    EXPECT_EQ(a.model.context, b.model.context);
  }
}

TEST(Train, LossDecreasesAndStaysFinite) {
  const auto data = toy_log();
  auto cfg = small_config();
  cfg.epochs = 10;
  cfg.subsample_t = 0;
  const auto result = train(data, {}, cfg, {});
  EXPECT_TRUE(result.model.all_finite());
  ASSERT_EQ(result.log.size(), 10u);
  EXPECT_LT(result.log.back().mean_loss, result.log.front().mean_loss);
}

TEST(Train, AdaptiveMomentsRuns) {
  auto cfg = small_config();
  cfg.optimizer = Optimizer::kAdaptiveMoments;
  cfg.learning_rate = 0.01;
  const auto a = train(toy_log(), {}, cfg, {});
  const auto b = train(toy_log(), {}, cfg, {});
  EXPECT_TRUE(a.model.all_finite());
  EXPECT_EQ(a.model.target, b.model.target);
}

TEST(Train, SeveralWorkersProduceFiniteModel) {
  auto cfg = small_config();
  cfg.workers = 3;
  cfg.batch_size = 64;
  const auto result = train(toy_log(), {}, cfg, {});
  EXPECT_TRUE(result.model.all_finite());
}

TEST(Train, NoPairsIsAnError) {
  auto data = dataset({row("u1", "a", 1), row("u2", "b", 2), row("u3", "c", 3)});
  try {
    train(data, {}, small_config(), {});
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::kTraining);
  }
}

TEST(ModelFile, RoundTripIsExact) {
  std::mt19937_64 rng(4);
  auto model = random_model(rng, 7, 5, 1.0);
  const auto dir = fixtures::scratch_dir("model_roundtrip");
  const auto path = (dir / "m.txt").string();
  write_model_file(path, model, true);
  const auto loaded = read_model_file(path);
  EXPECT_EQ(loaded.vocabulary.items(), model.vocabulary.items());
  EXPECT_EQ(loaded.target, model.target);
  EXPECT_EQ(loaded.context, model.context);
  std::istringstream bad("2 3\nx 1 2 3\n");
  EXPECT_THROW(read_model(bad), Error);
}

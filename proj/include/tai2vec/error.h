/**
 * @file error.h
 * @brief Error type shared by every module, tagged with a stable category
 */

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tai2vec {

enum class ErrorCategory {
  kUsage,       // bad flags or config values
  kIo,          // unreadable or unwritable files
  kData,        // malformed or empty datasets
  kTraining,    // divergence, empty pair stream
  kEvaluation,  // no evaluable users, vocabulary mismatch
};

/// Machine-parseable name, printed by the CLI as the first token of an error.
std::string_view category_name(ErrorCategory category);

/// Process exit code for a category; always nonzero.
int exit_code(ErrorCategory category);

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}

  ErrorCategory category() const { return category_; }

 private:
  ErrorCategory category_;
};

}  // namespace tai2vec

#include "tai2vec/error.h"

namespace tai2vec {

std::string_view category_name(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::kUsage:
      return "usage";
    case ErrorCategory::kIo:
      return "io";
    case ErrorCategory::kData:
      return "data";
    case ErrorCategory::kTraining:
      return "training";
    case ErrorCategory::kEvaluation:
      return "evaluation";
  }
  return "unknown";
}

int exit_code(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::kUsage:
      return 2;
    case ErrorCategory::kIo:
      return 3;
    case ErrorCategory::kData:
      return 4;
    case ErrorCategory::kTraining:
      return 5;
    case ErrorCategory::kEvaluation:
      return 6;
  }
  return 1;
}

}  // namespace tai2vec

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace jtm {

enum class ErrorKind {
  kDimension,
  kDegenerateInput,
  kDomain,
  kConfig,
  kData,
  kFormat,
  kLookup,
  kNumeric,
  kContract,
  kEvaluation,
};

inline std::string_view error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kDimension: return "dimension";
    case ErrorKind::kDegenerateInput: return "degenerate_input";
    case ErrorKind::kDomain: return "domain";
    case ErrorKind::kConfig: return "config";
    case ErrorKind::kData: return "data";
    case ErrorKind::kFormat: return "format";
    case ErrorKind::kLookup: return "lookup";
    case ErrorKind::kNumeric: return "numeric";
    case ErrorKind::kContract: return "contract";
    case ErrorKind::kEvaluation: return "evaluation";
  }
  return "unknown";
}

// Process exit code for a CLI failure of the given kind:
// 2 config, 3 data, 4 numeric.
inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig: return 2;
    case ErrorKind::kData:
    case ErrorKind::kFormat:
    case ErrorKind::kLookup:
    case ErrorKind::kDegenerateInput:
    case ErrorKind::kEvaluation: return 3;
    default: return 4;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define JTM_DEFINE_ERROR(Name, Kind)                                       \
  class Name : public Error {                                              \
   public:                                                                 \
    explicit Name(const std::string& message) : Error(Kind, message) {}    \
  };

JTM_DEFINE_ERROR(DimensionError, ErrorKind::kDimension)
JTM_DEFINE_ERROR(DegenerateInputError, ErrorKind::kDegenerateInput)
JTM_DEFINE_ERROR(DomainError, ErrorKind::kDomain)
JTM_DEFINE_ERROR(ConfigError, ErrorKind::kConfig)
JTM_DEFINE_ERROR(DataError, ErrorKind::kData)
JTM_DEFINE_ERROR(FormatError, ErrorKind::kFormat)
JTM_DEFINE_ERROR(LookupError, ErrorKind::kLookup)
JTM_DEFINE_ERROR(NumericError, ErrorKind::kNumeric)
JTM_DEFINE_ERROR(ContractError, ErrorKind::kContract)
JTM_DEFINE_ERROR(EvaluationError, ErrorKind::kEvaluation)

#undef JTM_DEFINE_ERROR

}  // namespace jtm

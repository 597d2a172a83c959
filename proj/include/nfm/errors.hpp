#pragma once

#include <stdexcept>
#include <string>

namespace nfm {

/// Broad failure class, used by the CLI to pick an exit code.
enum class ErrorKind {
  Input,      ///< malformed files, bad configuration, missing artifacts
  Numerical,  ///< singular systems, infeasible moments, degenerate data
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define NFM_DEFINE_ERROR(Name, Kind)                                           \
  class Name : public Error {                                                  \
   public:                                                                     \
    explicit Name(const std::string& what) : Error(ErrorKind::Kind, what) {}   \
  };

NFM_DEFINE_ERROR(IoError, Input)
NFM_DEFINE_ERROR(ParseError, Input)
NFM_DEFINE_ERROR(CoverageError, Input)
NFM_DEFINE_ERROR(DuplicateError, Input)
NFM_DEFINE_ERROR(ConfigError, Input)
NFM_DEFINE_ERROR(MissingArtifactError, Input)
NFM_DEFINE_ERROR(LengthMismatchError, Input)
NFM_DEFINE_ERROR(DimensionError, Input)

NFM_DEFINE_ERROR(DegenerateColumnError, Numerical)
NFM_DEFINE_ERROR(DegenerateSeriesError, Numerical)
NFM_DEFINE_ERROR(RankError, Numerical)
NFM_DEFINE_ERROR(SingularityError, Numerical)
NFM_DEFINE_ERROR(SingularMatrixError, Numerical)
NFM_DEFINE_ERROR(DomainError, Numerical)
NFM_DEFINE_ERROR(InfeasibleMomentsError, Numerical)
NFM_DEFINE_ERROR(ZeroRowError, Numerical)
NFM_DEFINE_ERROR(DivisionByZeroError, Numerical)
NFM_DEFINE_ERROR(CalibrationError, Numerical)

#undef NFM_DEFINE_ERROR

}  // namespace nfm

// Exception types shared across the library.
#ifndef BPMS_ERRORS_HPP
#define BPMS_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace bpms {

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct ConstantColumn : Error {
  int column;
  explicit ConstantColumn(int j)
      : Error("core_data: constant predictor column " + std::to_string(j) +
              " (zero sample sd)"),
        column(j) {}
};

struct DimensionMismatch : Error {
  explicit DimensionMismatch(const std::string& msg)
      : Error("core_data: dimension mismatch: " + msg) {}
};

struct SingularDesign : Error {
  explicit SingularDesign(const std::string& msg)
      : Error("gauss_linear: singular design: " + msg) {}
};

struct InfiniteVariance : Error {
  explicit InfiniteVariance(const std::string& msg)
      : Error("gauss_linear: infinite predictive variance: " + msg) {}
};

struct BadFoldCount : Error {
  explicit BadFoldCount(int k, int n)
      : Error("criteria: fold count K=" + std::to_string(k) +
              " outside [2, n=" + std::to_string(n) + "]") {}
};

struct TooManyVariables : Error {
  explicit TooManyVariables(int p, int max_p)
      : Error("model_space: p=" + std::to_string(p) +
              " exceeds enumeration cap max_p=" + std::to_string(max_p)) {}
};

struct RankDeficientSubmodel : Error {
  explicit RankDeficientSubmodel(const std::string& msg)
      : Error("projection: rank-deficient submodel: " + msg) {}
};

struct NullModelZeroDiscrepancy : Error {
  explicit NullModelZeroDiscrepancy()
      : Error("projection: empty-model discrepancy is zero; explanatory power "
              "is undefined and selection degenerates to the empty model") {}
};

struct LengthMismatch : Error {
  explicit LengthMismatch(const std::string& msg)
      : Error("length mismatch: " + msg) {}
};

struct ParseError : Error {
  explicit ParseError(const std::string& msg) : Error("parse error: " + msg) {}
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& msg)
      : Error("config error: " + msg) {}
};

}  // namespace bpms

#endif

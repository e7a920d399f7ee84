#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <stdexcept>
#include <string>

namespace afemmg {

using Vector = Eigen::VectorXd;
using DenseMatrix = Eigen::MatrixXd;
/// Compressed-row sparse operator. Galerkin matrices are stored in full
/// (both triangles) with bitwise-symmetric entries.
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor, int>;

/// Spatial dimension. Only 2D meshes are supported.
inline constexpr int kDim = 2;

enum class ErrorCode {
  kInvalidArgument,
  kNonConforming,
  kDegenerateTriangle,
  kInvalidTag,
  kLevelOutOfRange,
  kUnknownVertex,
  kUnsupportedDegree,
  kDimensionMismatch,
  kFactorizationFailure,
  kNonSpd,
  kBreakdown,
  kIterationCapExceeded,
  kFlagViolation,
  kEmptyHierarchy,
  kInsufficientData,
  kConfig,
  kIo,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace afemmg

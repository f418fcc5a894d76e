#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace origami {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

enum class ErrorKind {
  kInvalidArgument,
  kOutOfRange,
  kNoConvergence,
  kPlateInversion,
  kPoseInfeasible,
  kDimensionMismatch,
  kNonFiniteLoss,
  kConfig,
  kCheckpoint,
  kIo,
};

const char* to_string(ErrorKind kind);

// Single exception type for the library; `kind()` distinguishes the failure.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what),
        kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace origami

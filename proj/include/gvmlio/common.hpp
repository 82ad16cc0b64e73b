#pragma once

#include <Eigen/Core>
#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace gvmlio {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec12 = Eigen::Matrix<double, 12, 1>;
using Mat12 = Eigen::Matrix<double, 12, 12>;
using Vec18 = Eigen::Matrix<double, 18, 1>;
using Mat18 = Eigen::Matrix<double, 18, 18>;
using Mat18x12 = Eigen::Matrix<double, 18, 12>;
using Mat3x18 = Eigen::Matrix<double, 3, 18>;
using MatX = Eigen::MatrixXd;
using VecX = Eigen::VectorXd;

// Error-state block layout: [dr dp dv dbg dba dg], 3 each.
inline constexpr int kIdxRot = 0;
inline constexpr int kIdxPos = 3;
inline constexpr int kIdxVel = 6;
inline constexpr int kIdxBiasGyro = 9;
inline constexpr int kIdxBiasAcc = 12;
inline constexpr int kIdxGravity = 15;
inline constexpr int kStateDim = 18;
inline constexpr int kNoiseDim = 12;

inline constexpr double kGravityNorm = 9.81;

// Base error; InputError maps to CLI exit code 1, NumericalFailure to 2.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InputError : Error {
  using Error::Error;
};
struct NumericalFailure : Error {
  using Error::Error;
};

struct EmptyImuBuffer : InputError {
  using InputError::InputError;
};
struct NonMonotonicTimestamps : InputError {
  using InputError::InputError;
};
struct TimestampOutOfCache : InputError {
  using InputError::InputError;
};
struct TooFewPoints : InputError {
  using InputError::InputError;
};
struct VoxelSizeMismatch : InputError {
  using InputError::InputError;
};
struct ParseError : InputError {
  using InputError::InputError;
};
struct TruncatedRecord : InputError {
  using InputError::InputError;
};
struct BadMagic : InputError {
  using InputError::InputError;
};
struct IoError : InputError {
  using InputError::InputError;
};
struct InsufficientOverlap : InputError {
  using InputError::InputError;
};
struct InvalidSpec : InputError {
  using InputError::InputError;
};
struct NonPositiveDeterminant : NumericalFailure {
  using NumericalFailure::NumericalFailure;
};
struct SingularSum : NumericalFailure {
  using NumericalFailure::NumericalFailure;
};

}  // namespace gvmlio

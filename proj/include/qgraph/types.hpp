#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace qgraph {

using Real = double;
using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;
using Index = Eigen::Index;

inline constexpr Complex iunit{0.0, 1.0};

/// Relative threshold for every rank decision in the library:
/// a singular value counts as nonzero when sigma > relative * max(rows, cols) * sigma_max.
struct RankTolerance {
  double relative = 1e-10;

  double threshold(Index rows, Index cols, double sigma_max) const {
    return relative * static_cast<double>(std::max(rows, cols)) * sigma_max;
  }
};

enum class ErrorKind {
  InvalidMatrix,
  ShapeError,
  NotAnEigenvalue,
  RankDeficient,
  IrregularPencil,
  PoleOfCayley,
  InvalidArgument,
  GridError,
  OnSpectrum,
  ZeroK,
  WrongClass,
  KappaTooSmall,
  ContourTooClose,
  ContourThroughZero,
  NoConvergence,
  SingularStep,
  NotAStarGraph,
  SpecError,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidMatrix: return "InvalidMatrix";
    case ErrorKind::ShapeError: return "ShapeError";
    case ErrorKind::NotAnEigenvalue: return "NotAnEigenvalue";
    case ErrorKind::RankDeficient: return "RankDeficient";
    case ErrorKind::IrregularPencil: return "IrregularPencil";
    case ErrorKind::PoleOfCayley: return "PoleOfCayley";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::GridError: return "GridError";
    case ErrorKind::OnSpectrum: return "OnSpectrum";
    case ErrorKind::ZeroK: return "ZeroK";
    case ErrorKind::WrongClass: return "WrongClass";
    case ErrorKind::KappaTooSmall: return "KappaTooSmall";
    case ErrorKind::ContourTooClose: return "ContourTooClose";
    case ErrorKind::ContourThroughZero: return "ContourThroughZero";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::SingularStep: return "SingularStep";
    case ErrorKind::NotAStarGraph: return "NotAStarGraph";
    case ErrorKind::SpecError: return "SpecError";
  }
  return "Unknown";
}

}  // namespace qgraph

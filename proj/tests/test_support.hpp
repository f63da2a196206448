#pragma once

// Shared test utilities: seeded generators and independent oracles.  The
// oracles deliberately avoid the library's own code paths.

#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "qgraph/boundary.hpp"
#include "qgraph/graph.hpp"
#include "qgraph/matrixcore.hpp"
#include "qgraph/types.hpp"

namespace testsupport {

using qgraph::CMatrix;
using qgraph::Complex;
using qgraph::CVector;
using qgraph::Index;

inline std::mt19937& rng(unsigned seed = 0) {
  static std::mt19937 gen(12345u);
  if (seed != 0) gen.seed(seed);
  return gen;
}

inline CMatrix random_matrix(Index rows, Index cols, std::mt19937& gen) {
  std::normal_distribution<double> dist(0.0, 1.0);
  CMatrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) m(i, j) = Complex(dist(gen), dist(gen));
  }
  return m;
}

inline CMatrix random_unitary(Index n, std::mt19937& gen) {
  Eigen::HouseholderQR<CMatrix> qr(random_matrix(n, n, gen));
  CMatrix q = qr.householderQ();
  return q;
}

/// Invertible with condition number <= kappa (singular values in [1/kappa, 1]).
inline CMatrix random_invertible(Index n, std::mt19937& gen, double kappa = 1e3) {
  const CMatrix u = random_unitary(n, gen);
  const CMatrix v = random_unitary(n, gen);
  std::uniform_real_distribution<double> dist(1.0 / kappa, 1.0);
  Eigen::VectorXd s(n);
  for (Index i = 0; i < n; ++i) s(i) = dist(gen);
  return u * s.asDiagonal() * v.adjoint();
}

/// Random Kostrykin-Schrader pair: A = L + P, B = P_perp with L Hermitian on
/// ran P_perp; satisfies A B* = B A* and rank (A B) = d by construction.
inline qgraph::boundary::BoundaryConditions random_selfadjoint_pair(Index d, std::mt19937& gen) {
  std::uniform_int_distribution<Index> rdist(0, d);
  const Index r = rdist(gen);  // dim ker B
  const CMatrix q = random_unitary(d, gen);
  const CMatrix pperp = q.leftCols(d - r) * q.leftCols(d - r).adjoint();
  const CMatrix p = CMatrix::Identity(d, d) - pperp;
  const CMatrix h0 = random_matrix(d, d, gen);
  const CMatrix l = pperp * (0.5 * (h0 + h0.adjoint())) * pperp;
  return qgraph::boundary::BoundaryConditions(l + p, pperp);
}

// ---------------------------------------------------------------------------
// Oracle 1: one-sided Jacobi SVD in long double arithmetic.
// ---------------------------------------------------------------------------

using LComplex = std::complex<long double>;
using LMatrix = std::vector<std::vector<LComplex>>;

inline std::vector<long double> jacobi_singular_values(const CMatrix& a) {
  const Index m0 = a.rows(), n0 = a.cols();
  const bool transpose = m0 < n0;
  const Index m = transpose ? n0 : m0;
  const Index n = transpose ? m0 : n0;
  LMatrix w(static_cast<size_t>(m), std::vector<LComplex>(static_cast<size_t>(n)));
  for (Index i = 0; i < m; ++i) {
    for (Index j = 0; j < n; ++j) {
      const Complex v = transpose ? a(j, i) : a(i, j);
      w[static_cast<size_t>(i)][static_cast<size_t>(j)] =
          LComplex(static_cast<long double>(v.real()), static_cast<long double>(v.imag()));
    }
  }
  auto col_dot = [&](Index p, Index q) {  // <col_p, col_q>
    LComplex acc(0.0L, 0.0L);
    for (Index i = 0; i < m; ++i) {
      acc += std::conj(w[static_cast<size_t>(i)][static_cast<size_t>(p)]) *
             w[static_cast<size_t>(i)][static_cast<size_t>(q)];
    }
    return acc;
  };
  for (int sweep = 0; sweep < 60; ++sweep) {
    long double off = 0.0L;
    for (Index p = 0; p < n; ++p) {
      for (Index q = p + 1; q < n; ++q) {
        const long double app = col_dot(p, p).real();
        const long double aqq = col_dot(q, q).real();
        LComplex apq = col_dot(p, q);
        const long double mag = std::abs(apq);
        if (mag <= 1e-30L * std::sqrt(app * aqq) || mag == 0.0L) continue;
        off += mag;
        // Rotate column q by the phase of apq, then apply a real rotation.
        const LComplex phase = std::conj(apq) / mag;
        for (Index i = 0; i < m; ++i) w[static_cast<size_t>(i)][static_cast<size_t>(q)] *= phase;
        const long double zeta = (aqq - app) / (2.0L * mag);
        const long double t =
            (zeta >= 0.0L ? 1.0L : -1.0L) / (std::abs(zeta) + std::sqrt(1.0L + zeta * zeta));
        const long double cs = 1.0L / std::sqrt(1.0L + t * t);
        const long double sn = t * cs;
        for (Index i = 0; i < m; ++i) {
          const LComplex wp = w[static_cast<size_t>(i)][static_cast<size_t>(p)];
          const LComplex wq = w[static_cast<size_t>(i)][static_cast<size_t>(q)];
          w[static_cast<size_t>(i)][static_cast<size_t>(p)] = cs * wp - sn * wq;
          w[static_cast<size_t>(i)][static_cast<size_t>(q)] = sn * wp + cs * wq;
        }
      }
    }
    if (off == 0.0L) break;
  }
  std::vector<long double> sv;
  for (Index p = 0; p < n; ++p) sv.push_back(std::sqrt(col_dot(p, p).real()));
  std::sort(sv.begin(), sv.end(), std::greater<long double>());
  return sv;
}

// ---------------------------------------------------------------------------
// Oracle 2: scalar Newton for sin(k) = k in the upper half plane.
// ---------------------------------------------------------------------------

inline std::vector<Complex> sin_equals_k_roots(int count) {
  std::vector<Complex> roots;
  for (int n = 1; roots.size() < static_cast<size_t>(count) && n < 40; ++n) {
    // Asymptotics: Re k near (2n + 1/2) pi, Im k near ln((4n + 1) pi).
    const double x0 = (2.0 * n + 0.5) * M_PI;
    Complex k(x0, std::log((4.0 * n + 1.0) * M_PI));
    for (int it = 0; it < 200; ++it) {
      const Complex g = std::sin(k) - k;
      const Complex gp = std::cos(k) - 1.0;
      const Complex step = g / gp;
      k -= step;
      if (std::abs(step) < 1e-14 * (1.0 + std::abs(k))) break;
    }
    if (std::abs(std::sin(k) - k) < 1e-12 && k.imag() > 0.1) roots.push_back(k);
  }
  return roots;
}

// ---------------------------------------------------------------------------
// Oracle 3: brute-force subspace preimage through the stacked system
// [M, -V] (x, c)^T = 0 (a different algebraic route than P_{V-perp} M).
// ---------------------------------------------------------------------------

inline qgraph::matrixcore::Subspace brute_force_preimage(const CMatrix& m,
                                                         const qgraph::matrixcore::Subspace& v) {
  CMatrix stacked(m.rows(), m.cols() + v.dim());
  stacked.leftCols(m.cols()) = m;
  stacked.rightCols(v.dim()) = -v.basis();
  const auto null = qgraph::matrixcore::kernel(stacked);
  const CMatrix xs = null.basis().topRows(m.cols());
  return qgraph::matrixcore::Subspace::from_span(xs);
}

inline double rel_err(double got, double want) {
  return std::abs(got - want) / std::max(1.0, std::abs(want));
}

/// Least-squares slope of y against x.
inline double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace testsupport

#include "qgraph/boundary.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

namespace qgraph::boundary {

using matrixcore::Subspace;

BoundaryConditions::BoundaryConditions(CMatrix a, CMatrix b) : A(std::move(a)), B(std::move(b)) {
  if (A.rows() != A.cols() || B.rows() != B.cols() || A.rows() != B.rows()) {
    fail(ErrorKind::ShapeError, "A and B must be square of equal size");
  }
  if (A.rows() == 0) fail(ErrorKind::ShapeError, "empty boundary conditions");
  if (!matrixcore::all_finite(A) || !matrixcore::all_finite(B)) {
    fail(ErrorKind::InvalidMatrix, "boundary matrices have non-finite entries");
  }
}

BoundaryConditions dirichlet(Index d) {
  return BoundaryConditions(CMatrix::Identity(d, d), CMatrix::Zero(d, d));
}

BoundaryConditions neumann(Index d) {
  return BoundaryConditions(CMatrix::Zero(d, d), CMatrix::Identity(d, d));
}

BoundaryConditions delta(Complex gamma, Index d) {
  CMatrix a = CMatrix::Zero(d, d);
  CMatrix b = CMatrix::Zero(d, d);
  for (Index r = 0; r + 1 < d; ++r) {
    a(r, r) = 1.0;
    a(r, r + 1) = -1.0;
  }
  a(d - 1, 0) = -gamma;
  b.row(d - 1).setOnes();
  return BoundaryConditions(std::move(a), std::move(b));
}

BoundaryConditions kirchhoff(Index d) { return delta(0.0, d); }

BoundaryConditions delta_prime(Complex gamma, Index d) {
  BoundaryConditions base = delta(gamma, d);
  return BoundaryConditions(base.B, base.A);
}

BoundaryConditions pt_point(double tau) {
  CMatrix a(2, 2), b(2, 2);
  const Complex eit = std::exp(iunit * tau);
  a << 1.0, -eit, 0.0, 0.0;
  b << 0.0, 0.0, 1.0, std::exp(-iunit * tau);
  return BoundaryConditions(std::move(a), std::move(b));
}

BoundaryConditions intermediate() {
  CMatrix a = CMatrix::Identity(2, 2);
  CMatrix b = CMatrix::Zero(2, 2);
  b(1, 0) = -1.0;
  return BoundaryConditions(std::move(a), std::move(b));
}

CMatrix projection_onto_M(const BoundaryConditions& bc, RankTolerance tol) {
  const Index d = bc.d();
  const CMatrix gram = bc.A * bc.A.adjoint() + bc.B * bc.B.adjoint();
  if (matrixcore::numeric_rank(gram, tol) < d) {
    fail(ErrorKind::RankDeficient, "AA* + BB* is singular: dim M(A,B) < d");
  }
  CMatrix stacked(2 * d, d);  // [A*; B*]
  stacked.topRows(d) = bc.A.adjoint();
  stacked.bottomRows(d) = bc.B.adjoint();
  CMatrix wide(d, 2 * d);  // [A B]
  wide.leftCols(d) = bc.A;
  wide.rightCols(d) = bc.B;
  const CMatrix p_perp = stacked * Eigen::PartialPivLU<CMatrix>(gram).solve(wide);
  return CMatrix::Identity(2 * d, 2 * d) - p_perp;
}

bool equivalent(const BoundaryConditions& bc1, const BoundaryConditions& bc2, double tol) {
  return grassmann_distance(bc1, bc2) <= tol;
}

double grassmann_distance(const BoundaryConditions& bc1, const BoundaryConditions& bc2) {
  if (bc1.d() != bc2.d()) fail(ErrorKind::ShapeError, "dimension mismatch");
  return matrixcore::operator_norm(projection_onto_M(bc1) - projection_onto_M(bc2));
}

namespace {

/// Complex Schur form with diagonal entries sorted by (Re, Im): M = Q T Q*.
void ordered_schur(const CMatrix& m, CMatrix& q, CMatrix& t) {
  const Index n = m.rows();
  if (n == 0) {
    q = t = CMatrix(0, 0);
    return;
  }
  Eigen::ComplexSchur<CMatrix> schur(m);
  q = schur.matrixU();
  t = schur.matrixT();
  auto key_less = [](Complex a, Complex b) {
    if (a.real() != b.real()) return a.real() < b.real();
    return a.imag() < b.imag();
  };
  // Bubble adjacent diagonal entries with a unitary Givens-type swap.
  for (Index pass = 0; pass + 1 < n; ++pass) {
    bool swapped = false;
    for (Index i = 0; i + 1 < n; ++i) {
      const Complex a = t(i, i), c = t(i + 1, i + 1);
      if (!key_less(c, a)) continue;
      const Complex b = t(i, i + 1);
      // First column of G is the unit eigenvector of [[a,b],[0,c]] for c.
      Complex x1 = b, x2 = c - a;
      const double nx = std::sqrt(std::norm(x1) + std::norm(x2));
      if (nx == 0.0) continue;  // equal eigenvalues, nothing to move
      x1 /= nx;
      x2 /= nx;
      CMatrix g(2, 2);
      g << x1, -std::conj(x2), x2, std::conj(x1);
      t.block(i, 0, 2, n) = g.adjoint() * t.block(i, 0, 2, n);
      t.block(0, i, n, 2) = t.block(0, i, n, 2) * g;
      q.block(0, i, n, 2) = q.block(0, i, n, 2) * g;
      t(i + 1, i) = 0.0;  // exact by construction
      swapped = true;
    }
    if (!swapped) break;
  }
}

Index nilpotency_index_of(const CMatrix& n_b, RankTolerance tol) {
  const Index sz = n_b.rows();
  if (sz == 0) return 0;
  CMatrix power = CMatrix::Identity(sz, sz);
  for (Index nu = 1; nu <= sz; ++nu) {
    power = power * n_b;
    const double norm = power.norm();
    if (norm == 0.0 || matrixcore::numeric_rank(power / std::max(norm, 1e-300), tol) == 0) {
      return nu;
    }
  }
  return sz + 1;  // not nilpotent at tolerance; callers treat this as failure
}

}  // namespace

QuasiWeierstrassForm quasi_weierstrass(const BoundaryConditions& bc, RankTolerance tol) {
  const Index d = bc.d();
  const auto pencil = matrixcore::pencil_eigenvalues(bc.A, bc.B, tol);
  if (pencil.singular) {
    fail(ErrorKind::IrregularPencil, "pencil A + sB is singular");
  }

  // Wong sequences: V_{i+1} = A^{-1}(B V_i) from the full space (decreasing),
  // W_{i+1} = B^{-1}(A W_i) from {0} (increasing); both stabilize within d steps.
  // Rank cuts are anchored at ||A||, ||B||: the iterates hit numerically zero
  // products, which self-relative thresholds cannot recognize.
  const double scale_a = matrixcore::operator_norm(bc.A);
  const double scale_b = matrixcore::operator_norm(bc.B);
  Subspace v = Subspace::full(d);
  for (Index it = 0; it <= d; ++it) {
    const Subspace bv = Subspace::from_span_scaled(bc.B * v.basis(), scale_b, tol);
    const Subspace next = matrixcore::subspace_preimage_scaled(bc.A, bv, scale_a, tol);
    if (next.dim() == v.dim()) break;
    v = next;
  }
  Subspace w = Subspace::zero(d);
  for (Index it = 0; it <= d; ++it) {
    const Subspace aw = Subspace::from_span_scaled(bc.A * w.basis(), scale_a, tol);
    const Subspace next = matrixcore::subspace_preimage_scaled(bc.B, aw, scale_b, tol);
    if (next.dim() == w.dim()) break;
    w = next;
  }

  const Index m = v.dim();
  if (w.dim() != d - m) {
    fail(ErrorKind::NoConvergence, "Wong sequences did not split the space");
  }

  CMatrix t_mat(d, d);  // G^{-1} = [V W]
  t_mat.leftCols(m) = v.basis();
  t_mat.rightCols(d - m) = w.basis();
  CMatrix f_mat(d, d);  // F = [B V, A W]
  f_mat.leftCols(m) = bc.B * v.basis();
  f_mat.rightCols(d - m) = bc.A * w.basis();
  if (matrixcore::numeric_rank(t_mat, tol) < d || matrixcore::numeric_rank(f_mat, tol) < d) {
    fail(ErrorKind::NoConvergence, "Wong subspaces are numerically degenerate");
  }

  // A V = (B V) L and B W = (A W) N_B, both consistent at stabilization.
  QuasiWeierstrassForm out;
  out.m = m;
  out.L = (m > 0) ? CMatrix(f_mat.leftCols(m).colPivHouseholderQr().solve(bc.A * v.basis()))
                  : CMatrix(0, 0);
  out.N_B = (d - m > 0)
                ? CMatrix(f_mat.rightCols(d - m).colPivHouseholderQr().solve(bc.B * w.basis()))
                : CMatrix(0, 0);
  if (d - m > 0) {
    // Zero out a nilpotent block of solver-roundoff size; the reference scale
    // is the conditioning of the A W system against ||B||.
    const double sigma_aw = matrixcore::smallest_singular_value(f_mat.rightCols(d - m));
    const double nb_ref =
        tol.relative * static_cast<double>(d) * (1.0 + scale_b / std::max(sigma_aw, 1e-300));
    if (out.N_B.norm() <= nb_ref) out.N_B.setZero();
  }

  // Canonical representative: Schur forms, eigenvalues ordered by (Re, Im),
  // with the unitaries absorbed into F and G.
  CMatrix ql, tl, qn, tn;
  ordered_schur(out.L, ql, tl);
  ordered_schur(out.N_B, qn, tn);
  out.L = tl;
  out.N_B = tn;
  // Nilpotent Schur form: zero out the round-off diagonal.
  for (Index i = 0; i < out.N_B.rows(); ++i) out.N_B(i, i) = 0.0;

  CMatrix qblock = CMatrix::Zero(d, d);
  qblock.topLeftCorner(m, m) = ql;
  qblock.bottomRightCorner(d - m, d - m) = qn;
  out.F = f_mat * qblock;
  out.G = (t_mat * qblock).inverse();
  out.nilpotency_index = nilpotency_index_of(out.N_B, tol);
  if (out.nilpotency_index > d - m) {
    fail(ErrorKind::NoConvergence, "nilpotent block is not nilpotent at tolerance");
  }
  return out;
}

CMatrix cayley(const BoundaryConditions& bc, Complex k, RankTolerance tol) {
  const CMatrix lhs = bc.A + iunit * k * bc.B;
  Eigen::JacobiSVD<CMatrix> svd(lhs);
  const auto& sv = svd.singularValues();
  if (sv(0) == 0.0 || sv(sv.size() - 1) <= tol.threshold(bc.d(), bc.d(), sv(0))) {
    fail(ErrorKind::PoleOfCayley, "A + ikB is singular at this k");
  }
  return -Eigen::PartialPivLU<CMatrix>(lhs).solve(bc.A - iunit * k * bc.B);
}

CayleyPoleReport cayley_poles(const BoundaryConditions& bc, RankTolerance tol) {
  const QuasiWeierstrassForm qw = quasi_weierstrass(bc, tol);
  CayleyPoleReport out;
  const double lscale = 1.0 + (qw.m > 0 ? qw.L.norm() : 0.0);
  // The zero eigenvalue of L is decided by rank probes, which stay reliable
  // when a defective eigenvalue scatters its computed cluster (radius about
  // eps^{1/(chain+1)}); the scattered cluster is absorbed into the zero group.
  Index zero_chain = 0;
  if (qw.m > 0 && matrixcore::numeric_rank(qw.L, tol) < qw.m) {
    zero_chain = matrixcore::jordan_chain_length(qw.L, 0.0, tol);
  }
  const double zero_radius =
      zero_chain > 0
          ? 20.0 * lscale * std::pow(2.2e-16, 1.0 / static_cast<double>(zero_chain + 1))
          : 1e-8 * lscale;
  if (zero_chain >= 2) out.finite_poles.push_back({Complex(0.0, 0.0), zero_chain - 1});
  for (const auto& ev : matrixcore::clustered_eigenvalues(qw.L)) {
    if (std::abs(ev.mu) <= zero_radius) continue;
    const Index chain =
        matrixcore::jordan_chain_length_clustered(qw.L, ev.mu, ev.multiplicity, tol);
    out.finite_poles.push_back({iunit * ev.mu, chain});
  }
  std::sort(out.finite_poles.begin(), out.finite_poles.end(),
            [](const CayleyPole& a, const CayleyPole& b) {
              if (a.k.real() != b.k.real()) return a.k.real() < b.k.real();
              return a.k.imag() < b.k.imag();
            });
  out.growth_order_at_infinity = std::max<Index>(qw.nilpotency_index - 1, 0);
  out.is_uniformly_bounded = (out.growth_order_at_infinity == 0);
  return out;
}

const char* to_string(BCClass c) {
  switch (c) {
    case BCClass::RankDeficient: return "RankDeficient";
    case BCClass::Irregular: return "Irregular";
    case BCClass::RegularNonQuasiSectorial: return "RegularNonQuasiSectorial";
    case BCClass::QuasiSectorial: return "QuasiSectorial";
    case BCClass::SelfAdjoint: return "SelfAdjoint";
  }
  return "Unknown";
}

Classification classify(const BoundaryConditions& bc, RankTolerance tol) {
  const Index d = bc.d();
  Classification out;
  const CMatrix gram_rows = bc.A * bc.A.adjoint() + bc.B * bc.B.adjoint();
  if (matrixcore::numeric_rank(gram_rows, tol) < d) {
    out.tag = BCClass::RankDeficient;
    return out;
  }
  const CMatrix gram_cols = bc.A.adjoint() * bc.A + bc.B.adjoint() * bc.B;
  if (matrixcore::numeric_rank(gram_cols, tol) < d ||
      matrixcore::pencil_eigenvalues(bc.A, bc.B, tol).singular) {
    out.tag = BCClass::Irregular;
    return out;
  }
  out.qw = quasi_weierstrass(bc, tol);
  if (!out.qw->nilpotent_part_vanishes()) {
    out.tag = BCClass::RegularNonQuasiSectorial;
    return out;
  }
  const double commutator = (bc.A * bc.B.adjoint() - bc.B * bc.A.adjoint()).norm();
  const double scale = bc.A.norm() * bc.B.norm() + 1.0;
  out.tag = (commutator <= tol.relative * scale) ? BCClass::SelfAdjoint : BCClass::QuasiSectorial;
  return out;
}

std::optional<CanonicalPL> canonical_PL(const BoundaryConditions& bc, RankTolerance tol) {
  const Index d = bc.d();
  if (matrixcore::pencil_eigenvalues(bc.A, bc.B, tol).singular) {
    fail(ErrorKind::IrregularPencil, "canonical_PL needs regular boundary conditions");
  }
  const Subspace ker_b = matrixcore::kernel(bc.B, tol);
  const Subspace ran_b = Subspace::from_span(bc.B, tol);
  const Subspace m1 = matrixcore::subspace_preimage(bc.A, ran_b, tol);
  const Subspace target = ker_b.orthogonal_complement();
  if (m1.dim() != target.dim() || m1.distance(target) > 1e-8) return std::nullopt;

  CanonicalPL out;
  out.P = ker_b.projector();
  const CMatrix p_perp = CMatrix::Identity(d, d) - out.P;
  // For each basis vector v of (Ker B)^perp solve A v + B x = 0; L v = -P_perp x.
  CMatrix cols(d, target.dim());
  for (Index j = 0; j < target.dim(); ++j) {
    const CVector v = target.basis().col(j);
    const CVector x = bc.B.completeOrthogonalDecomposition().solve(CVector(-bc.A * v));
    if ((bc.A * v + bc.B * x).norm() > 1e-8 * (bc.A.norm() + bc.B.norm())) {
      return std::nullopt;  // inconsistent partner system
    }
    cols.col(j) = -(p_perp * x);
  }
  out.L = cols * target.basis().adjoint();
  return out;
}

BoundaryConditions recover_from_cayley(const CMatrix& s, Complex k) {
  if (s.rows() != s.cols() || s.rows() == 0) fail(ErrorKind::ShapeError, "S must be square");
  if (k == Complex(0.0, 0.0)) fail(ErrorKind::InvalidArgument, "k = 0 cannot be inverted");
  const Index d = s.rows();
  CMatrix a = -0.5 * (s - CMatrix::Identity(d, d));
  CMatrix b = (s + CMatrix::Identity(d, d)) / (2.0 * iunit * k);
  return BoundaryConditions(std::move(a), std::move(b));
}

}  // namespace qgraph::boundary

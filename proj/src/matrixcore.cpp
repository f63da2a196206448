#include "qgraph/matrixcore.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace qgraph::matrixcore {

namespace {

Eigen::JacobiSVD<CMatrix> svd_of(const Eigen::Ref<const CMatrix>& m, unsigned options = 0) {
  if (m.size() == 0) fail(ErrorKind::ShapeError, "empty matrix");
  if (!all_finite(m)) fail(ErrorKind::InvalidMatrix, "matrix has non-finite entries");
  return Eigen::JacobiSVD<CMatrix>(m, options);
}

Index rank_from_singular_values(const RVector& sv, Index rows, Index cols, RankTolerance tol) {
  if (sv.size() == 0) return 0;
  const double smax = sv(0);
  if (smax == 0.0) return 0;
  const double thr = tol.threshold(rows, cols, smax);
  Index r = 0;
  while (r < sv.size() && sv(r) > thr) ++r;
  return r;
}

Index rank_against_scale(const RVector& sv, Index rows, Index cols, double scale,
                         RankTolerance tol) {
  if (sv.size() == 0 || scale <= 0.0) return 0;
  const double thr = tol.threshold(rows, cols, scale);
  Index r = 0;
  while (r < sv.size() && sv(r) > thr) ++r;
  return r;
}

}  // namespace

bool all_finite(const Eigen::Ref<const CMatrix>& m) {
  return m.allFinite();
}

Index numeric_rank(const Eigen::Ref<const CMatrix>& m, RankTolerance tol) {
  auto svd = svd_of(m);
  return rank_from_singular_values(svd.singularValues(), m.rows(), m.cols(), tol);
}

Index numeric_rank_scaled(const Eigen::Ref<const CMatrix>& m, double scale, RankTolerance tol) {
  auto svd = svd_of(m);
  return rank_against_scale(svd.singularValues(), m.rows(), m.cols(), scale, tol);
}

double operator_norm(const Eigen::Ref<const CMatrix>& m) {
  if (m.size() == 0) return 0.0;
  return svd_of(m).singularValues()(0);
}

double smallest_singular_value(const Eigen::Ref<const CMatrix>& m) {
  auto svd = svd_of(m);
  return svd.singularValues()(svd.singularValues().size() - 1);
}

Subspace Subspace::zero(Index ambient) {
  return Subspace(ambient, CMatrix(ambient, 0));
}

Subspace Subspace::full(Index ambient) {
  return Subspace(ambient, CMatrix::Identity(ambient, ambient));
}

Subspace Subspace::from_span(const Eigen::Ref<const CMatrix>& span, RankTolerance tol) {
  if (span.cols() == 0) return zero(span.rows());
  auto svd = svd_of(span, Eigen::ComputeThinU);
  const Index r = rank_from_singular_values(svd.singularValues(), span.rows(), span.cols(), tol);
  return Subspace(span.rows(), svd.matrixU().leftCols(r));
}

Subspace Subspace::from_span_scaled(const Eigen::Ref<const CMatrix>& span, double scale,
                                    RankTolerance tol) {
  if (span.cols() == 0) return zero(span.rows());
  auto svd = svd_of(span, Eigen::ComputeThinU);
  const Index r =
      rank_against_scale(svd.singularValues(), span.rows(), span.cols(), scale, tol);
  return Subspace(span.rows(), svd.matrixU().leftCols(r));
}

Subspace Subspace::from_orthonormal(const CMatrix& basis) {
  if (basis.cols() > 0) {
    const CMatrix g = basis.adjoint() * basis;
    if ((g - CMatrix::Identity(basis.cols(), basis.cols())).norm() > 1e-12 * basis.cols()) {
      fail(ErrorKind::InvalidMatrix, "columns are not orthonormal");
    }
  }
  return Subspace(basis.rows(), basis);
}

CMatrix Subspace::projector() const {
  if (dim() == 0) return CMatrix::Zero(ambient_, ambient_);
  return basis_ * basis_.adjoint();
}

Subspace Subspace::orthogonal_complement() const {
  if (dim() == 0) return full(ambient_);
  if (dim() == ambient_) return zero(ambient_);
  // Null space of basis^*: the trailing right singular vectors.
  Eigen::JacobiSVD<CMatrix> svd(basis_.adjoint(), Eigen::ComputeFullV);
  return Subspace(ambient_, svd.matrixV().rightCols(ambient_ - dim()));
}

bool Subspace::contains(const Eigen::Ref<const CVector>& x, double tol) const {
  const double nx = x.norm();
  if (nx == 0.0) return true;
  const CVector residual = x - basis_ * (basis_.adjoint() * x);
  return residual.norm() <= tol * nx;
}

bool Subspace::contains(const Subspace& other, double tol) const {
  for (Index j = 0; j < other.dim(); ++j) {
    if (!contains(other.basis().col(j), tol)) return false;
  }
  return true;
}

double Subspace::distance(const Subspace& other) const {
  if (ambient_ != other.ambient_) fail(ErrorKind::ShapeError, "ambient dimensions differ");
  return operator_norm(projector() - other.projector());
}

Subspace kernel(const Eigen::Ref<const CMatrix>& m, RankTolerance tol) {
  auto svd = svd_of(m, Eigen::ComputeFullV);
  const Index r = rank_from_singular_values(svd.singularValues(), m.rows(), m.cols(), tol);
  return Subspace::from_orthonormal(svd.matrixV().rightCols(m.cols() - r));
}

Subspace kernel_scaled(const Eigen::Ref<const CMatrix>& m, double scale, RankTolerance tol) {
  auto svd = svd_of(m, Eigen::ComputeFullV);
  const Index r = rank_against_scale(svd.singularValues(), m.rows(), m.cols(), scale, tol);
  return Subspace::from_orthonormal(svd.matrixV().rightCols(m.cols() - r));
}

Subspace subspace_preimage(const Eigen::Ref<const CMatrix>& m, const Subspace& v,
                           RankTolerance tol) {
  if (v.ambient_dim() != m.rows()) fail(ErrorKind::ShapeError, "subspace ambient != rows");
  const CMatrix pperp = CMatrix::Identity(m.rows(), m.rows()) - v.projector();
  return kernel(pperp * m, tol);
}

Subspace subspace_preimage_scaled(const Eigen::Ref<const CMatrix>& m, const Subspace& v,
                                  double scale, RankTolerance tol) {
  if (v.ambient_dim() != m.rows()) fail(ErrorKind::ShapeError, "subspace ambient != rows");
  const CMatrix pperp = CMatrix::Identity(m.rows(), m.rows()) - v.projector();
  return kernel_scaled(pperp * m, scale, tol);
}

std::vector<PencilEigenvalue> clustered_eigenvalues(const CMatrix& m, double cluster_rel) {
  std::vector<PencilEigenvalue> out;
  if (m.rows() == 0) return out;
  Eigen::ComplexEigenSolver<CMatrix> es(m, /*computeEigenvectors=*/false);
  std::vector<Complex> evs(es.eigenvalues().data(), es.eigenvalues().data() + m.rows());
  std::sort(evs.begin(), evs.end(), [](Complex a, Complex b) {
    if (a.real() != b.real()) return a.real() < b.real();
    return a.imag() < b.imag();
  });
  for (Complex ev : evs) {
    if (!out.empty() && std::abs(ev - out.back().mu) <= cluster_rel * (1.0 + std::abs(ev))) {
      // Running mean keeps the cluster representative stable.
      auto& c = out.back();
      c.mu = (c.mu * static_cast<double>(c.multiplicity) + ev) /
             static_cast<double>(c.multiplicity + 1);
      c.multiplicity += 1;
    } else {
      out.push_back({ev, 1});
    }
  }
  return out;
}

PencilSpectrum pencil_eigenvalues(const CMatrix& a, const CMatrix& b, RankTolerance tol) {
  if (a.rows() != a.cols() || b.rows() != b.cols() || a.rows() != b.rows()) {
    fail(ErrorKind::ShapeError, "pencil matrices must be square of equal size");
  }
  if (!all_finite(a) || !all_finite(b)) fail(ErrorKind::InvalidMatrix, "non-finite entries");
  const Index d = a.rows();
  PencilSpectrum out;
  if (d == 0) fail(ErrorKind::ShapeError, "empty pencil");

  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 && nb == 0.0) {
    out.singular = true;
    return out;
  }
  const double rho = (nb > 0.0) ? std::max(na, 1e-3 * nb) / nb : 1.0;

  // Degree of det(A + sB): interpolate q(t) = det(A + rho t B) on the unit circle
  // (d+1 nodes, coefficients by inverse DFT) and read off the top nonzero coefficient.
  const Index n_nodes = d + 1;
  CVector q(n_nodes);
  double qmax = 0.0;
  Index best_node = 0;
  double best_sigma = -1.0;
  std::vector<CMatrix> node_matrix(n_nodes);
  for (Index j = 0; j < n_nodes; ++j) {
    const Complex t = std::exp(iunit * (2.0 * M_PI * double(j) / double(n_nodes)));
    node_matrix[j] = a + rho * t * b;
    q(j) = Eigen::PartialPivLU<CMatrix>(node_matrix[j]).determinant();
    qmax = std::max(qmax, std::abs(q(j)));
  }
  // Singular pencil: a degree-<=d polynomial vanishing at d+1 points vanishes identically.
  // Decide numerically through sigma_min of the node matrices, not the raw determinants.
  bool all_singular = true;
  for (Index j = 0; j < n_nodes; ++j) {
    Eigen::JacobiSVD<CMatrix> svd(node_matrix[j]);
    const auto& sv = svd.singularValues();
    const double smax = sv(0);
    const double smin = sv(sv.size() - 1);
    if (smax > 0.0 && smin > tol.threshold(d, d, smax)) {
      all_singular = false;
      if (smin / smax > best_sigma) {
        best_sigma = smin / smax;
        best_node = j;
      }
    }
  }
  if (all_singular) {
    out.singular = true;
    return out;
  }

  CVector coeff = CVector::Zero(n_nodes);
  for (Index k = 0; k < n_nodes; ++k) {
    Complex acc = 0.0;
    for (Index j = 0; j < n_nodes; ++j) {
      acc += q(j) * std::exp(-iunit * (2.0 * M_PI * double(j) * double(k) / double(n_nodes)));
    }
    coeff(k) = acc / double(n_nodes);
  }
  // Degree decision relative to the largest coefficient.
  const double cmax = coeff.cwiseAbs().maxCoeff();
  Index degree = 0;
  for (Index k = 0; k < n_nodes; ++k) {
    if (std::abs(coeff(k)) > 1e-8 * cmax) degree = k;
  }
  out.degree = degree;
  out.infinite_multiplicity = d - degree;

  if (degree > 0) {
    // Shift-and-invert at the best-conditioned node: mu = lambda0 - 1/xi for the
    // `degree` largest eigenvalues xi of (A + lambda0 B)^{-1} B.
    const Complex lambda0 =
        rho * std::exp(iunit * (2.0 * M_PI * double(best_node) / double(n_nodes)));
    const CMatrix m = Eigen::PartialPivLU<CMatrix>(a + lambda0 * b).solve(b);
    Eigen::ComplexEigenSolver<CMatrix> es(m, /*computeEigenvectors=*/false);
    std::vector<Complex> xi(es.eigenvalues().data(), es.eigenvalues().data() + d);
    std::sort(xi.begin(), xi.end(),
              [](Complex x, Complex y) { return std::abs(x) > std::abs(y); });
    std::vector<Complex> mus;
    for (Index j = 0; j < degree; ++j) {
      mus.push_back(lambda0 - 1.0 / xi[static_cast<size_t>(j)]);
    }
    std::sort(mus.begin(), mus.end(), [](Complex x, Complex y) {
      if (x.real() != y.real()) return x.real() < y.real();
      return x.imag() < y.imag();
    });
    for (Complex mu : mus) {
      if (!out.finite.empty() &&
          std::abs(mu - out.finite.back().mu) <= 1e-8 * (1.0 + std::abs(mu))) {
        auto& c = out.finite.back();
        c.mu = (c.mu * static_cast<double>(c.multiplicity) + mu) /
               static_cast<double>(c.multiplicity + 1);
        c.multiplicity += 1;
      } else {
        out.finite.push_back({mu, 1});
      }
    }
  }
  return out;
}

Index jordan_chain_length_clustered(const CMatrix& m, Complex lambda,
                                    Index algebraic_multiplicity, RankTolerance tol) {
  RankTolerance widened = tol;
  widened.relative = std::max(
      tol.relative,
      10.0 * std::pow(2.2e-16, 1.0 / static_cast<double>(algebraic_multiplicity + 1)));
  try {
    return jordan_chain_length(m, lambda, widened);
  } catch (const Error&) {
    return algebraic_multiplicity;
  }
}

Index jordan_chain_length(const CMatrix& m, Complex lambda, RankTolerance tol) {
  if (m.rows() != m.cols()) fail(ErrorKind::ShapeError, "matrix must be square");
  const Index d = m.rows();
  const CMatrix shifted = m - lambda * CMatrix::Identity(d, d);
  Index prev = numeric_rank(shifted, tol);
  if (prev >= d) fail(ErrorKind::NotAnEigenvalue, "lambda is not an eigenvalue at tolerance");
  // Normalize each power so rank decisions stay scale-free.
  CMatrix power = shifted;
  for (Index j = 1; j <= d; ++j) {
    CMatrix next_power = power * shifted;
    const double norm = next_power.norm();
    if (norm > 0.0) next_power /= norm;
    const Index next = numeric_rank(next_power, tol);
    if (next == prev) return j;
    power = next_power;
    prev = next;
  }
  return d;
}

}  // namespace qgraph::matrixcore

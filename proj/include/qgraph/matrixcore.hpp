#pragma once

#include <vector>

#include "qgraph/types.hpp"

namespace qgraph::matrixcore {

/// Number of singular values above the relative threshold; 0 for the zero matrix.
Index numeric_rank(const Eigen::Ref<const CMatrix>& m, RankTolerance tol = {});

/// Rank with the threshold anchored at an external scale instead of the
/// matrix's own largest singular value; required wherever a product such as
/// B*V may be numerically zero (e.g. Wong sequences).
Index numeric_rank_scaled(const Eigen::Ref<const CMatrix>& m, double scale, RankTolerance tol = {});

/// Largest singular value (operator 2-norm).
double operator_norm(const Eigen::Ref<const CMatrix>& m);

/// Smallest singular value.
double smallest_singular_value(const Eigen::Ref<const CMatrix>& m);

bool all_finite(const Eigen::Ref<const CMatrix>& m);

/// A subspace of C^n held as an orthonormal column basis.
class Subspace {
 public:
  static Subspace zero(Index ambient);
  static Subspace full(Index ambient);
  /// Orthonormal basis of the column span of `span` at tolerance.
  static Subspace from_span(const Eigen::Ref<const CMatrix>& span, RankTolerance tol = {});
  /// Column span with the rank cut anchored at `scale`.
  static Subspace from_span_scaled(const Eigen::Ref<const CMatrix>& span, double scale,
                                   RankTolerance tol = {});
  /// Wraps columns that are already orthonormal (checked to 1e-12).
  static Subspace from_orthonormal(const CMatrix& basis);

  Index ambient_dim() const { return ambient_; }
  Index dim() const { return basis_.cols(); }
  const CMatrix& basis() const { return basis_; }

  CMatrix projector() const;  // basis * basis^*
  Subspace orthogonal_complement() const;
  bool contains(const Eigen::Ref<const CVector>& x, double tol = 1e-9) const;
  bool contains(const Subspace& other, double tol = 1e-9) const;
  /// Operator-norm distance of the orthogonal projectors.
  double distance(const Subspace& other) const;

 private:
  Subspace(Index ambient, CMatrix basis) : ambient_(ambient), basis_(std::move(basis)) {}
  Index ambient_ = 0;
  CMatrix basis_;  // ambient x dim, orthonormal columns
};

/// Orthonormal basis of the null space at tolerance; dim = cols - numeric_rank.
Subspace kernel(const Eigen::Ref<const CMatrix>& m, RankTolerance tol = {});

/// Null space with the rank cut anchored at `scale`.
Subspace kernel_scaled(const Eigen::Ref<const CMatrix>& m, double scale, RankTolerance tol = {});

/// {x : M x in V}, computed as kernel of (P_{V^perp} M).
Subspace subspace_preimage(const Eigen::Ref<const CMatrix>& m, const Subspace& v,
                           RankTolerance tol = {});

/// Preimage with the kernel cut anchored at `scale` (typically sigma_max(M)).
Subspace subspace_preimage_scaled(const Eigen::Ref<const CMatrix>& m, const Subspace& v,
                                  double scale, RankTolerance tol = {});

struct PencilEigenvalue {
  Complex mu;
  Index multiplicity = 0;
};

/// Spectrum of the pencil A + s B.  `singular` is the distinguished
/// SingularPencil outcome (det(A + sB) vanishes identically at tolerance);
/// in that case the other fields are meaningless.
struct PencilSpectrum {
  bool singular = false;
  std::vector<PencilEigenvalue> finite;  // sorted by (Re, Im), clustered
  Index infinite_multiplicity = 0;       // d - deg det(A + sB)
  Index degree = 0;                      // deg det(A + sB)
};

/// Finite eigenvalues mu with det(A + mu B) = 0, with algebraic multiplicities,
/// plus the multiplicity carried by the point at infinity.
PencilSpectrum pencil_eigenvalues(const CMatrix& a, const CMatrix& b, RankTolerance tol = {});

/// gamma_M(lambda): smallest j >= 1 with rank((M - lambda)^j) = rank((M - lambda)^{j+1}).
Index jordan_chain_length(const CMatrix& m, Complex lambda, RankTolerance tol = {});

/// Chain length for a clustered eigenvalue of known algebraic multiplicity.
/// Defective eigenvalues scatter like eps^{1/q} under rounding, so the rank
/// probes run at a correspondingly widened tolerance; falls back to the
/// algebraic multiplicity when even that cannot see the eigenvalue.
Index jordan_chain_length_clustered(const CMatrix& m, Complex lambda, Index algebraic_multiplicity,
                                    RankTolerance tol = {});

/// Eigenvalues of `m` clustered at radius cluster_rel * (1 + |mu|), with multiplicities.
std::vector<PencilEigenvalue> clustered_eigenvalues(const CMatrix& m, double cluster_rel = 1e-8);

}  // namespace qgraph::matrixcore

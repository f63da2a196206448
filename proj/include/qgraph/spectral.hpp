#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "qgraph/boundary.hpp"
#include "qgraph/graph.hpp"
#include "qgraph/types.hpp"

namespace qgraph::spectral {

/// Branch with Im sqrt(z) >= 0 (physical sheet, lambda = k^2).
Complex upper_half_sqrt(Complex lambda);

/// T(k, a): couples the two endpoint slots of each internal edge through
/// exp(ik a_i); external slots are zero rows/columns.
CMatrix t_matrix(const graph::MetricGraph& g, Complex k);

/// det(1 - S(k, A, B) T(k, a)).  Requires |I| >= 1 and k off the Cayley poles.
Complex secular(const boundary::BoundaryConditions& bc, const graph::MetricGraph& g, Complex k);

/// det(A + ikB + (A - ikB) T(k, a)) = det(A + ikB) * secular(k): entire in k,
/// so root counting needs no pole excision.  The upper-half-plane zeros are
/// exactly the roots of eigenvalues (the eigenfunction coefficient system).
Complex secular_entire(const boundary::BoundaryConditions& bc, const graph::MetricGraph& g,
                       Complex k);

struct Rectangle {
  double re_lo = 0.0, re_hi = 0.0, im_lo = 0.0, im_hi = 0.0;
  bool contains(Complex k, double slack = 0.0) const {
    return k.real() >= re_lo - slack && k.real() <= re_hi + slack && k.imag() >= im_lo - slack &&
           k.imag() <= im_hi + slack;
  }
};

struct EnclosureRegion {
  enum class Kind { Parabola, Sector };
  Kind kind = Kind::Parabola;
  double c = 0.0;           // parabola: Re z >= c (Im z)^2 - C; sector: |Im z| <= C Re z + c
  double C = 0.0;
  double t_star = 0.0;      // Im-k threshold realizing the region
  double cone_slope = 0.0;  // sector only: Im k <= max(cone_slope |Re k|, t_star)
  double a_min = 1.0;

  bool contains(Complex lambda, double tol = 1e-9) const;
};

struct Eigenroot {
  Complex k;
  Complex lambda;  // k^2
  Index multiplicity = 1;
};

struct SpectralReport {
  std::vector<Eigenroot> point_spectrum;  // sorted by (Re k, Im k)
  bool essential_halfline = false;        // combined essential/residual flag on [0, inf)
  bool everything_is_spectrum = false;    // irregular star: sigma = C
  std::optional<Rectangle> search_region;
  std::optional<EnclosureRegion> enclosure;
  Index total_winding = 0;  // argument-principle count over the search region
};

struct SearchOptions {
  Index nodes_per_side = 128;
  Index max_depth = 14;
  double newton_tol = 1e-10;
  double cluster_rel = 1e-8;
};

/// All zeros of the secular function inside the k-rectangle, found by
/// argument-principle counting on adaptive rectangle subdivision and refined
/// by Newton iteration; multiplicity is the winding number of the terminal
/// cell.
SpectralReport compact_spectrum(const boundary::BoundaryConditions& bc,
                                const graph::MetricGraph& g, Rectangle region,
                                RankTolerance tol = {}, SearchOptions opts = {});

/// Star graphs (|I| = 0): point spectrum from the pencil roots of
/// det(A + ikB) with Im k > 0; essential spectrum [0, inf).
SpectralReport star_point_spectrum(const boundary::BoundaryConditions& bc,
                                   const graph::MetricGraph& g, RankTolerance tol = {});

/// Resolvent kernel r = r0 + r1 at energy k^2 (Im k > 0, k not a pole, off
/// the spectrum).
class GreensKernel {
 public:
  GreensKernel(const boundary::BoundaryConditions& bc, const graph::MetricGraph& g, Complex k,
               RankTolerance tol = {});

  const graph::MetricGraph& graph() const { return *g_; }
  Complex k() const { return k_; }
  const CMatrix& scattering() const { return s_; }
  /// (1 - S T)^{-1} S, the boundary part of the kernel.
  const CMatrix& boundary_part() const { return r1_; }

 private:
  const graph::MetricGraph* g_;
  Complex k_;
  CMatrix s_;
  CMatrix r1_;
};

/// u = integral of r(x, y; k) f(y) dy; satisfies -u'' - k^2 u = f and the
/// boundary conditions up to grid error.  Exponential-weighted product
/// quadrature keeps this stable for strongly decaying k (k = i kappa).
graph::EdgeFunction greens_apply(const GreensKernel& kern, const graph::EdgeFunction& f);

/// Transpose-kernel application (r(y, x) in place of r(x, y)); adjoint apply
/// is conj(greens_apply_transpose(conj(g))).
graph::EdgeFunction greens_apply_transpose(const GreensKernel& kern, const graph::EdgeFunction& f);

/// Spectral enclosure from the proof inequality ||S(k)T(k)|| < 1/2 above the
/// Im-k threshold: a parabola for quasi-sectorial conditions, a sector
/// otherwise.
EnclosureRegion enclosure(const boundary::BoundaryConditions& bc, const graph::MetricGraph& g,
                          RankTolerance tol = {});

struct NqsWitness {
  double kappa = 0.0;
  double quotient = 0.0;  // |<R phi_a, phi_b>| / (||phi_a|| ||phi_b||)
  CVector alpha;
  CVector beta;
};

/// Resolvent lower-bound witness for regular non-quasi-sectorial conditions:
/// quotient ~ C / kappa built from a cyclic vector of N_B.
NqsWitness resolvent_witness_nqs(const boundary::BoundaryConditions& bc,
                                 const graph::MetricGraph& g, double kappa,
                                 Index samples_per_edge = 4001, RankTolerance tol = {});

struct IrregularWitness {
  double quotient = 0.0;  // ||psi_v|| / ||phi_v|| <= ||R(k^2)||
  bool everything_is_spectrum = false;
};

/// Exponential lower-bound witness for irregular conditions, built on a
/// common kernel vector of A and B; for |I| = 0 reports sigma = C instead.
IrregularWitness resolvent_witness_irregular(const boundary::BoundaryConditions& bc,
                                             const graph::MetricGraph& g, Complex k,
                                             Index samples_per_edge = 4001, RankTolerance tol = {});

/// ||R(-kappa^2)|| estimated by power iteration of R*R on grid-supported
/// functions (a compression, so a slight underestimate).
double resolvent_norm_estimate(const boundary::BoundaryConditions& bc,
                               const graph::MetricGraph& g, double kappa,
                               Index samples_per_edge = 2001, int iterations = 30,
                               RankTolerance tol = {});

struct Contour {
  Complex center;
  double radius = 0.0;
};

/// Riesz projection (1/2 pi i) contour integral of the resolvent applied to f,
/// trapezoid nodes doubled until the 1e-8 Cauchy criterion holds.
graph::EdgeFunction spectral_projection(const boundary::BoundaryConditions& bc,
                                        const graph::MetricGraph& g, Contour contour,
                                        const graph::EdgeFunction& f, double tol = 1e-8,
                                        RankTolerance rtol = {});

}  // namespace qgraph::spectral

#pragma once

#include <optional>
#include <vector>

#include "qgraph/matrixcore.hpp"
#include "qgraph/types.hpp"

namespace qgraph::boundary {

/// Vertex boundary conditions A psi + B psi' = 0 on the trace vectors.
struct BoundaryConditions {
  CMatrix A;
  CMatrix B;

  BoundaryConditions(CMatrix a, CMatrix b);
  Index d() const { return A.rows(); }
};

// Named presets from the boundary-condition JSON schema.  All slots are
// understood as a single coupling in trace order.
BoundaryConditions dirichlet(Index d);
BoundaryConditions neumann(Index d);
BoundaryConditions kirchhoff(Index d);
BoundaryConditions delta(Complex gamma, Index d);
BoundaryConditions delta_prime(Complex gamma, Index d);
BoundaryConditions pt_point(double tau);  // d = 2
BoundaryConditions intermediate();        // d = 2

/// Orthogonal projector in K^2 onto M(A,B) = Ker(A, B):
/// P_M = I - [A*;B*](AA*+BB*)^{-1}[A B].  Requires dim M = d.
CMatrix projection_onto_M(const BoundaryConditions& bc, RankTolerance tol = {});

/// M(A,B) = M(A',B') decided through the projector distance.
bool equivalent(const BoundaryConditions& bc1, const BoundaryConditions& bc2, double tol = 1e-8);

/// d(M, M') = ||P_M - P_M'|| on the Grassmannian Gr(d, 2d).
double grassmann_distance(const BoundaryConditions& bc1, const BoundaryConditions& bc2);

/// A = F diag(L, I_{d-m}) G,  B = F diag(I_m, N_B) G with N_B nilpotent,
/// computed through Wong sequences.  L and N_B are returned in Schur form
/// with eigenvalues ordered by (Re, Im); F, G are not unique.
struct QuasiWeierstrassForm {
  CMatrix F;
  CMatrix G;
  Index m = 0;
  CMatrix L;    // m x m, upper triangular
  CMatrix N_B;  // (d-m) x (d-m), nilpotent upper triangular
  /// Smallest nu with N_B^nu = 0 at tolerance; 0 when the block is empty.
  Index nilpotency_index = 0;

  bool nilpotent_part_vanishes() const { return nilpotency_index <= 1; }
};

QuasiWeierstrassForm quasi_weierstrass(const BoundaryConditions& bc, RankTolerance tol = {});

/// Cayley transform S(k, A, B) = -(A + ikB)^{-1}(A - ikB).
CMatrix cayley(const BoundaryConditions& bc, Complex k, RankTolerance tol = {});

struct CayleyPole {
  Complex k;
  Index order = 0;
};

/// Finite poles come from sigma(iL); the nilpotent part N_B contributes
/// polynomial growth of order gamma_{N_B}(0) - 1 as |k| -> infinity, not a
/// pole at k = 0 (S(k, 1, N_B) is a polynomial in k).
struct CayleyPoleReport {
  std::vector<CayleyPole> finite_poles;
  Index growth_order_at_infinity = 0;
  bool is_uniformly_bounded = false;
};

CayleyPoleReport cayley_poles(const BoundaryConditions& bc, RankTolerance tol = {});

enum class BCClass {
  RankDeficient,
  Irregular,
  RegularNonQuasiSectorial,
  QuasiSectorial,
  SelfAdjoint,
};

const char* to_string(BCClass c);

inline bool is_quasi_sectorial(BCClass c) {
  return c == BCClass::QuasiSectorial || c == BCClass::SelfAdjoint;
}

struct Classification {
  BCClass tag = BCClass::Irregular;
  std::optional<QuasiWeierstrassForm> qw;  // present for regular conditions
};

/// Total on square pairs: RankDeficient if AA*+BB* is singular; Irregular if
/// A*A+B*B is singular or the pencil A + sB is singular; otherwise classified
/// through the quasi-Weierstrass form, with the Kostrykin-Schrader test
/// AB* = BA* upgrading to SelfAdjoint.
Classification classify(const BoundaryConditions& bc, RankTolerance tol = {});

struct CanonicalPL {
  CMatrix P;  // orthogonal projector onto Ker B
  CMatrix L;  // P_perp L P_perp
};

/// Equivalent representation A' = L + P, B' = P_perp when one exists; the
/// criterion is that the first-component projection of M(A,B), which equals
/// A^{-1}(ran B), coincides with (Ker B)^perp.
std::optional<CanonicalPL> canonical_PL(const BoundaryConditions& bc, RankTolerance tol = {});

/// A_S = -(S - I)/2, B_S = (S + I)/(2ik); round-trips through cayley().
BoundaryConditions recover_from_cayley(const CMatrix& s, Complex k);

}  // namespace qgraph::boundary

#pragma once

#include <optional>
#include <vector>

#include <Eigen/Sparse>

#include "qgraph/boundary.hpp"
#include "qgraph/graph.hpp"

namespace qgraph::evolve {

struct GridSpec {
  Index samples_per_edge = 201;
  double external_radius = 20.0;  // Dirichlet cap at the truncation radius
};

/// Finite-difference Laplacian on the stacked edge grids: standard 3-point
/// interior stencil, d boundary rows encoding A psi + B psi' = 0 through
/// one-sided O(h^2) trace stencils (row substitution at the endpoint nodes),
/// and Dirichlet caps on truncated external edges.
class DiscreteLaplacian {
 public:
  DiscreteLaplacian(const boundary::BoundaryConditions& bc, const graph::MetricGraph& g,
                    GridSpec grid);

  const graph::MetricGraph& graph() const { return *g_; }
  const GridSpec& grid() const { return grid_; }
  Index size() const { return total_; }

  graph::EdgeFunction make_function() const;
  CVector pack(const graph::EdgeFunction& f) const;
  graph::EdgeFunction unpack(const CVector& u) const;
  double norm(const CVector& u) const;  // L2 via the edge quadrature weights

  /// Second-difference stencil applied everywhere (one-sided at endpoints);
  /// exact on edgewise quadratics.
  CVector apply_stencil(const CVector& u) const;

  /// Dense operator on the interior nodes with the boundary rows eliminated.
  CMatrix reduced_dense() const;

  // Assembly hooks for the steppers.
  const std::vector<Index>& constraint_nodes() const { return constraint_nodes_; }
  bool is_constraint(Index node) const { return constraint_mask_[static_cast<size_t>(node)]; }
  Eigen::SparseMatrix<Complex> constrained_matrix(Complex interior_diag,
                                                  Complex stencil_scale) const;
  Eigen::SparseMatrix<Complex> interior_only_matrix(Complex interior_diag,
                                                    Complex stencil_scale) const;
  /// Endpoint values from interior values via the boundary rows.
  CVector solve_constraints(const CVector& u_with_arbitrary_endpoints) const;

 private:
  void assemble();

  const graph::MetricGraph* g_;
  boundary::BoundaryConditions bc_;
  GridSpec grid_;
  Index total_ = 0;
  std::vector<Index> offsets_;
  std::vector<double> h_;
  std::vector<bool> constraint_mask_;
  std::vector<Index> constraint_nodes_;  // slot-assigned nodes then cap nodes
  // Boundary rows as sparse triplets over global dofs, aligned with slots.
  std::vector<std::vector<std::pair<Index, Complex>>> bc_rows_;
  std::vector<Index> bc_row_node_;  // node replaced by each bc row
  RVector weights_;                 // quadrature weights for norms
  Eigen::PartialPivLU<CMatrix> endpoint_solver_;
  CMatrix endpoint_rhs_map_;  // maps non-endpoint contributions to endpoint values
  std::vector<Index> endpoint_nodes_;
};

struct EvolutionResult {
  std::vector<double> times;
  std::vector<double> norms;  // L2 for heat/Schroedinger, energy for wave
  bool blew_up = false;
  Index blowup_step = -1;
  std::optional<graph::EdgeFunction> final_state;
  std::vector<std::pair<double, graph::EdgeFunction>> snapshots;
};

/// Crank-Nicolson for the heat equation psi_t = Delta psi.  A positive
/// snapshot_stride records the state every that many steps.
EvolutionResult step_heat(const DiscreteLaplacian& dl, const graph::EdgeFunction& psi0, double dt,
                          Index n_steps, Index snapshot_stride = 0);

/// Crank-Nicolson for i psi_t = -Delta psi.
EvolutionResult step_schrodinger(const DiscreteLaplacian& dl, const graph::EdgeFunction& psi0,
                                 double dt, Index n_steps, Index snapshot_stride = 0);

/// Newmark-beta (beta = 1/4) for psi_tt = Delta psi; norms record the
/// discrete energy sqrt(||v||^2 + ||psi'||^2).
EvolutionResult step_wave(const DiscreteLaplacian& dl, const graph::EdgeFunction& psi0,
                          const graph::EdgeFunction& v0, double dt, Index n_steps,
                          Index snapshot_stride = 0);

}  // namespace qgraph::evolve

#include "qgraph/evolve.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/SparseLU>

namespace qgraph::evolve {

using graph::EdgeFunction;
using graph::MetricGraph;

DiscreteLaplacian::DiscreteLaplacian(const boundary::BoundaryConditions& bc, const MetricGraph& g,
                                     GridSpec grid)
    : g_(&g), bc_(bc), grid_(grid) {
  if (bc.d() != graph::deficiency_index(g)) fail(ErrorKind::ShapeError, "bc size != d");
  if (grid.samples_per_edge < 5) fail(ErrorKind::GridError, "need >= 5 samples per edge");
  assemble();
}

void DiscreteLaplacian::assemble() {
  const MetricGraph& g = *g_;
  const Index n = grid_.samples_per_edge;
  offsets_.clear();
  h_.clear();
  for (Index e = 0; e < g.n_edges(); ++e) {
    offsets_.push_back(total_);
    const double span = g.edge_length_or(e, grid_.external_radius);
    h_.push_back(span / static_cast<double>(n - 1));
    total_ += n;
  }
  constraint_mask_.assign(static_cast<size_t>(total_), false);

  weights_ = RVector::Zero(total_);
  for (Index e = 0; e < g.n_edges(); ++e) {
    weights_.segment(offsets_[static_cast<size_t>(e)], n) =
        graph::simpson_weights(n, h_[static_cast<size_t>(e)]);
  }

  // Trace stencils per slot.
  const graph::TraceIndex ti(g);
  const Index d = ti.d();
  std::vector<Index> slot_node(static_cast<size_t>(d));
  std::vector<std::vector<std::pair<Index, Complex>>> val_stencil(static_cast<size_t>(d)),
      der_stencil(static_cast<size_t>(d));
  for (Index s = 0; s < d; ++s) {
    const auto slot = ti.slots()[static_cast<size_t>(s)];
    const Index off = offsets_[static_cast<size_t>(slot.edge)];
    const double h = h_[static_cast<size_t>(slot.edge)];
    if (slot.endpoint == graph::Endpoint::Initial) {
      slot_node[static_cast<size_t>(s)] = off;
      val_stencil[static_cast<size_t>(s)] = {{off, 1.0}};
      der_stencil[static_cast<size_t>(s)] = {
          {off, -3.0 / (2.0 * h)}, {off + 1, 4.0 / (2.0 * h)}, {off + 2, -1.0 / (2.0 * h)}};
    } else {
      slot_node[static_cast<size_t>(s)] = off + n - 1;
      val_stencil[static_cast<size_t>(s)] = {{off + n - 1, 1.0}};
      // Terminal slots carry -psi'(a).
      der_stencil[static_cast<size_t>(s)] = {{off + n - 1, -3.0 / (2.0 * h)},
                                             {off + n - 2, 4.0 / (2.0 * h)},
                                             {off + n - 3, -1.0 / (2.0 * h)}};
    }
  }

  // Boundary rows r: sum_s A(r,s) val(s) + B(r,s) der(s).
  bc_rows_.assign(static_cast<size_t>(d), {});
  for (Index r = 0; r < d; ++r) {
    auto& row = bc_rows_[static_cast<size_t>(r)];
    for (Index s = 0; s < d; ++s) {
      const Complex av = bc_.A(r, s);
      const Complex bv = bc_.B(r, s);
      if (av != Complex(0.0, 0.0)) {
        for (auto [node, c] : val_stencil[static_cast<size_t>(s)]) row.push_back({node, av * c});
      }
      if (bv != Complex(0.0, 0.0)) {
        for (auto [node, c] : der_stencil[static_cast<size_t>(s)]) row.push_back({node, bv * c});
      }
    }
  }

  // Greedy assignment of boundary rows to endpoint nodes (pivot-like weights).
  bc_row_node_.assign(static_cast<size_t>(d), -1);
  std::vector<bool> row_used(static_cast<size_t>(d), false), slot_used(static_cast<size_t>(d), false);
  for (Index pick = 0; pick < d; ++pick) {
    double best = -1.0;
    Index br = -1, bs = -1;
    for (Index r = 0; r < d; ++r) {
      if (row_used[static_cast<size_t>(r)]) continue;
      for (Index s = 0; s < d; ++s) {
        if (slot_used[static_cast<size_t>(s)]) continue;
        const double w = std::abs(bc_.A(r, s)) + std::abs(bc_.B(r, s));
        if (w > best) {
          best = w;
          br = r;
          bs = s;
        }
      }
    }
    row_used[static_cast<size_t>(br)] = true;
    slot_used[static_cast<size_t>(bs)] = true;
    bc_row_node_[static_cast<size_t>(br)] = slot_node[static_cast<size_t>(bs)];
  }

  constraint_nodes_.clear();
  for (Index r = 0; r < d; ++r) {
    constraint_nodes_.push_back(bc_row_node_[static_cast<size_t>(r)]);
    constraint_mask_[static_cast<size_t>(bc_row_node_[static_cast<size_t>(r)])] = true;
  }
  for (Index e = 0; e < g.n_external(); ++e) {
    const Index cap = offsets_[static_cast<size_t>(e)] + n - 1;
    constraint_nodes_.push_back(cap);
    constraint_mask_[static_cast<size_t>(cap)] = true;
  }

  // Endpoint elimination: constraint rows split into endpoint columns and the
  // rest; M_end * u_end = -R * u_rest.
  const Index nc = static_cast<Index>(constraint_nodes_.size());
  endpoint_nodes_ = constraint_nodes_;
  std::vector<Index> node_to_endpoint(static_cast<size_t>(total_), -1);
  for (Index j = 0; j < nc; ++j) {
    node_to_endpoint[static_cast<size_t>(endpoint_nodes_[static_cast<size_t>(j)])] = j;
  }
  CMatrix m_end = CMatrix::Zero(nc, nc);
  CMatrix rest = CMatrix::Zero(nc, total_);
  for (Index r = 0; r < d; ++r) {
    for (auto [node, c] : bc_rows_[static_cast<size_t>(r)]) {
      const Index je = node_to_endpoint[static_cast<size_t>(node)];
      if (je >= 0) {
        m_end(r, je) += c;
      } else {
        rest(r, node) += c;
      }
    }
  }
  for (Index e = 0; e < g.n_external(); ++e) {
    const Index cap = offsets_[static_cast<size_t>(e)] + n - 1;
    m_end(d + e, node_to_endpoint[static_cast<size_t>(cap)]) = 1.0;
  }
  endpoint_solver_.compute(m_end);
  const double det_mag = std::abs(endpoint_solver_.determinant());
  if (!(det_mag > 1e-300)) {
    fail(ErrorKind::SingularStep, "boundary rows do not determine the endpoint values");
  }
  endpoint_rhs_map_ = -endpoint_solver_.solve(rest);
}

EdgeFunction DiscreteLaplacian::make_function() const {
  return EdgeFunction(*g_, grid_.samples_per_edge, grid_.external_radius);
}

CVector DiscreteLaplacian::pack(const EdgeFunction& f) const {
  CVector u = CVector::Zero(total_);
  for (Index e = 0; e < g_->n_edges(); ++e) {
    u.segment(offsets_[static_cast<size_t>(e)], grid_.samples_per_edge) = f.values(e);
  }
  return u;
}

EdgeFunction DiscreteLaplacian::unpack(const CVector& u) const {
  EdgeFunction f = make_function();
  for (Index e = 0; e < g_->n_edges(); ++e) {
    f.values(e) = u.segment(offsets_[static_cast<size_t>(e)], grid_.samples_per_edge);
  }
  return f;
}

double DiscreteLaplacian::norm(const CVector& u) const {
  return std::sqrt(std::max(0.0, (u.cwiseAbs2().array() * weights_.array()).sum()));
}

CVector DiscreteLaplacian::apply_stencil(const CVector& u) const {
  CVector out = CVector::Zero(total_);
  const Index n = grid_.samples_per_edge;
  for (Index e = 0; e < g_->n_edges(); ++e) {
    const Index off = offsets_[static_cast<size_t>(e)];
    const double h2 = h_[static_cast<size_t>(e)] * h_[static_cast<size_t>(e)];
    for (Index i = 1; i + 1 < n; ++i) {
      out(off + i) = (u(off + i - 1) - 2.0 * u(off + i) + u(off + i + 1)) / h2;
    }
    out(off) = (u(off) - 2.0 * u(off + 1) + u(off + 2)) / h2;
    out(off + n - 1) = (u(off + n - 1) - 2.0 * u(off + n - 2) + u(off + n - 3)) / h2;
  }
  return out;
}

Eigen::SparseMatrix<Complex> DiscreteLaplacian::constrained_matrix(Complex interior_diag,
                                                                   Complex stencil_scale) const {
  std::vector<Eigen::Triplet<Complex>> trip;
  const Index n = grid_.samples_per_edge;
  for (Index e = 0; e < g_->n_edges(); ++e) {
    const Index off = offsets_[static_cast<size_t>(e)];
    const double h2 = h_[static_cast<size_t>(e)] * h_[static_cast<size_t>(e)];
    // Every endpoint node is claimed by a boundary or cap row.
    for (Index i = 1; i + 1 < n; ++i) {
      const Index node = off + i;
      trip.emplace_back(node, node, interior_diag + stencil_scale * Complex(-2.0, 0.0) / h2);
      trip.emplace_back(node, node - 1, stencil_scale / h2);
      trip.emplace_back(node, node + 1, stencil_scale / h2);
    }
  }
  const Index d = bc_.d();
  for (Index r = 0; r < d; ++r) {
    const Index node = bc_row_node_[static_cast<size_t>(r)];
    for (auto [col, c] : bc_rows_[static_cast<size_t>(r)]) trip.emplace_back(node, col, c);
  }
  for (Index e = 0; e < g_->n_external(); ++e) {
    const Index cap = offsets_[static_cast<size_t>(e)] + n - 1;
    trip.emplace_back(cap, cap, Complex(1.0, 0.0));
  }
  Eigen::SparseMatrix<Complex> m(total_, total_);
  m.setFromTriplets(trip.begin(), trip.end());
  return m;
}

Eigen::SparseMatrix<Complex> DiscreteLaplacian::interior_only_matrix(Complex interior_diag,
                                                                     Complex stencil_scale) const {
  std::vector<Eigen::Triplet<Complex>> trip;
  const Index n = grid_.samples_per_edge;
  for (Index e = 0; e < g_->n_edges(); ++e) {
    const Index off = offsets_[static_cast<size_t>(e)];
    const double h2 = h_[static_cast<size_t>(e)] * h_[static_cast<size_t>(e)];
    // Constraint rows stay identically zero here (their rhs contribution is 0).
    for (Index i = 1; i + 1 < n; ++i) {
      const Index node = off + i;
      trip.emplace_back(node, node, interior_diag + stencil_scale * Complex(-2.0, 0.0) / h2);
      trip.emplace_back(node, node - 1, stencil_scale / h2);
      trip.emplace_back(node, node + 1, stencil_scale / h2);
    }
  }
  Eigen::SparseMatrix<Complex> m(total_, total_);
  m.setFromTriplets(trip.begin(), trip.end());
  return m;
}

CVector DiscreteLaplacian::solve_constraints(const CVector& u) const {
  const Index nc = static_cast<Index>(endpoint_nodes_.size());
  CVector masked = u;
  for (Index j = 0; j < nc; ++j) masked(endpoint_nodes_[static_cast<size_t>(j)]) = 0.0;
  const CVector endpoint = endpoint_rhs_map_ * masked;
  CVector out = u;
  for (Index j = 0; j < nc; ++j) out(endpoint_nodes_[static_cast<size_t>(j)]) = endpoint(j);
  return out;
}

CMatrix DiscreteLaplacian::reduced_dense() const {
  // Dense interior operator with the endpoint values eliminated through the
  // boundary rows; used for discrete-eigenvalue checks.
  std::vector<Index> interior;
  for (Index node = 0; node < total_; ++node) {
    if (!constraint_mask_[static_cast<size_t>(node)]) interior.push_back(node);
  }
  const Index ni = static_cast<Index>(interior.size());
  std::vector<Index> node_to_interior(static_cast<size_t>(total_), -1);
  for (Index j = 0; j < ni; ++j) node_to_interior[static_cast<size_t>(interior[static_cast<size_t>(j)])] = j;
  const Index nc = static_cast<Index>(endpoint_nodes_.size());
  std::vector<Index> node_to_endpoint(static_cast<size_t>(total_), -1);
  for (Index j = 0; j < nc; ++j) node_to_endpoint[static_cast<size_t>(endpoint_nodes_[static_cast<size_t>(j)])] = j;

  // endpoint_rhs_map_ columns over all nodes; restrict to interior columns.
  CMatrix end_from_int = CMatrix::Zero(nc, ni);
  for (Index j = 0; j < ni; ++j) {
    end_from_int.col(j) = endpoint_rhs_map_.col(interior[static_cast<size_t>(j)]);
  }

  const auto sp = interior_only_matrix(Complex(0.0, 0.0), Complex(1.0, 0.0));
  CMatrix full = CMatrix(sp);
  CMatrix reduced = CMatrix::Zero(ni, ni);
  for (Index r = 0; r < ni; ++r) {
    const Index node = interior[static_cast<size_t>(r)];
    for (Index cnode = 0; cnode < total_; ++cnode) {
      const Complex c = full(node, cnode);
      if (c == Complex(0.0, 0.0)) continue;
      const Index ji = node_to_interior[static_cast<size_t>(cnode)];
      if (ji >= 0) {
        reduced(r, ji) += c;
      } else {
        const Index je = node_to_endpoint[static_cast<size_t>(cnode)];
        reduced.row(r) += c * end_from_int.row(je);
      }
    }
  }
  return reduced;
}

namespace {

struct CnSystem {
  Eigen::SparseLU<Eigen::SparseMatrix<Complex>> solver;
  Eigen::SparseMatrix<Complex> rhs;
};

void factor_or_fail(CnSystem& sys, const Eigen::SparseMatrix<Complex>& lhs) {
  sys.solver.compute(lhs);
  if (sys.solver.info() != Eigen::Success) {
    fail(ErrorKind::SingularStep, "implicit step matrix is singular");
  }
}

EvolutionResult run_cn(const DiscreteLaplacian& dl, const graph::EdgeFunction& psi0, double dt,
                       Index n_steps, Complex theta, Index snapshot_stride) {
  // (I - theta dt/2 Delta) u+ = (I + theta dt/2 Delta) u with boundary rows
  // enforced on u+.
  if (!(dt > 0.0)) fail(ErrorKind::InvalidArgument, "dt must be positive");
  CnSystem sys;
  factor_or_fail(sys, dl.constrained_matrix(1.0, -theta * 0.5 * dt));
  sys.rhs = dl.interior_only_matrix(1.0, theta * 0.5 * dt);

  CVector u = dl.pack(psi0);
  EvolutionResult out;
  out.times.reserve(static_cast<size_t>(n_steps + 1));
  out.norms.reserve(static_cast<size_t>(n_steps + 1));
  out.times.push_back(0.0);
  out.norms.push_back(dl.norm(u));
  if (snapshot_stride > 0) out.snapshots.emplace_back(0.0, dl.unpack(u));
  const double guard = std::max(1.0, out.norms.front()) * 1e12;
  for (Index step = 1; step <= n_steps; ++step) {
    const CVector rhs = sys.rhs * u;
    u = sys.solver.solve(rhs);
    if (sys.solver.info() != Eigen::Success) fail(ErrorKind::SingularStep, "solve failed");
    const double nrm = dl.norm(u);
    out.times.push_back(dt * static_cast<double>(step));
    out.norms.push_back(nrm);
    if (snapshot_stride > 0 && step % snapshot_stride == 0) {
      out.snapshots.emplace_back(dt * static_cast<double>(step), dl.unpack(u));
    }
    if (!std::isfinite(nrm) || nrm > guard) {
      out.blew_up = true;
      out.blowup_step = step;
      break;
    }
  }
  out.final_state = dl.unpack(u);
  return out;
}

}  // namespace

EvolutionResult step_heat(const DiscreteLaplacian& dl, const graph::EdgeFunction& psi0, double dt,
                          Index n_steps, Index snapshot_stride) {
  return run_cn(dl, psi0, dt, n_steps, Complex(1.0, 0.0), snapshot_stride);
}

EvolutionResult step_schrodinger(const DiscreteLaplacian& dl, const graph::EdgeFunction& psi0,
                                 double dt, Index n_steps, Index snapshot_stride) {
  // i psi_t = -Delta psi, i.e. psi_t = i Delta psi.
  return run_cn(dl, psi0, dt, n_steps, Complex(0.0, 1.0), snapshot_stride);
}

EvolutionResult step_wave(const DiscreteLaplacian& dl, const graph::EdgeFunction& psi0,
                          const graph::EdgeFunction& v0, double dt, Index n_steps,
                          Index snapshot_stride) {
  if (!(dt > 0.0)) fail(ErrorKind::InvalidArgument, "dt must be positive");
  CnSystem sys;
  factor_or_fail(sys, dl.constrained_matrix(1.0, Complex(-0.25 * dt * dt, 0.0)));
  const auto lap = dl.interior_only_matrix(0.0, 1.0);  // zero rows at constraints

  CVector u = dl.pack(psi0);
  CVector v = dl.pack(v0);

  auto energy = [&](const CVector& uu, const CVector& vv) {
    // ||v||^2 + sum over edges of the forward-difference Dirichlet energy.
    double e = dl.norm(vv);
    e = e * e;
    const Index n = dl.grid().samples_per_edge;
    Index off = 0;
    for (Index edge = 0; edge < dl.graph().n_edges(); ++edge) {
      const double h = dl.graph().edge_length_or(edge, dl.grid().external_radius) /
                       static_cast<double>(n - 1);
      for (Index i = 0; i + 1 < n; ++i) {
        e += std::norm((uu(off + i + 1) - uu(off + i)) / h) * h;
      }
      off += n;
    }
    return std::sqrt(e);
  };

  EvolutionResult out;
  out.times.push_back(0.0);
  out.norms.push_back(energy(u, v));
  if (snapshot_stride > 0) out.snapshots.emplace_back(0.0, dl.unpack(u));
  const double guard = std::max(1.0, out.norms.front()) * 1e12;
  for (Index step = 1; step <= n_steps; ++step) {
    const CVector lap_u = lap * u;
    CVector rhs = u + dt * v + (0.25 * dt * dt) * lap_u;
    for (Index node : dl.constraint_nodes()) rhs(node) = 0.0;
    const CVector u_next = sys.solver.solve(rhs);
    if (sys.solver.info() != Eigen::Success) fail(ErrorKind::SingularStep, "solve failed");
    CVector v_next = v + (0.5 * dt) * (lap_u + lap * u_next);
    // The boundary rows hold for psi at every time, hence also for psi_t.
    v_next = dl.solve_constraints(v_next);
    u = u_next;
    v = v_next;
    const double nrm = energy(u, v);
    out.times.push_back(dt * static_cast<double>(step));
    out.norms.push_back(nrm);
    if (snapshot_stride > 0 && step % snapshot_stride == 0) {
      out.snapshots.emplace_back(dt * static_cast<double>(step), dl.unpack(u));
    }
    if (!std::isfinite(nrm) || nrm > guard) {
      out.blew_up = true;
      out.blowup_step = step;
      break;
    }
  }
  out.final_state = dl.unpack(u);
  return out;
}

}  // namespace qgraph::evolve

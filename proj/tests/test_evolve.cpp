#include <doctest.h>

#include <cmath>

#include <Eigen/SparseLU>

#include "qgraph/evolve.hpp"
#include "test_support.hpp"

using namespace qgraph;
using namespace qgraph::evolve;
using graph::EdgeFunction;
using graph::MetricGraph;

namespace {

Complex graph_integral(const EdgeFunction& f) {
  Complex m = 0.0;
  for (Index e = 0; e < f.n_edges(); ++e) {
    const auto w = graph::simpson_weights(f.samples(e), f.spacing(e));
    for (Index i = 0; i < f.samples(e); ++i) m += w(i) * f.values(e)(i);
  }
  return m;
}

double propagator_opnorm(const CMatrix& m) {
  CVector v = CVector::Ones(m.cols());
  v.normalize();
  double s = 0.0;
  for (int it = 0; it < 50; ++it) {
    CVector w = m * v;
    s = w.norm();
    v = m.adjoint() * w;
    v.normalize();
  }
  return s;
}

/// Fitted heat prefactor sup_m ||P^m|| of the Crank-Nicolson propagator
/// (mu = 0 fit; dyadic step counts up to 2^14).
double fitted_heat_prefactor(const boundary::BoundaryConditions& bc, Index n, double dt) {
  const auto g = MetricGraph::interval(1.0);
  DiscreteLaplacian dl(bc, g, {n, 20.0});
  const auto lhs = dl.constrained_matrix(1.0, Complex(-0.5 * dt, 0.0));
  const auto rhs = dl.interior_only_matrix(1.0, Complex(0.5 * dt, 0.0));
  Eigen::SparseLU<Eigen::SparseMatrix<Complex>> lu;
  lu.compute(lhs);
  REQUIRE(lu.info() == Eigen::Success);
  CMatrix p(dl.size(), dl.size());
  const CMatrix rhsd = CMatrix(rhs);
  for (Index j = 0; j < dl.size(); ++j) p.col(j) = lu.solve(CVector(rhsd.col(j)));
  CMatrix pm = p;
  double best = propagator_opnorm(p);
  for (int sq = 1; sq <= 14; ++sq) {
    pm = pm * pm;
    best = std::max(best, propagator_opnorm(pm));
  }
  return best;
}

}  // namespace

TEST_CASE("heat decay on the Dirichlet interval") {
  const auto g = MetricGraph::interval(1.0);
  DiscreteLaplacian dl(boundary::dirichlet(2), g, {1001, 20.0});
  const auto psi0 = EdgeFunction::sample(
      g, 1001, 20.0, [](Index, double x) { return Complex(std::sin(M_PI * x), 0.0); });
  const auto res = step_heat(dl, psi0, 1e-4, 1000);
  const double want = std::exp(-M_PI * M_PI * 0.1);
  CHECK(std::abs(res.norms.back() / res.norms.front() - want) / want < 0.02);
  CHECK(!res.blew_up);
}

TEST_CASE("zero data stays zero") {
  const auto g = MetricGraph::interval(1.0);
  DiscreteLaplacian dl(boundary::dirichlet(2), g, {101, 20.0});
  const EdgeFunction zero(g, 101, 20.0);
  CHECK(step_heat(dl, zero, 1e-3, 50).norms.back() == 0.0);
  const auto wave = step_wave(dl, zero, zero, 1e-3, 50);
  CHECK(wave.norms.back() == 0.0);
}

TEST_CASE("Kirchhoff star conserves mass") {
  const auto g = MetricGraph::star(3);
  const Index n = 801;
  DiscreteLaplacian dl(boundary::kirchhoff(3), g, {n, 2.0});
  const auto psi0 = EdgeFunction::sample(g, n, 2.0, [](Index, double x) {
    return Complex(std::exp(-(x / 0.3) * (x / 0.3)), 0.0);
  });
  const auto res = step_heat(dl, psi0, 1e-4, 100);
  REQUIRE(res.final_state.has_value());
  const Complex m0 = graph_integral(psi0);
  const Complex mt = graph_integral(*res.final_state);
  CHECK(std::abs(mt - m0) / std::abs(m0) <= 1e-6);
}

TEST_CASE("Schroedinger norm conservation for Dirichlet fixtures") {
  // Value-pinning rows keep the interior operator Hermitian, so the
  // Crank-Nicolson step is exactly unitary on the constraint manifold.
  const auto g = MetricGraph::interval(1.0);
  DiscreteLaplacian dl(boundary::dirichlet(2), g, {401, 20.0});
  const auto psi0 = EdgeFunction::sample(g, 401, 20.0, [](Index, double x) {
    return Complex(std::sin(M_PI * x), 0.5 * std::sin(2.0 * M_PI * x));
  });
  const auto res = step_schrodinger(dl, psi0, 1e-3, 400);
  for (double nrm : res.norms) {
    CHECK(std::abs(nrm / res.norms.front() - 1.0) <= 1e-8);
  }

  const auto star = MetricGraph::star(3);
  DiscreteLaplacian dls(boundary::dirichlet(3), star, {401, 8.0});
  const auto phi0 = EdgeFunction::sample(star, 401, 8.0, [](Index e, double x) {
    return Complex(std::exp(-(x - 3.0) * (x - 3.0)) * std::cos(1.5 * x + 0.3 * e), 0.0);
  });
  const auto res2 = step_schrodinger(dls, phi0, 1e-3, 400);
  for (double nrm : res2.norms) {
    CHECK(std::abs(nrm / res2.norms.front() - 1.0) <= 1e-8);
  }
}

TEST_CASE("Schroedinger group stays bounded for the PT point interaction") {
  const auto g = MetricGraph::star(2);
  const Index n = 1201;
  const double radius = 30.0;
  DiscreteLaplacian dl(boundary::pt_point(M_PI / 4.0), g, {n, radius});
  const auto psi0 = EdgeFunction::sample(g, n, radius, [](Index e, double x) {
    const double env = std::exp(-(x - 8.0) * (x - 8.0) / 4.0);
    return (e == 0 ? 1.0 : 0.7) * env * std::exp(-iunit * 1.2 * x);
  });
  const auto res = step_schrodinger(dl, psi0, 2e-3, 3000);
  double worst = 0.0;
  for (double nrm : res.norms) worst = std::max(worst, nrm / res.norms.front());
  // Similarity to the free Laplacian bounds the group; the transform is the
  // PT reflection pair whose condition number is modest at tau = pi/4.
  CHECK(worst <= 6.0);
  CHECK(!res.blew_up);
}

TEST_CASE("spectral singularity drives Schroedinger growth for delta(2i)") {
  // gamma = 2i on a two-edge star: sigma(L) = {-i} sits on the open imaginary
  // axis (not similar to self-adjoint); the Cayley transform has a real pole
  // at k = 1.  A wavepacket tuned at the singularity is amplified on
  // reflection by ~|S(k)| ~ 1/|k - 1|, growing the norm past 10x.
  const auto g = MetricGraph::star(2);
  const Index n = 2401;
  const double radius = 120.0;
  DiscreteLaplacian dl(boundary::delta(Complex(0.0, 2.0), 2), g, {n, radius});
  const double x0 = 45.0, sigma = 10.0;
  const auto psi0 = EdgeFunction::sample(g, n, radius, [&](Index, double x) {
    const double env = std::exp(-(x - x0) * (x - x0) / (2.0 * sigma * sigma));
    return env * std::exp(-iunit * x);  // incoming at the singular momentum
  });
  const auto res = step_schrodinger(dl, psi0, 0.01, 5000);
  double worst = 0.0;
  for (double nrm : res.norms) worst = std::max(worst, nrm / res.norms.front());
  CHECK(worst >= 10.0);
}

TEST_CASE("wave equation reproduces the Dirichlet eigenmode") {
  const auto g = MetricGraph::interval(1.0);
  const Index n = 1001;
  DiscreteLaplacian dl(boundary::dirichlet(2), g, {n, 20.0});
  const auto psi0 = EdgeFunction::sample(
      g, n, 20.0, [](Index, double x) { return Complex(std::sin(M_PI * x), 0.0); });
  const EdgeFunction v0(g, n, 20.0);
  const auto res = step_wave(dl, psi0, v0, 1e-4, 10000);
  REQUIRE(res.final_state.has_value());
  // psi(x, 1) = cos(pi) sin(pi x) = -sin(pi x).
  double worst = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double x = res.final_state->grid_point(0, i);
    worst = std::max(worst,
                     std::abs(res.final_state->values(0)(i) - Complex(-std::sin(M_PI * x), 0.0)));
  }
  CHECK(worst < 0.02);
}

TEST_CASE("wave energy stays bounded for quasi-sectorial PT conditions") {
  const auto g = MetricGraph::star(2);
  const Index n = 801;
  const double radius = 20.0;
  DiscreteLaplacian dl(boundary::pt_point(M_PI / 4.0), g, {n, radius});
  const auto psi0 = EdgeFunction::sample(g, n, radius, [](Index e, double x) {
    return Complex((e == 0 ? 1.0 : 0.5) * std::exp(-(x - 5.0) * (x - 5.0)), 0.0);
  });
  const EdgeFunction v0(g, n, radius);
  const auto res = step_wave(dl, psi0, v0, 1e-3, 3000);
  double worst = 0.0;
  for (double nrm : res.norms) worst = std::max(worst, nrm / res.norms.front());
  CHECK(worst <= 6.0);
  CHECK(!res.blew_up);
}

TEST_CASE("discrete Dirichlet eigenvalues converge at O(h^2)") {
  const auto g = MetricGraph::interval(1.0);
  auto low_eigs = [&](Index n) {
    DiscreteLaplacian dl(boundary::dirichlet(2), g, {n, 20.0});
    const CMatrix red = -dl.reduced_dense();  // -Delta_h
    Eigen::ComplexEigenSolver<CMatrix> es(red, false);
    std::vector<double> evs;
    for (Index j = 0; j < es.eigenvalues().size(); ++j) {
      evs.push_back(es.eigenvalues()(j).real());
    }
    std::sort(evs.begin(), evs.end());
    return evs;
  };
  const auto coarse = low_eigs(51);
  const auto fine = low_eigs(101);
  for (int m = 1; m <= 5; ++m) {
    const double want = m * M_PI * m * M_PI;
    const double ec = std::abs(coarse[static_cast<size_t>(m - 1)] - want);
    const double ef = std::abs(fine[static_cast<size_t>(m - 1)] - want);
    CHECK(ec / ef > 3.4);
    CHECK(ec / ef < 4.7);
  }
}

TEST_CASE("refinement growth separates the intermediate conditions") {
  // dt = h/4 run refinement: for quasi-sectorial conditions the fitted heat
  // prefactor stays put; for the intermediate conditions it at least doubles
  // per refinement (no uniform-in-h bound exists).
  std::vector<double> cs;
  for (Index n : {65, 129, 257, 513}) {
    const double h = 1.0 / static_cast<double>(n - 1);
    cs.push_back(fitted_heat_prefactor(boundary::intermediate(), n, 0.25 * h));
  }
  CHECK(cs[1] / cs[0] >= 2.0);
  CHECK(cs[2] / cs[1] >= 2.0);
  CHECK(cs[3] / cs[2] >= 2.0);

  std::vector<double> cd;
  for (Index n : {65, 129, 257}) {
    const double h = 1.0 / static_cast<double>(n - 1);
    cd.push_back(fitted_heat_prefactor(boundary::dirichlet(2), n, 0.25 * h));
  }
  // The full-space propagator norm slightly exceeds 1 through the endpoint
  // rows; what matters is that it does not grow under refinement.
  CHECK(cd[0] <= 2.0);
  CHECK(cd[2] / cd[0] < 1.5);
}

TEST_CASE("pumpkin-graph cyclic vector under the discrete stencil") {
  const Index n = 3;
  MetricGraph pumpkin({"v0", "v1"},
                      {{"i0", "v0", "v1", 1.0}, {"i1", "v0", "v1", 1.0}, {"i2", "v0", "v1", 1.0}},
                      {});
  CMatrix nil = CMatrix::Zero(n, n);
  nil(0, 1) = 1.0;
  nil(1, 2) = 1.0;
  CMatrix a = CMatrix::Zero(2 * n, 2 * n);
  a.topLeftCorner(n, n) = -nil;
  a.bottomRightCorner(n, n) = nil;
  const boundary::BoundaryConditions bc(a, CMatrix::Identity(2 * n, 2 * n));

  const Index samples = 101;
  DiscreteLaplacian dl(bc, pumpkin, {samples, 10.0});
  // phi = e^{Nx} e3 edgewise: (x^2/2, x, 1); Delta phi = N^2 phi = (1, 0, 0).
  const auto phi = EdgeFunction::sample(pumpkin, samples, 10.0, [&](Index e, double x) {
    if (e == 0) return Complex(0.5 * x * x, 0.0);
    if (e == 1) return Complex(x, 0.0);
    return Complex(1.0, 0.0);
  });
  const CVector u = dl.pack(phi);
  const CVector lap = dl.apply_stencil(u);
  CVector want = CVector::Zero(dl.size());
  want.segment(0, samples).setOnes();  // N^2 phi on edge 0, zero elsewhere
  CHECK(dl.norm(CVector(lap - want)) < 1e-8);
  const CVector lap2 = dl.apply_stencil(lap);
  CHECK(dl.norm(lap2) < 1e-6);  // eps/h^4 roundoff floor
}

TEST_CASE("external truncation is validated by doubling R") {
  // Norm series must be insensitive to the cap once the data decays inside.
  const auto g = MetricGraph::star(2);
  auto run = [&](double radius, Index n) {  // same h, doubled cap
    DiscreteLaplacian dl(boundary::kirchhoff(2), g, {n, radius});
    const auto psi0 = EdgeFunction::sample(g, n, radius, [](Index, double x) {
      return Complex(std::exp(-(x - 1.0) * (x - 1.0) * 4.0), 0.0);
    });
    return step_heat(dl, psi0, 1e-4, 200);
  };
  const auto a = run(20.0, 601);
  const auto b = run(40.0, 1201);
  double worst = 0.0;
  for (size_t i = 0; i < a.norms.size(); ++i) {
    worst = std::max(worst, std::abs(a.norms[i] - b.norms[i]) / a.norms[0]);
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("snapshots record the state at the stride") {
  const auto g = MetricGraph::interval(1.0);
  DiscreteLaplacian dl(boundary::dirichlet(2), g, {101, 20.0});
  const auto psi0 = EdgeFunction::sample(
      g, 101, 20.0, [](Index, double x) { return Complex(std::sin(M_PI * x), 0.0); });
  const auto res = step_heat(dl, psi0, 1e-4, 100, 50);
  REQUIRE(res.snapshots.size() == 3);  // t = 0, 50 dt, 100 dt
  CHECK(res.snapshots[1].first == doctest::Approx(50e-4));
  CHECK(res.snapshots.back().second.norm() == doctest::Approx(res.norms.back()).epsilon(1e-12));
}

TEST_CASE("degenerate boundary rows are rejected as a singular step") {
  const auto g = MetricGraph::interval(1.0);
  const boundary::BoundaryConditions zero(CMatrix::Zero(2, 2), CMatrix::Zero(2, 2));
  CHECK_THROWS_AS(DiscreteLaplacian(zero, g, {51, 20.0}), Error);
}

TEST_CASE("boundary rows reproduce the trace stencils exactly") {
  const auto g = MetricGraph::star(2);
  const auto bc = boundary::pt_point(0.7);
  const Index n = 51;
  DiscreteLaplacian dl(bc, g, {n, 20.0});
  const auto f = EdgeFunction::sample(g, n, 20.0, [](Index e, double x) {
    return Complex(std::cos(0.8 * x + 0.1 * e), 0.3 * x);
  });
  const auto tp = graph::trace(g, f);
  const CVector want = bc.A * tp.values + bc.B * tp.derivatives;
  // Apply the assembled constraint rows to the packed vector: the residual of
  // the implicit-step matrix at the constraint nodes is exactly the bc row.
  const auto m = dl.constrained_matrix(0.0, Complex(0.0, 0.0));
  const CVector residual = m * dl.pack(f);
  CVector at_constraints(bc.d());
  Index idx = 0;
  for (Index node : dl.constraint_nodes()) {
    if (idx < bc.d()) at_constraints(idx++) = residual(node);
  }
  // The rows land on endpoint nodes in assignment order; compare as multisets.
  std::vector<double> a, b;
  for (Index r = 0; r < bc.d(); ++r) {
    a.push_back(std::abs(want(r)));
    b.push_back(std::abs(at_constraints(r)));
  }
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  for (size_t j = 0; j < a.size(); ++j) CHECK(a[j] == doctest::Approx(b[j]).epsilon(1e-12));
}

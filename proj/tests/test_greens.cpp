#include <doctest.h>

#include <cmath>

#include "qgraph/spectral.hpp"
#include "test_support.hpp"

using namespace qgraph;
using namespace qgraph::spectral;
using boundary::BoundaryConditions;
using graph::EdgeFunction;
using graph::MetricGraph;
using testsupport::rng;

namespace {

/// Interior second difference of an EdgeFunction (3-point stencil).
double ode_residual(const EdgeFunction& u, const EdgeFunction& f, Complex k, Index skip = 3) {
  double num = 0.0, den = 0.0;
  for (Index e = 0; e < u.n_edges(); ++e) {
    const double h = u.spacing(e);
    const auto& uv = u.values(e);
    const auto& fv = f.values(e);
    for (Index i = skip; i + skip < u.samples(e); ++i) {
      const Complex upp = (uv(i - 1) - 2.0 * uv(i) + uv(i + 1)) / (h * h);
      num += std::norm(-upp - k * k * uv(i) - fv(i)) * h;
      den += std::norm(fv(i)) * h;
    }
  }
  return std::sqrt(num / den);
}

}  // namespace

TEST_CASE("Dirichlet half line: method of images") {
  const auto g = MetricGraph::star(1);
  const Complex k(0.0, 1.0);
  const Index n = 2001;
  const double radius = 10.0;
  const auto f = EdgeFunction::sample(
      g, n, radius, [](Index, double x) { return Complex(x <= 1.0 ? 1.0 : 0.0, 0.0); });
  GreensKernel kern(boundary::dirichlet(1), g, k);
  const auto u = greens_apply(kern, f);

  // u(x) = (1/2) int_0^1 (e^{-|x-y|} - e^{-(x+y)}) dy in closed form.
  auto exact = [](double x) {
    if (x <= 1.0) {
      return 0.5 * ((2.0 - std::exp(-x) - std::exp(-(1.0 - x))) -
                    std::exp(-x) * (1.0 - std::exp(-1.0)));
    }
    return 0.5 * (std::exp(-x) * (std::exp(1.0) - 1.0) - std::exp(-x) * (1.0 - std::exp(-1.0)));
  };
  // The indicator jump costs one quadrature cell of accuracy; the error decays
  // away from it and shrinks to first order under refinement.
  auto worst_error = [&](const EdgeFunction& uu) {
    double w = 0.0;
    for (Index i = 0; i < uu.samples(0); ++i) {
      w = std::max(w, std::abs(uu.values(0)(i) - exact(uu.grid_point(0, i))));
    }
    return w;
  };
  const double e1 = worst_error(u);
  CHECK(e1 < 2e-3);
  const auto f2 = EdgeFunction::sample(
      g, 4 * (n - 1) + 1, radius, [](Index, double x) { return Complex(x <= 1.0 ? 1.0 : 0.0, 0.0); });
  const double e2 = worst_error(greens_apply(kern, f2));
  CHECK(e2 < 0.4 * e1);
}

TEST_CASE("Dirichlet interval: eigenfunction identity") {
  const auto g = MetricGraph::interval(1.0);
  const Complex k(0.0, 1.0);
  const auto f = EdgeFunction::sample(
      g, 2001, 10.0, [](Index, double x) { return Complex(std::sin(M_PI * x), 0.0); });
  GreensKernel kern(boundary::dirichlet(2), g, k);
  const auto u = greens_apply(kern, f);
  const double scale = 1.0 / (M_PI * M_PI + 1.0);
  for (Index i = 0; i < u.samples(0); i += 97) {
    const double x = u.grid_point(0, i);
    CHECK(std::abs(u.values(0)(i) - scale * std::sin(M_PI * x)) < 1e-8);
  }
}

TEST_CASE("intermediate two-edge star matches the displayed kernel") {
  const auto g = MetricGraph::star(2);
  const Complex k(0.8, 0.9);
  const Index n = 1501;
  const double radius = 20.0;
  const auto bc = boundary::intermediate();
  GreensKernel kern(bc, g, k);
  const auto f = EdgeFunction::sample(g, n, radius, [](Index e, double x) {
    return Complex(std::exp(-0.5 * (x - 1.0) * (x - 1.0)), e == 0 ? 0.3 : -0.2);
  });
  const auto u = greens_apply(kern, f);

  // Direct Simpson quadrature of r(x, y) = (i/2k)(e^{ik|x-y|} delta_jj' +
  // e^{ikx_j} S_{jj'} e^{iky_j'}) with S = -[[1,0],[2ik,1]].
  CMatrix s(2, 2);
  s << -1.0, 0.0, -2.0 * iunit * k, -1.0;
  const auto w = graph::simpson_weights(n, f.spacing(0));
  for (Index e = 0; e < 2; ++e) {
    for (Index i : {Index(40), Index(400), Index(900)}) {
      const double x = f.grid_point(e, i);
      Complex acc(0.0, 0.0);
      for (Index ee = 0; ee < 2; ++ee) {
        for (Index j = 0; j < n; ++j) {
          const double y = f.grid_point(ee, j);
          Complex val(0.0, 0.0);
          if (ee == e) val += std::exp(iunit * k * std::abs(x - y));
          val += std::exp(iunit * k * x) * s(e, ee) * std::exp(iunit * k * y);
          acc += w(j) * val * f.values(ee)(j);
        }
      }
      acc *= iunit / (2.0 * k);
      CHECK(std::abs(u.values(e)(i) - acc) < 1e-6 * (1.0 + std::abs(acc)));
    }
  }
}

TEST_CASE("random regular fixtures: ODE and trace residuals") {
  auto& gen = rng(910);
  const Complex k(1.0, 2.0);
  std::uniform_real_distribution<double> len(0.6, 1.8), freq(0.5, 2.0), coef(-1.0, 1.0);
  int accepted = 0;
  int attempts = 0;
  while (accepted < 10 && attempts < 500) {
    ++attempts;
    // Random small graph: 1-2 internal edges, 0-2 external.
    const int ni = 1 + attempts % 2;
    const int ne = attempts % 3;
    std::vector<graph::InternalEdge> internal;
    for (int i = 0; i < ni; ++i) {
      internal.push_back({"i" + std::to_string(i), "v0", "v1", len(gen)});
    }
    std::vector<graph::ExternalEdge> external;
    for (int e = 0; e < ne; ++e) {
      external.push_back({"e" + std::to_string(e), e % 2 == 0 ? "v0" : "v1"});
    }
    MetricGraph g({"v0", "v1"}, internal, external);
    const Index d = graph::deficiency_index(g);
    const CMatrix a = testsupport::random_matrix(d, d, gen);
    const CMatrix b = testsupport::random_matrix(d, d, gen);
    BoundaryConditions bc(a, b);
    if (boundary::classify(bc).tag != boundary::BCClass::QuasiSectorial) continue;

    // Externals need a fine grid for the one-sided trace stencils; compact
    // graphs get a coarser one so the D^2 roundoff floor eps/h^2 stays well
    // below the 10 h^2 target.
    const Index n = (ne == 0) ? 4001 : 20001;
    const double radius = 6.0;
    const double w1 = freq(gen), w2 = freq(gen);
    const Complex c1(coef(gen), coef(gen)), c2(coef(gen), coef(gen));
    const auto f = EdgeFunction::sample(g, n, radius, [&](Index e, double x) {
      return c1 * std::cos(w1 * x + 0.2 * e) + c2 * std::sin(w2 * x);
    });
    EdgeFunction u(g, n, radius);
    try {
      GreensKernel kern(bc, g, k);
      u = greens_apply(kern, f);
    } catch (const Error&) {
      continue;  // pole or on-spectrum draw
    }
    if (u.norm() > 0.3 * f.norm()) continue;  // keep the resolvent well conditioned
    ++accepted;

    double h = 0.0;
    for (Index e = 0; e < f.n_edges(); ++e) h = std::max(h, f.spacing(e));
    CHECK(ode_residual(u, f, k) <= 10.0 * h * h);
    const auto tp = graph::trace(g, u);
    CHECK((bc.A * tp.values + bc.B * tp.derivatives).norm() <= 1e-6 * f.norm());
  }
  CHECK(accepted == 10);
}

TEST_CASE("Green's kernel preconditions") {
  const auto g = MetricGraph::interval(1.0);
  CHECK_THROWS_AS(GreensKernel(boundary::dirichlet(2), g, Complex(0.0, 0.0)), Error);   // ZeroK
  CHECK_THROWS_AS(GreensKernel(boundary::dirichlet(2), g, Complex(1.0, 0.0)), Error);   // Im k = 0
  CHECK_THROWS_AS(GreensKernel(boundary::dirichlet(2), g, Complex(M_PI, 1e-13)), Error);  // spectrum
  // delta gamma=2 d=2 has its Cayley pole at k = -i: kernel wants Im k > 0 anyway.
  CHECK_THROWS_AS(GreensKernel(boundary::delta(2.0, 2), g, Complex(0.0, -1.0)), Error);
}

TEST_CASE("nqs witness: intermediate conditions on a two-edge star") {
  const auto g = MetricGraph::star(2);
  const auto bc = boundary::intermediate();
  // Exact quotient for this fixture: 1/(2 kappa).
  for (double kappa : {10.0, 20.0}) {
    const auto w = resolvent_witness_nqs(bc, g, kappa, 6001);
    CHECK(std::abs(w.quotient - 1.0 / (2.0 * kappa)) < 2e-3 / kappa);
  }
  // Log-log slope over the sweep sits near -1.
  std::vector<double> xs, ys;
  for (double kappa : {10.0, 20.0, 40.0, 80.0}) {
    xs.push_back(std::log(kappa));
    ys.push_back(std::log(resolvent_witness_nqs(bc, g, kappa, 8001).quotient));
  }
  const double slope = testsupport::fit_slope(xs, ys);
  CHECK(slope > -1.3);
  CHECK(slope < -0.8);

  CHECK_THROWS_AS(resolvent_witness_nqs(boundary::dirichlet(2), g, 10.0), Error);
}

TEST_CASE("irregular witness: totally degenerate interval") {
  CMatrix a = CMatrix::Zero(2, 2);
  a(0, 0) = 1.0;
  CMatrix b = CMatrix::Zero(2, 2);
  b(1, 0) = 1.0;
  const BoundaryConditions bc(a, b);
  const auto g = MetricGraph::interval(1.0);

  // Paper closed form: for f = 1 the solution is (cos(kx) - 1)/k^2; checked
  // against an initial-value quadrature oracle u(x) = -(1/k) int sin(k(x-y)) f.
  const Complex k(1.3, 0.8);
  const Index n = 4001;
  const double h = 1.0 / static_cast<double>(n - 1);
  Complex acc(0.0, 0.0);
  double worst = 0.0;
  std::vector<Complex> u(static_cast<size_t>(n), Complex(0.0, 0.0));
  for (Index i = 1; i < n; ++i) {
    // trapezoid on the Volterra kernel
    acc = Complex(0.0, 0.0);
    const double x = h * static_cast<double>(i);
    for (Index j = 0; j <= i; ++j) {
      const double y = h * static_cast<double>(j);
      const double wq = (j == 0 || j == i) ? 0.5 : 1.0;
      acc += wq * std::sin(k * (x - y));
    }
    u[static_cast<size_t>(i)] = -(acc * h) / k;
    const Complex want = (std::cos(k * x) - 1.0) / (k * k);
    worst = std::max(worst, std::abs(u[static_cast<size_t>(i)] - want));
  }
  CHECK(worst < 1e-5);

  // Semilog slope of quotient * kappa^2 against kappa sits near a_min/2.
  std::vector<double> xs, ys;
  for (double kappa : {5.0, 10.0, 20.0}) {
    const auto w = resolvent_witness_irregular(bc, g, Complex(0.0, kappa), 4001);
    CHECK(!w.everything_is_spectrum);
    xs.push_back(kappa);
    ys.push_back(std::log(w.quotient * kappa * kappa));
  }
  const double slope = testsupport::fit_slope(xs, ys);
  CHECK(slope > 0.4);
  CHECK(slope < 0.6);

  // PT at pi/2 on a star: the spectrum is the whole plane.
  const auto w2 = resolvent_witness_irregular(boundary::pt_point(M_PI / 2.0),
                                              MetricGraph::star(2), Complex(0.0, 5.0));
  CHECK(w2.everything_is_spectrum);

  CHECK_THROWS_AS(resolvent_witness_irregular(boundary::dirichlet(2), g, Complex(0.0, 5.0)),
                  Error);
}

TEST_CASE("resolvent norm estimate: Dirichlet star scales like 1/kappa^2") {
  const auto g = MetricGraph::star(2);
  const auto bc = boundary::dirichlet(2);
  std::vector<double> xs, ys;
  for (double kappa : {10.0, 20.0, 40.0, 80.0}) {
    const double est = resolvent_norm_estimate(bc, g, kappa, 3001, 25);
    xs.push_back(std::log(kappa));
    ys.push_back(std::log(est));
    // Power iteration on a compression cannot exceed the true norm 1/kappa^2.
    CHECK(est <= 1.0 / (kappa * kappa) * (1.0 + 1e-6));
    CHECK(est >= 0.9 / (kappa * kappa + 10.0));
  }
  const double slope = testsupport::fit_slope(xs, ys);
  CHECK(std::abs(slope + 2.0) < 0.05);

  // Cauchy-Schwarz: the witness quotient never beats the norm estimate.
  const auto w = resolvent_witness_nqs(boundary::intermediate(), g, 20.0, 3001);
  const double est = resolvent_norm_estimate(boundary::intermediate(), g, 20.0, 3001, 25);
  CHECK(w.quotient <= est * (1.0 + 1e-6));
}

TEST_CASE("spectral projection on the Dirichlet interval") {
  const auto g = MetricGraph::interval(1.0);
  const auto bc = boundary::dirichlet(2);
  const Index n = 2001;
  const auto f =
      EdgeFunction::sample(g, n, 10.0, [](Index, double x) { return Complex(x * (1.0 - x), 0.0); });

  // Contour around pi^2 only: E f = (8/pi^3) sin(pi x).
  const auto ef = spectral_projection(bc, g, {Complex(M_PI * M_PI, 0.0), 4.0}, f);
  const double coeff = 8.0 / (M_PI * M_PI * M_PI);
  double worst = 0.0;
  for (Index i = 0; i < n; i += 61) {
    const double x = ef.grid_point(0, i);
    worst = std::max(worst, std::abs(ef.values(0)(i) - coeff * std::sin(M_PI * x)));
  }
  CHECK(worst < 1e-6);

  // Idempotency: applying the projection twice is a no-op.
  const auto ef2 = spectral_projection(bc, g, {Complex(M_PI * M_PI, 0.0), 4.0}, ef);
  EdgeFunction diff = ef2;
  diff -= ef;
  CHECK(diff.norm() <= 1e-6 * ef.norm());

  // Empty contour: Cauchy's theorem gives zero.
  const auto zero = spectral_projection(bc, g, {Complex(2.0, 0.0), 1.0}, f);
  CHECK(zero.norm() <= 1e-8);

  // A contour through an eigenvalue is rejected.
  CHECK_THROWS_AS(spectral_projection(bc, g, {Complex(M_PI * M_PI - 4.0, 0.0), 4.0}, f), Error);
}

TEST_CASE("nqs witness on the interval exercises the internal H blocks") {
  // Same C/kappa law as on the star, now with the coupled 2x2 internal
  // blocks of H(i kappa, a) and a nontrivial Neumann factor (1 - ST)^{-1}.
  const auto g = MetricGraph::interval(1.0);
  for (double kappa : {10.0, 20.0, 40.0}) {
    const auto w = resolvent_witness_nqs(boundary::intermediate(), g, kappa, 6001);
    CHECK(std::abs(w.quotient * kappa - 0.5) < 5e-3);
  }
}

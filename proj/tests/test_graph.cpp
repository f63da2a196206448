#include <doctest.h>

#include <cmath>

#include "qgraph/graph.hpp"
#include "test_support.hpp"

using namespace qgraph;
using namespace qgraph::graph;

namespace {

MetricGraph lasso() {
  // One internal loop-ish edge plus two external edges, Fig. 1(b) style.
  return MetricGraph({"v0", "v1"}, {{"i0", "v0", "v1", 1.0}},
                     {{"e0", "v0"}, {"e1", "v1"}});
}

}  // namespace

TEST_CASE("deficiency index d = |E| + 2|I|") {
  CHECK(deficiency_index(MetricGraph::interval(1.0)) == 2);
  CHECK(deficiency_index(MetricGraph::star(3)) == 3);
  CHECK(deficiency_index(lasso()) == 4);
}

TEST_CASE("graph validation") {
  CHECK_THROWS_AS(MetricGraph({"v0"}, {{"i0", "v0", "nope", 1.0}}, {}), Error);
  CHECK_THROWS_AS(MetricGraph({"v0", "v1"}, {{"i0", "v0", "v1", -1.0}}, {}), Error);
  CHECK_THROWS_AS(MetricGraph({"v0"}, {}, {}), Error);
  CHECK_THROWS_AS(MetricGraph({"v0", "v0"}, {}, {{"e0", "v0"}}), Error);
}

TEST_CASE("trace-vector layout and sign convention") {
  const auto g = MetricGraph::interval(1.0);
  const TraceIndex ti(g);
  REQUIRE(ti.d() == 2);
  CHECK(ti.slots()[0].endpoint == Endpoint::Initial);
  CHECK(ti.slots()[1].endpoint == Endpoint::Terminal);

  // f(x) = x: values (0, 1), derivatives (1, -1): exact for the 3-point stencil.
  const auto f = EdgeFunction::sample(g, 101, 10.0, [](Index, double x) { return Complex(x, 0.0); });
  const auto tp = trace(g, f);
  CHECK(std::abs(tp.values(0)) < 1e-13);
  CHECK(std::abs(tp.values(1) - 1.0) < 1e-13);
  CHECK(std::abs(tp.derivatives(0) - 1.0) < 1e-12);
  CHECK(std::abs(tp.derivatives(1) + 1.0) < 1e-12);
}

TEST_CASE("trace of constants and sin(pi x)") {
  const auto g = MetricGraph::interval(1.0);
  const Complex c(2.0, -1.0);
  const auto fc = EdgeFunction::sample(g, 401, 10.0, [&](Index, double) { return c; });
  const auto tc = trace(g, fc);
  CHECK(std::abs(tc.values(0) - c) < 1e-13);
  CHECK(std::abs(tc.values(1) - c) < 1e-13);
  CHECK(std::abs(tc.derivatives(0)) < 1e-10);
  CHECK(std::abs(tc.derivatives(1)) < 1e-10);

  const auto fs =
      EdgeFunction::sample(g, 2001, 10.0, [](Index, double x) { return Complex(std::sin(M_PI * x), 0.0); });
  const auto ts = trace(g, fs);
  CHECK(std::abs(ts.values(0)) < 1e-12);
  CHECK(std::abs(ts.values(1)) < 1e-12);
  // Analytic derivative: (pi, pi); the second slot is -(-pi).
  CHECK(std::abs(ts.derivatives(0) - M_PI) < 1e-5);
  CHECK(std::abs(ts.derivatives(1) - M_PI) < 1e-5);
}

TEST_CASE("trace is linear and O(h^2) accurate") {
  const auto g = MetricGraph::interval(1.0);
  auto smooth = [](Index, double x) { return Complex(std::exp(x) * std::cos(3.0 * x), 0.2 * x * x); };
  const auto f1 = EdgeFunction::sample(g, 101, 10.0, smooth);
  auto doubled = [&](Index e, double x) { return 2.0 * smooth(e, x); };
  const auto f2 = EdgeFunction::sample(g, 101, 10.0, doubled);
  const auto t1 = trace(g, f1);
  const auto t2 = trace(g, f2);
  CHECK((t2.values - 2.0 * t1.values).norm() < 1e-13);
  CHECK((t2.derivatives - 2.0 * t1.derivatives).norm() < 1e-12);

  // Halving h cuts the derivative error by about 4.
  const Complex exact(1.0, 0.0);  // d/dx of exp(x)cos(3x) at 0 = 1
  const auto coarse = EdgeFunction::sample(g, 101, 10.0, smooth);
  const auto fine = EdgeFunction::sample(g, 201, 10.0, smooth);
  const double ec = std::abs(trace(g, coarse).derivatives(0) - exact);
  const double ef = std::abs(trace(g, fine).derivatives(0) - exact);
  CHECK(ec / ef > 3.3);
  CHECK(ec / ef < 4.7);
}

TEST_CASE("too few samples raise GridError") {
  const auto g = MetricGraph::interval(1.0);
  const EdgeFunction f(g, 2, 10.0);
  CHECK_THROWS_AS(trace(g, f), Error);
}

TEST_CASE("Simpson quadrature and norms") {
  const auto g = MetricGraph::interval(1.0);
  const auto f =
      EdgeFunction::sample(g, 201, 10.0, [](Index, double x) { return Complex(std::sin(M_PI * x), 0.0); });
  CHECK(f.norm() == doctest::Approx(std::sqrt(0.5)).epsilon(1e-9));

  // Odd number of intervals exercises the Newton-Cotes tail patch.
  const auto f2 =
      EdgeFunction::sample(g, 200, 10.0, [](Index, double x) { return Complex(x * x, 0.0); });
  CHECK(f2.norm() == doctest::Approx(std::sqrt(0.2)).epsilon(1e-8));

  const auto h = EdgeFunction::sample(g, 201, 10.0, [](Index, double x) { return Complex(x, x); });
  CHECK(std::abs(f.inner(h) - std::conj(h.inner(f))) < 1e-12);
}

TEST_CASE("external edges are truncated at the radius") {
  const auto g = MetricGraph::star(2);
  const auto f = EdgeFunction::sample(g, 51, 7.5, [](Index, double x) { return Complex(x, 0.0); });
  CHECK(f.span(0) == doctest::Approx(7.5));
  CHECK(f.grid_point(0, 50) == doctest::Approx(7.5));
  CHECK(EdgeFunction::default_radius(MetricGraph::interval(2.5)) == doctest::Approx(25.0));
}

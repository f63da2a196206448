#include "qgraph/graph.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace qgraph::graph {

MetricGraph::MetricGraph(std::vector<std::string> vertices, std::vector<InternalEdge> internal,
                         std::vector<ExternalEdge> external)
    : vertices_(std::move(vertices)),
      internal_(std::move(internal)),
      external_(std::move(external)) {
  std::set<std::string> vset(vertices_.begin(), vertices_.end());
  if (vset.size() != vertices_.size()) fail(ErrorKind::SpecError, "duplicate vertex id");
  std::set<std::string> eset;
  auto check_edge_id = [&](const std::string& id) {
    if (!eset.insert(id).second) fail(ErrorKind::SpecError, "duplicate edge id: " + id);
  };
  for (const auto& e : internal_) {
    check_edge_id(e.id);
    if (!vset.count(e.initial_vertex) || !vset.count(e.terminal_vertex)) {
      fail(ErrorKind::SpecError, "internal edge " + e.id + " references unknown vertex");
    }
    if (!(e.length > 0.0) || !std::isfinite(e.length)) {
      fail(ErrorKind::SpecError, "internal edge " + e.id + " needs a positive finite length");
    }
  }
  for (const auto& e : external_) {
    check_edge_id(e.id);
    if (!vset.count(e.initial_vertex)) {
      fail(ErrorKind::SpecError, "external edge " + e.id + " references unknown vertex");
    }
  }
  if (internal_.empty() && external_.empty()) fail(ErrorKind::SpecError, "graph has no edges");
}

MetricGraph MetricGraph::interval(double length) {
  return MetricGraph({"v0", "v1"}, {{"i0", "v0", "v1", length}}, {});
}

MetricGraph MetricGraph::star(Index n_external_edges) {
  std::vector<ExternalEdge> ext;
  for (Index j = 0; j < n_external_edges; ++j) {
    ext.push_back({"e" + std::to_string(j), "v0"});
  }
  return MetricGraph({"v0"}, {}, std::move(ext));
}

double MetricGraph::a_min(double fallback) const {
  if (internal_.empty()) return fallback;
  double m = internal_.front().length;
  for (const auto& e : internal_) m = std::min(m, e.length);
  return m;
}

double MetricGraph::a_max(double fallback) const {
  if (internal_.empty()) return fallback;
  double m = internal_.front().length;
  for (const auto& e : internal_) m = std::max(m, e.length);
  return m;
}

double MetricGraph::edge_length_or(Index e, double external_value) const {
  if (edge_is_external(e)) return external_value;
  return internal_[static_cast<size_t>(e - n_external())].length;
}

std::string MetricGraph::edge_id(Index e) const {
  if (edge_is_external(e)) return external_[static_cast<size_t>(e)].id;
  return internal_[static_cast<size_t>(e - n_external())].id;
}

Index deficiency_index(const MetricGraph& g) {
  return g.n_external() + 2 * g.n_internal();
}

TraceIndex::TraceIndex(const MetricGraph& g) {
  for (Index e = 0; e < g.n_external(); ++e) slots_.push_back({e, Endpoint::Initial});
  for (Index i = 0; i < g.n_internal(); ++i) {
    slots_.push_back({g.n_external() + i, Endpoint::Initial});
  }
  for (Index i = 0; i < g.n_internal(); ++i) {
    slots_.push_back({g.n_external() + i, Endpoint::Terminal});
  }
}

double EdgeFunction::default_radius(const MetricGraph& g) {
  return 10.0 * std::max(g.a_max(1.0), 1.0);
}

EdgeFunction::EdgeFunction(const MetricGraph& g, Index samples_per_edge, double external_radius)
    : radius_(external_radius) {
  if (samples_per_edge < 2) fail(ErrorKind::GridError, "need at least 2 samples per edge");
  if (g.n_external() > 0 && !(external_radius > 0.0)) {
    fail(ErrorKind::GridError, "external truncation radius must be positive");
  }
  for (Index e = 0; e < g.n_edges(); ++e) {
    const double span = g.edge_length_or(e, external_radius);
    values_.push_back(CVector::Zero(samples_per_edge));
    span_.push_back(span);
    spacing_.push_back(span / static_cast<double>(samples_per_edge - 1));
  }
}

EdgeFunction EdgeFunction::sample(const MetricGraph& g, Index samples_per_edge,
                                  double external_radius, const Sampler& f) {
  EdgeFunction out(g, samples_per_edge, external_radius);
  for (Index e = 0; e < out.n_edges(); ++e) {
    for (Index i = 0; i < out.samples(e); ++i) {
      out.values(e)(i) = f(e, out.grid_point(e, i));
    }
  }
  return out;
}

RVector simpson_weights(Index n, double h) {
  if (n < 2) fail(ErrorKind::GridError, "quadrature needs >= 2 samples");
  RVector w = RVector::Zero(n);
  if (n == 2) {
    w << 0.5, 0.5;
    return h * w;
  }
  // Composite Simpson over full pairs; trailing odd interval handled with the
  // 3-point Newton-Cotes rule on the last two intervals (keeps O(h^4)).
  const Index pairs = (n - 1) / 2;
  for (Index p = 0; p < pairs; ++p) {
    w(2 * p) += 1.0 / 3.0;
    w(2 * p + 1) += 4.0 / 3.0;
    w(2 * p + 2) += 1.0 / 3.0;
  }
  if ((n - 1) % 2 == 1) {
    // Quadratic through the last three points, integrated over the last interval.
    w(n - 3) += -1.0 / 12.0;
    w(n - 2) += 8.0 / 12.0;
    w(n - 1) += 5.0 / 12.0;
  }
  return h * w;
}

double EdgeFunction::norm() const {
  double acc = 0.0;
  for (size_t e = 0; e < values_.size(); ++e) {
    const RVector w = simpson_weights(values_[e].size(), spacing_[e]);
    acc += (values_[e].cwiseAbs2().array() * w.array()).sum();
  }
  return std::sqrt(std::max(acc, 0.0));
}

Complex EdgeFunction::inner(const EdgeFunction& other) const {
  if (other.values_.size() != values_.size()) fail(ErrorKind::ShapeError, "edge count mismatch");
  Complex acc = 0.0;
  for (size_t e = 0; e < values_.size(); ++e) {
    if (other.values_[e].size() != values_[e].size()) {
      fail(ErrorKind::ShapeError, "sample count mismatch");
    }
    const RVector w = simpson_weights(values_[e].size(), spacing_[e]);
    acc += (values_[e].array() * other.values_[e].array().conjugate() * w.array()).sum();
  }
  return acc;
}

EdgeFunction& EdgeFunction::operator*=(Complex s) {
  for (auto& v : values_) v *= s;
  return *this;
}

EdgeFunction& EdgeFunction::operator+=(const EdgeFunction& other) {
  if (other.values_.size() != values_.size()) fail(ErrorKind::ShapeError, "edge count mismatch");
  for (size_t e = 0; e < values_.size(); ++e) values_[e] += other.values_[e];
  return *this;
}

EdgeFunction& EdgeFunction::operator-=(const EdgeFunction& other) {
  if (other.values_.size() != values_.size()) fail(ErrorKind::ShapeError, "edge count mismatch");
  for (size_t e = 0; e < values_.size(); ++e) values_[e] -= other.values_[e];
  return *this;
}

TracePair trace(const MetricGraph& g, const EdgeFunction& f) {
  const TraceIndex ti(g);
  TracePair out;
  out.values = CVector::Zero(ti.d());
  out.derivatives = CVector::Zero(ti.d());
  for (Index s = 0; s < ti.d(); ++s) {
    const TraceSlot slot = ti.slots()[static_cast<size_t>(s)];
    const CVector& v = f.values(slot.edge);
    const Index n = v.size();
    if (n < 3) fail(ErrorKind::GridError, "trace needs >= 3 samples per edge");
    const double h = f.spacing(slot.edge);
    if (slot.endpoint == Endpoint::Initial) {
      out.values(s) = v(0);
      out.derivatives(s) = (-3.0 * v(0) + 4.0 * v(1) - v(2)) / (2.0 * h);
    } else {
      out.values(s) = v(n - 1);
      // Sign convention: terminal slots carry -psi'(a_i).
      out.derivatives(s) = -(3.0 * v(n - 1) - 4.0 * v(n - 2) + v(n - 3)) / (2.0 * h);
    }
  }
  return out;
}

}  // namespace qgraph::graph

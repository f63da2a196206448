#pragma once

#include <functional>
#include <string>
#include <vector>

#include "qgraph/types.hpp"

namespace qgraph::graph {

struct InternalEdge {
  std::string id;
  std::string initial_vertex;
  std::string terminal_vertex;
  double length = 0.0;
};

struct ExternalEdge {
  std::string id;
  std::string initial_vertex;
};

/// Finite metric graph: internal edges are intervals [0, a_i], external edges
/// half-lines [0, inf) attached at their initial vertex.  Immutable after
/// construction; construction validates endpoints and lengths.
class MetricGraph {
 public:
  MetricGraph(std::vector<std::string> vertices, std::vector<InternalEdge> internal,
              std::vector<ExternalEdge> external);

  static MetricGraph interval(double length);
  static MetricGraph star(Index n_external_edges);

  Index n_vertices() const { return static_cast<Index>(vertices_.size()); }
  Index n_internal() const { return static_cast<Index>(internal_.size()); }
  Index n_external() const { return static_cast<Index>(external_.size()); }
  Index n_edges() const { return n_internal() + n_external(); }
  bool compact() const { return n_external() == 0; }

  const std::vector<std::string>& vertices() const { return vertices_; }
  const std::vector<InternalEdge>& internal_edges() const { return internal_; }
  const std::vector<ExternalEdge>& external_edges() const { return external_; }

  /// Shortest internal edge length; `fallback` when there are no internal edges.
  double a_min(double fallback = 1.0) const;
  double a_max(double fallback = 1.0) const;

  /// Edge enumeration used throughout: external edges first, then internal.
  bool edge_is_external(Index e) const { return e < n_external(); }
  double edge_length_or(Index e, double external_value) const;
  std::string edge_id(Index e) const;

 private:
  std::vector<std::string> vertices_;
  std::vector<InternalEdge> internal_;
  std::vector<ExternalEdge> external_;
};

/// d = |E| + 2|I|.
Index deficiency_index(const MetricGraph& g);

enum class Endpoint { Initial, Terminal };

struct TraceSlot {
  Index edge = 0;  // index into the external-first edge enumeration
  Endpoint endpoint = Endpoint::Initial;
};

/// Fixed trace-vector layout: all external edges (at 0), then all internal
/// edges at 0, then all internal edges at a_i.  The derivative slot of a
/// terminal endpoint carries -psi'(a_i).
class TraceIndex {
 public:
  explicit TraceIndex(const MetricGraph& g);
  Index d() const { return static_cast<Index>(slots_.size()); }
  const std::vector<TraceSlot>& slots() const { return slots_; }

 private:
  std::vector<TraceSlot> slots_;
};

/// Edgewise-defined function on uniform per-edge grids.  Internal edges are
/// sampled on [0, a_i]; external edges on [0, R] for the truncation radius R.
class EdgeFunction {
 public:
  EdgeFunction(const MetricGraph& g, Index samples_per_edge, double external_radius);

  /// Default truncation radius 10 * max(a_i, 1).
  static double default_radius(const MetricGraph& g);

  using Sampler = std::function<Complex(Index edge, double x)>;
  static EdgeFunction sample(const MetricGraph& g, Index samples_per_edge,
                             double external_radius, const Sampler& f);

  Index n_edges() const { return static_cast<Index>(values_.size()); }
  Index samples(Index e) const { return values_[static_cast<size_t>(e)].size(); }
  double spacing(Index e) const { return spacing_[static_cast<size_t>(e)]; }
  double span(Index e) const { return span_[static_cast<size_t>(e)]; }
  double external_radius() const { return radius_; }
  CVector& values(Index e) { return values_[static_cast<size_t>(e)]; }
  const CVector& values(Index e) const { return values_[static_cast<size_t>(e)]; }
  double grid_point(Index e, Index i) const { return spacing(e) * static_cast<double>(i); }

  /// L2 norm over the graph (composite Simpson per edge).
  double norm() const;
  Complex inner(const EdgeFunction& other) const;  // <this, other> = integral this * conj(other)

  EdgeFunction& operator*=(Complex s);
  EdgeFunction& operator+=(const EdgeFunction& other);
  EdgeFunction& operator-=(const EdgeFunction& other);

 private:
  std::vector<CVector> values_;
  std::vector<double> spacing_;
  std::vector<double> span_;
  double radius_ = 0.0;
};

/// Composite Simpson weights for a uniform grid of n >= 2 points and spacing h.
RVector simpson_weights(Index n, double h);

struct TracePair {
  CVector values;       // psi-underbar, length d
  CVector derivatives;  // psi'-underbar (signed), length d
};

/// Endpoint values and signed endpoint derivatives in TraceIndex order,
/// one-sided 3-point differences for the derivatives.
TracePair trace(const MetricGraph& g, const EdgeFunction& f);

}  // namespace qgraph::graph

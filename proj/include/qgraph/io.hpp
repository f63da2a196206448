#pragma once

#include <string>

#include <json.hpp>

#include "qgraph/boundary.hpp"
#include "qgraph/classify.hpp"
#include "qgraph/evolve.hpp"
#include "qgraph/graph.hpp"
#include "qgraph/spectral.hpp"

namespace qgraph::io {

using nlohmann::json;

// Complex numbers travel as {"re": x, "im": y} objects, never strings.
json to_json(Complex z);
Complex complex_from_json(const json& j, const std::string& where);

graph::MetricGraph parse_graph(const json& j);
graph::MetricGraph load_graph(const std::string& path);

/// BC document: either {"A": [[..]], "B": [[..]]} with complex entries, a
/// preset name string, or a one-key preset object like {"delta": 2.0}.
boundary::BoundaryConditions parse_bc(const json& j, Index d);
/// CLI form: preset[:params] (e.g. "pt_point:0.785", "delta:-1,2") or a path.
boundary::BoundaryConditions parse_bc_spec(const std::string& spec, Index d);

json classification_to_json(const classify::Report& rep);
json spectral_report_to_json(const spectral::SpectralReport& rep);
json enclosure_to_json(const spectral::EnclosureRegion& e);
json similarity_to_json(const classify::SimilarityVerdict& v);
json pole_report_to_json(const boundary::CayleyPoleReport& rep);

/// Eigenvalue table: columns re_k, im_k, re_lambda, im_lambda, multiplicity.
std::string eigenvalues_csv(const spectral::SpectralReport& rep);
std::string norms_csv(const evolve::EvolutionResult& res);
std::string edge_function_csv(const graph::MetricGraph& g, const graph::EdgeFunction& f);
json snapshots_to_json(const graph::MetricGraph& g, const evolve::EvolutionResult& res);

/// Sampled function from a document {"default": {...}, "per_edge": {id: {...}}}
/// with kinds zero | constant | sin | indicator | gaussian.
graph::EdgeFunction parse_edge_function(const json& j, const graph::MetricGraph& g,
                                        Index samples_per_edge, double radius);

/// Minimal structural validation of emitted reports (field names and types);
/// throws SpecError naming the offending field.
void validate_report_json(const json& j);
void validate_spectrum_json(const json& j);

}  // namespace qgraph::io

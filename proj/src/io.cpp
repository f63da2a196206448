#include "qgraph/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace qgraph::io {

namespace {

[[noreturn]] void spec_fail(const std::string& msg) { fail(ErrorKind::SpecError, msg); }

const json& require(const json& j, const std::string& key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) {
    spec_fail(where + ": missing field \"" + key + "\"");
  }
  return j.at(key);
}

double require_number(const json& j, const std::string& where) {
  if (!j.is_number()) spec_fail(where + ": expected a number");
  return j.get<double>();
}

std::string require_string(const json& j, const std::string& where) {
  if (!j.is_string()) spec_fail(where + ": expected a string");
  return j.get<std::string>();
}

std::string fmt_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

}  // namespace

json to_json(Complex z) { return json{{"re", z.real()}, {"im", z.imag()}}; }

Complex complex_from_json(const json& j, const std::string& where) {
  if (j.is_number()) return Complex(j.get<double>(), 0.0);
  if (!j.is_object()) spec_fail(where + ": expected {\"re\":..,\"im\":..} or a number");
  return Complex(require_number(require(j, "re", where), where + ".re"),
                 require_number(require(j, "im", where), where + ".im"));
}

graph::MetricGraph parse_graph(const json& j) {
  const auto& jv = require(j, "vertices", "graph");
  if (!jv.is_array()) spec_fail("graph.vertices: expected an array");
  std::vector<std::string> vertices;
  for (const auto& v : jv) vertices.push_back(require_string(v, "graph.vertices[]"));

  std::vector<graph::InternalEdge> internal;
  if (j.contains("internal_edges")) {
    if (!j.at("internal_edges").is_array()) spec_fail("graph.internal_edges: expected an array");
    for (const auto& e : j.at("internal_edges")) {
      graph::InternalEdge ie;
      ie.id = require_string(require(e, "id", "internal_edges[]"), "internal_edges[].id");
      ie.initial_vertex =
          require_string(require(e, "from", "internal_edges[]"), "internal_edges[].from");
      ie.terminal_vertex =
          require_string(require(e, "to", "internal_edges[]"), "internal_edges[].to");
      ie.length = require_number(require(e, "length", "internal_edges[]"),
                                 "internal_edges[].length");
      internal.push_back(std::move(ie));
    }
  }
  std::vector<graph::ExternalEdge> external;
  if (j.contains("external_edges")) {
    if (!j.at("external_edges").is_array()) spec_fail("graph.external_edges: expected an array");
    for (const auto& e : j.at("external_edges")) {
      graph::ExternalEdge ee;
      ee.id = require_string(require(e, "id", "external_edges[]"), "external_edges[].id");
      ee.initial_vertex =
          require_string(require(e, "vertex", "external_edges[]"), "external_edges[].vertex");
      external.push_back(std::move(ee));
    }
  }
  return graph::MetricGraph(std::move(vertices), std::move(internal), std::move(external));
}

graph::MetricGraph load_graph(const std::string& path) {
  std::ifstream in(path);
  if (!in) spec_fail("cannot open graph file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    spec_fail("graph file is not valid JSON: " + std::string(e.what()));
  }
  return parse_graph(j);
}

namespace {

CMatrix matrix_from_json(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) spec_fail(where + ": expected a nonempty array of rows");
  const Index rows = static_cast<Index>(j.size());
  const Index cols = static_cast<Index>(j.at(0).size());
  CMatrix m(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    const auto& row = j.at(static_cast<size_t>(r));
    if (!row.is_array() || static_cast<Index>(row.size()) != cols) {
      spec_fail(where + ": ragged rows");
    }
    for (Index c = 0; c < cols; ++c) {
      m(r, c) = complex_from_json(row.at(static_cast<size_t>(c)),
                                  where + "[" + std::to_string(r) + "][" + std::to_string(c) + "]");
    }
  }
  return m;
}

boundary::BoundaryConditions preset_bc(const std::string& name, const json& params, Index d) {
  if (name == "dirichlet") return boundary::dirichlet(d);
  if (name == "neumann") return boundary::neumann(d);
  if (name == "kirchhoff") return boundary::kirchhoff(d);
  if (name == "intermediate") {
    if (d != 2) spec_fail("preset intermediate needs d = 2, graph has d = " + std::to_string(d));
    return boundary::intermediate();
  }
  if (name == "delta") return boundary::delta(complex_from_json(params, "delta"), d);
  if (name == "delta_prime") {
    return boundary::delta_prime(complex_from_json(params, "delta_prime"), d);
  }
  if (name == "pt_point") {
    if (d != 2) spec_fail("preset pt_point needs d = 2, graph has d = " + std::to_string(d));
    return boundary::pt_point(require_number(params, "pt_point"));
  }
  spec_fail("unknown boundary-condition preset: " + name);
}

}  // namespace

boundary::BoundaryConditions parse_bc(const json& j, Index d) {
  if (j.is_string()) return preset_bc(j.get<std::string>(), json(), d);
  if (!j.is_object()) spec_fail("bc: expected an object or a preset name");
  if (j.contains("A") || j.contains("B")) {
    CMatrix a = matrix_from_json(require(j, "A", "bc"), "bc.A");
    CMatrix b = matrix_from_json(require(j, "B", "bc"), "bc.B");
    if (a.rows() != d) {
      spec_fail("bc: matrix size " + std::to_string(a.rows()) + " does not match d = " +
                std::to_string(d));
    }
    return boundary::BoundaryConditions(std::move(a), std::move(b));
  }
  if (j.size() == 1) {
    const auto it = j.begin();
    return preset_bc(it.key(), it.value(), d);
  }
  spec_fail("bc: expected {\"A\":..,\"B\":..} or a single-key preset object");
}

boundary::BoundaryConditions parse_bc_spec(const std::string& spec, Index d) {
  {
    std::ifstream in(spec);
    if (in) {
      json j;
      try {
        in >> j;
      } catch (const json::exception& e) {
        spec_fail("bc file is not valid JSON: " + std::string(e.what()));
      }
      return parse_bc(j, d);
    }
  }
  const auto colon = spec.find(':');
  const std::string name = spec.substr(0, colon);
  json params;
  if (colon != std::string::npos) {
    const std::string rest = spec.substr(colon + 1);
    const auto comma = rest.find(',');
    try {
      if (comma == std::string::npos) {
        params = std::stod(rest);
      } else {
        params = json{{"re", std::stod(rest.substr(0, comma))},
                      {"im", std::stod(rest.substr(comma + 1))}};
      }
    } catch (const std::exception&) {
      spec_fail("cannot parse preset parameters in: " + spec);
    }
  }
  return preset_bc(name, params, d);
}

json pole_report_to_json(const boundary::CayleyPoleReport& rep) {
  json poles = json::array();
  for (const auto& p : rep.finite_poles) {
    poles.push_back(json{{"k", to_json(p.k)}, {"order", p.order}});
  }
  return json{{"finite_poles", poles},
              {"growth_order_at_infinity", rep.growth_order_at_infinity},
              {"is_uniformly_bounded", rep.is_uniformly_bounded}};
}

json enclosure_to_json(const spectral::EnclosureRegion& e) {
  return json{{"kind", e.kind == spectral::EnclosureRegion::Kind::Parabola ? "parabola" : "sector"},
              {"c", e.c},
              {"C", e.C},
              {"t_star", e.t_star},
              {"cone_slope", e.cone_slope},
              {"a_min", e.a_min}};
}

json similarity_to_json(const classify::SimilarityVerdict& v) {
  json j{{"similar", v.is_similar_to_selfadjoint},
         {"obstruction", classify::to_string(v.obstruction)}};
  if (v.witness_eigenvalue) j["witness_eigenvalue"] = to_json(*v.witness_eigenvalue);
  return j;
}

json spectral_report_to_json(const spectral::SpectralReport& rep) {
  json evs = json::array();
  for (const auto& r : rep.point_spectrum) {
    evs.push_back(json{{"k", to_json(r.k)},
                       {"lambda", to_json(r.lambda)},
                       {"multiplicity", r.multiplicity}});
  }
  json j{{"point_spectrum", evs},
         {"essential_halfline", rep.essential_halfline},
         {"everything_is_spectrum", rep.everything_is_spectrum},
         {"total_winding", rep.total_winding}};
  if (rep.search_region) {
    j["search_region"] = json{{"re_lo", rep.search_region->re_lo},
                              {"re_hi", rep.search_region->re_hi},
                              {"im_lo", rep.search_region->im_lo},
                              {"im_hi", rep.search_region->im_hi}};
  }
  if (rep.enclosure) j["enclosure"] = enclosure_to_json(*rep.enclosure);
  return j;
}

json classification_to_json(const classify::Report& rep) {
  json j;
  j["class"] = boundary::to_string(rep.bc_class);
  j["d"] = rep.d;
  j["qw"] = json{{"m", rep.qw_m}, {"nilpotency_index", rep.qw_nilpotency_index}};
  if (rep.poles) {
    j["cayley_poles"] = pole_report_to_json(*rep.poles);
  } else {
    j["cayley_poles"] = json{{"error", rep.poles_error}};
  }
  if (rep.generator) {
    j["generator"] = json{{"c0_semigroup", rep.generator->generates_c0_semigroup},
                          {"analytic_semigroup", rep.generator->generates_analytic_semigroup},
                          {"cosine_family", rep.generator->generates_cosine_family}};
  } else {
    j["generator"] = json{{"error", rep.generator_error}};
  }
  if (rep.similarity) {
    j["similarity"] = similarity_to_json(*rep.similarity);
  } else {
    j["similarity"] = json{{"error", rep.similarity_error}};
  }
  if (rep.enclosure) {
    j["enclosure"] = enclosure_to_json(*rep.enclosure);
  } else {
    j["enclosure"] = json{{"error", rep.enclosure_error}};
  }
  if (rep.spectrum) {
    j["spectrum"] = spectral_report_to_json(*rep.spectrum);
  } else if (!rep.spectrum_error.empty()) {
    j["spectrum"] = json{{"error", rep.spectrum_error}};
  }
  return j;
}

std::string eigenvalues_csv(const spectral::SpectralReport& rep) {
  std::ostringstream out;
  out << "re_k,im_k,re_lambda,im_lambda,multiplicity\n";
  for (const auto& r : rep.point_spectrum) {
    out << fmt_double(r.k.real()) << ',' << fmt_double(r.k.imag()) << ','
        << fmt_double(r.lambda.real()) << ',' << fmt_double(r.lambda.imag()) << ','
        << r.multiplicity << '\n';
  }
  return out.str();
}

std::string norms_csv(const evolve::EvolutionResult& res) {
  std::ostringstream out;
  out << "time,norm\n";
  for (size_t i = 0; i < res.times.size(); ++i) {
    out << fmt_double(res.times[i]) << ',' << fmt_double(res.norms[i]) << '\n';
  }
  return out.str();
}

json snapshots_to_json(const graph::MetricGraph& g, const evolve::EvolutionResult& res) {
  json out = json::array();
  for (const auto& [t, state] : res.snapshots) {
    json edges = json::object();
    for (Index e = 0; e < state.n_edges(); ++e) {
      json re = json::array(), im = json::array();
      for (Index i = 0; i < state.samples(e); ++i) {
        re.push_back(state.values(e)(i).real());
        im.push_back(state.values(e)(i).imag());
      }
      edges[g.edge_id(e)] = json{{"spacing", state.spacing(e)}, {"re", re}, {"im", im}};
    }
    out.push_back(json{{"time", t}, {"edges", edges}});
  }
  return out;
}

std::string edge_function_csv(const graph::MetricGraph& g, const graph::EdgeFunction& f) {
  std::ostringstream out;
  out << "edge,x,re,im\n";
  for (Index e = 0; e < f.n_edges(); ++e) {
    for (Index i = 0; i < f.samples(e); ++i) {
      out << g.edge_id(e) << ',' << fmt_double(f.grid_point(e, i)) << ','
          << fmt_double(f.values(e)(i).real()) << ',' << fmt_double(f.values(e)(i).imag()) << '\n';
    }
  }
  return out.str();
}

namespace {

std::function<Complex(double)> profile_from_json(const json& j, const std::string& where) {
  const std::string kind = require_string(require(j, "kind", where), where + ".kind");
  if (kind == "zero") return [](double) { return Complex(0.0, 0.0); };
  if (kind == "constant") {
    const Complex v = complex_from_json(require(j, "value", where), where + ".value");
    return [v](double) { return v; };
  }
  if (kind == "sin") {
    const double omega = require_number(require(j, "omega", where), where + ".omega");
    return [omega](double x) { return Complex(std::sin(omega * x), 0.0); };
  }
  if (kind == "indicator") {
    const double lo = require_number(require(j, "from", where), where + ".from");
    const double hi = require_number(require(j, "to", where), where + ".to");
    return [lo, hi](double x) { return Complex(x >= lo && x <= hi ? 1.0 : 0.0, 0.0); };
  }
  if (kind == "gaussian") {
    const double center = require_number(require(j, "center", where), where + ".center");
    const double width = require_number(require(j, "width", where), where + ".width");
    return [center, width](double x) {
      const double t = (x - center) / width;
      return Complex(std::exp(-t * t), 0.0);
    };
  }
  spec_fail(where + ": unknown profile kind \"" + kind + "\"");
}

}  // namespace

graph::EdgeFunction parse_edge_function(const json& j, const graph::MetricGraph& g,
                                        Index samples_per_edge, double radius) {
  std::function<Complex(double)> def = [](double) { return Complex(0.0, 0.0); };
  if (j.contains("default")) def = profile_from_json(j.at("default"), "f.default");
  std::vector<std::function<Complex(double)>> per_edge(static_cast<size_t>(g.n_edges()), def);
  if (j.contains("per_edge")) {
    const auto& pe = j.at("per_edge");
    if (!pe.is_object()) spec_fail("f.per_edge: expected an object keyed by edge id");
    for (auto it = pe.begin(); it != pe.end(); ++it) {
      bool found = false;
      for (Index e = 0; e < g.n_edges(); ++e) {
        if (g.edge_id(e) == it.key()) {
          per_edge[static_cast<size_t>(e)] = profile_from_json(it.value(), "f.per_edge." + it.key());
          found = true;
        }
      }
      if (!found) spec_fail("f.per_edge: unknown edge id \"" + it.key() + "\"");
    }
  }
  return graph::EdgeFunction::sample(g, samples_per_edge, radius, [&](Index e, double x) {
    return per_edge[static_cast<size_t>(e)](x);
  });
}

namespace {

void need(bool cond, const std::string& msg) {
  if (!cond) fail(ErrorKind::SpecError, "schema: " + msg);
}

}  // namespace

void validate_spectrum_json(const json& j) {
  need(j.is_object(), "spectrum must be an object");
  need(j.contains("point_spectrum") && j.at("point_spectrum").is_array(),
       "spectrum.point_spectrum must be an array");
  for (const auto& r : j.at("point_spectrum")) {
    need(r.contains("k") && r.at("k").is_object() && r.at("k").contains("re") &&
             r.at("k").contains("im"),
         "point_spectrum[].k must be {re, im}");
    need(r.contains("lambda") && r.at("lambda").is_object(), "point_spectrum[].lambda missing");
    need(r.contains("multiplicity") && r.at("multiplicity").is_number_integer(),
         "point_spectrum[].multiplicity must be an integer");
  }
  need(j.contains("essential_halfline") && j.at("essential_halfline").is_boolean(),
       "spectrum.essential_halfline must be a boolean");
}

void validate_report_json(const json& j) {
  need(j.is_object(), "report must be an object");
  need(j.contains("class") && j.at("class").is_string(), "report.class must be a string");
  need(j.contains("d") && j.at("d").is_number_integer(), "report.d must be an integer");
  need(j.contains("qw") && j.at("qw").is_object(), "report.qw must be an object");
  need(j.contains("generator"), "report.generator missing");
  need(j.contains("similarity"), "report.similarity missing");
  need(j.contains("cayley_poles"), "report.cayley_poles missing");
  need(j.contains("enclosure"), "report.enclosure missing");
  if (j.contains("spectrum") && !j.at("spectrum").contains("error")) {
    validate_spectrum_json(j.at("spectrum"));
  }
}

}  // namespace qgraph::io

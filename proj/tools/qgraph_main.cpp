#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qgraph/io.hpp"

namespace {

using namespace qgraph;
using nlohmann::json;

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::SpecError:
    case ErrorKind::ShapeError:
    case ErrorKind::InvalidMatrix:
    case ErrorKind::GridError:
    case ErrorKind::InvalidArgument:
      return 2;
    case ErrorKind::IrregularPencil:
    case ErrorKind::RankDeficient:
    case ErrorKind::WrongClass:
      return 3;
    case ErrorKind::NotAnEigenvalue:
    case ErrorKind::KappaTooSmall:
    case ErrorKind::ContourTooClose:
    case ErrorKind::ContourThroughZero:
    case ErrorKind::NoConvergence:
    case ErrorKind::SingularStep:
      return 4;
    case ErrorKind::NotAStarGraph:
      return 5;
    case ErrorKind::OnSpectrum:
      return 6;
    case ErrorKind::PoleOfCayley:
    case ErrorKind::ZeroK:
      return 7;
  }
  return 4;
}

struct CommonArgs {
  std::string graph_path;
  std::string bc_spec;
  double tol = 1e-10;
  std::string out_path;
  std::string format = "json";
};

void add_common(CLI::App* cmd, CommonArgs& args, bool with_format = true) {
  cmd->add_option("--graph", args.graph_path, "graph JSON file")->required();
  cmd->add_option("--bc", args.bc_spec, "boundary conditions: preset[:params] or JSON file")
      ->required();
  cmd->add_option("--tol", args.tol, "relative rank tolerance");
  cmd->add_option("--out", args.out_path, "output file (default: stdout)");
  if (with_format) cmd->add_option("--format", args.format, "json|csv");
}

void emit(const CommonArgs& args, const std::string& text) {
  if (args.out_path.empty()) {
    std::cout << text;
    if (!text.empty() && text.back() != '\n') std::cout << '\n';
    return;
  }
  std::ofstream out(args.out_path);
  if (!out) fail(ErrorKind::SpecError, "cannot open output file: " + args.out_path);
  out << text;
}

struct Problem {
  graph::MetricGraph g;
  boundary::BoundaryConditions bc;
  RankTolerance tol;
};

Problem load_problem(const CommonArgs& args) {
  graph::MetricGraph g = io::load_graph(args.graph_path);
  boundary::BoundaryConditions bc = io::parse_bc_spec(args.bc_spec, graph::deficiency_index(g));
  RankTolerance tol;
  tol.relative = args.tol;
  return {std::move(g), std::move(bc), tol};
}

double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const size_t n = x.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < n; ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double den = static_cast<double>(n) * sxx - sx * sx;
  return (static_cast<double>(n) * sxy - sx * sy) / den;
}

int run(int argc, char** argv) {
  CLI::App app{"Laplacians on finite metric graphs: classification, spectra, and evolution"};
  app.require_subcommand(1);

  CommonArgs c_classify, c_spectrum, c_greens, c_enclosure, c_witness, c_similarity, c_evolve;

  auto* cmd_classify = app.add_subcommand("classify", "classification report");
  add_common(cmd_classify, c_classify);
  bool with_spectrum = false;
  std::vector<double> classify_region{0.1, 10.0, -1.0, 1.0};
  cmd_classify->add_flag("--with-spectrum", with_spectrum, "include a spectral section");
  cmd_classify->add_option("--region", classify_region, "re_lo re_hi im_lo im_hi")->expected(4);

  auto* cmd_spectrum = app.add_subcommand("spectrum", "eigenvalues in a k-region");
  CommonArgs& cs = c_spectrum;
  cs.format = "csv";
  add_common(cmd_spectrum, cs);
  std::vector<double> region{0.1, 10.0, -1.0, 1.0};
  cmd_spectrum->add_option("--region", region, "re_lo re_hi im_lo im_hi")->expected(4);

  auto* cmd_greens = app.add_subcommand("greens", "apply the resolvent kernel to f");
  add_common(cmd_greens, c_greens);
  std::vector<double> kval{0.0, 1.0};
  std::string f_path;
  Index samples = 2001;
  cmd_greens->add_option("--k", kval, "re im of the wavenumber k")->expected(2);
  cmd_greens->add_option("--f", f_path, "function spec JSON file")->required();
  cmd_greens->add_option("--samples", samples, "samples per edge");

  auto* cmd_enclosure = app.add_subcommand("enclosure", "spectral enclosure region");
  add_common(cmd_enclosure, c_enclosure);

  auto* cmd_witness = app.add_subcommand("witness", "resolvent lower-bound witnesses");
  add_common(cmd_witness, c_witness);
  std::vector<double> kappas{10.0, 20.0, 40.0, 80.0};
  Index witness_samples = 4001;
  cmd_witness->add_option("--kappa", kappas, "kappa sweep");
  cmd_witness->add_option("--samples", witness_samples, "samples per edge");

  auto* cmd_similarity = app.add_subcommand("similarity", "similarity to self-adjoint (stars)");
  add_common(cmd_similarity, c_similarity);

  auto* cmd_evolve = app.add_subcommand("evolve", "heat/Schroedinger/wave time stepping");
  add_common(cmd_evolve, c_evolve);
  std::string equation = "heat";
  double dt = 1e-4;
  Index steps = 1000;
  Index ev_samples = 201;
  double radius = 20.0;
  std::string psi0_path, v0_path, snapshots_out;
  Index snapshot_stride = 0;
  cmd_evolve->add_option("--equation", equation, "heat|schrodinger|wave");
  cmd_evolve->add_option("--dt", dt, "time step");
  cmd_evolve->add_option("--steps", steps, "number of steps");
  cmd_evolve->add_option("--samples", ev_samples, "samples per edge");
  cmd_evolve->add_option("--radius", radius, "external truncation radius");
  cmd_evolve->add_option("--psi0", psi0_path, "initial data spec JSON")->required();
  cmd_evolve->add_option("--v0", v0_path, "initial velocity spec JSON (wave)");
  cmd_evolve->add_option("--snapshot-stride", snapshot_stride, "record state every N steps");
  cmd_evolve->add_option("--snapshots-out", snapshots_out, "snapshot JSON file");

  CLI11_PARSE(app, argc, argv);

  if (cmd_classify->parsed()) {
    const Problem p = load_problem(c_classify);
    classify::ReportOptions opts;
    opts.tol = p.tol;
    opts.with_spectrum = with_spectrum;
    opts.region = {classify_region[0], classify_region[1], classify_region[2],
                   classify_region[3]};
    const auto rep = classify::report(p.bc, p.g, opts);
    emit(c_classify, io::classification_to_json(rep).dump(2));
    return 0;
  }

  if (cmd_spectrum->parsed()) {
    const Problem p = load_problem(cs);
    try {
      spectral::SpectralReport rep;
      if (p.g.n_internal() == 0) {
        rep = spectral::star_point_spectrum(p.bc, p.g, p.tol);
      } else {
        rep = spectral::compact_spectrum(p.bc, p.g, {region[0], region[1], region[2], region[3]},
                                         p.tol);
      }
      if (rep.everything_is_spectrum) {
        fail(ErrorKind::IrregularPencil, "spectrum is the entire complex plane");
      }
      emit(cs, cs.format == "json" ? io::spectral_report_to_json(rep).dump(2)
                                   : io::eigenvalues_csv(rep));
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::IrregularPencil || e.kind() == ErrorKind::RankDeficient) {
        std::cerr << "irregular boundary conditions: spectrum may be empty or all of C ("
                  << e.what() << ")\n";
        return 3;
      }
      throw;
    }
    return 0;
  }

  if (cmd_greens->parsed()) {
    const Problem p = load_problem(c_greens);
    std::ifstream in(f_path);
    if (!in) fail(ErrorKind::SpecError, "cannot open function spec: " + f_path);
    json jf;
    try {
      in >> jf;
    } catch (const json::exception& e) {
      fail(ErrorKind::SpecError, std::string("function spec is not valid JSON: ") + e.what());
    }
    const double r = graph::EdgeFunction::default_radius(p.g);
    const auto f = io::parse_edge_function(jf, p.g, samples, r);
    spectral::GreensKernel kern(p.bc, p.g, Complex(kval[0], kval[1]), p.tol);
    const auto u = spectral::greens_apply(kern, f);
    emit(c_greens, io::edge_function_csv(p.g, u));
    return 0;
  }

  if (cmd_enclosure->parsed()) {
    const Problem p = load_problem(c_enclosure);
    emit(c_enclosure, io::enclosure_to_json(spectral::enclosure(p.bc, p.g, p.tol)).dump(2));
    return 0;
  }

  if (cmd_witness->parsed()) {
    const Problem p = load_problem(c_witness);
    const auto cls = boundary::classify(p.bc, p.tol);
    std::vector<double> quotients;
    std::string mode;
    if (cls.tag == boundary::BCClass::RegularNonQuasiSectorial) {
      mode = "nqs_loglog";
      for (double kappa : kappas) {
        quotients.push_back(
            spectral::resolvent_witness_nqs(p.bc, p.g, kappa, witness_samples, p.tol).quotient);
      }
    } else if (cls.tag == boundary::BCClass::Irregular) {
      mode = "irregular_semilog";
      for (double kappa : kappas) {
        const auto w = spectral::resolvent_witness_irregular(
            p.bc, p.g, Complex(0.0, kappa), witness_samples, p.tol);
        if (w.everything_is_spectrum) {
          emit(c_witness, json{{"everything_is_spectrum", true}}.dump(2));
          return 0;
        }
        quotients.push_back(w.quotient);
      }
    } else {
      fail(ErrorKind::WrongClass,
           "witness applies to non-quasi-sectorial or irregular boundary conditions");
    }
    std::vector<double> xs, ys;
    for (size_t i = 0; i < kappas.size(); ++i) {
      if (mode == "nqs_loglog") {
        xs.push_back(std::log(kappas[i]));
        ys.push_back(std::log(quotients[i]));
      } else {
        xs.push_back(kappas[i]);
        ys.push_back(std::log(quotients[i] * kappas[i] * kappas[i]));
      }
    }
    const double slope = fit_slope(xs, ys);
    std::ostringstream csv;
    csv << "kappa,quotient,slope,mode\n";
    for (size_t i = 0; i < kappas.size(); ++i) {
      char buf[96];
      std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,", kappas[i], quotients[i], slope);
      csv << buf << mode << '\n';
    }
    emit(c_witness, csv.str());
    return 0;
  }

  if (cmd_similarity->parsed()) {
    const Problem p = load_problem(c_similarity);
    const auto v = classify::similarity_verdict_star(p.bc, p.g, p.tol);
    emit(c_similarity, io::similarity_to_json(v).dump(2));
    return 0;
  }

  if (cmd_evolve->parsed()) {
    const Problem p = load_problem(c_evolve);
    auto load_spec = [&](const std::string& path) {
      std::ifstream in(path);
      if (!in) fail(ErrorKind::SpecError, "cannot open spec: " + path);
      json j;
      try {
        in >> j;
      } catch (const json::exception& e) {
        fail(ErrorKind::SpecError, std::string("spec is not valid JSON: ") + e.what());
      }
      return j;
    };
    evolve::GridSpec grid{ev_samples, radius};
    evolve::DiscreteLaplacian dl(p.bc, p.g, grid);
    const auto psi0 = io::parse_edge_function(load_spec(psi0_path), p.g, ev_samples, radius);
    evolve::EvolutionResult res;
    if (equation == "heat") {
      res = evolve::step_heat(dl, psi0, dt, steps, snapshot_stride);
    } else if (equation == "schrodinger") {
      res = evolve::step_schrodinger(dl, psi0, dt, steps, snapshot_stride);
    } else if (equation == "wave") {
      graph::EdgeFunction v0(p.g, ev_samples, radius);
      if (!v0_path.empty()) v0 = io::parse_edge_function(load_spec(v0_path), p.g, ev_samples, radius);
      res = evolve::step_wave(dl, psi0, v0, dt, steps, snapshot_stride);
    } else {
      fail(ErrorKind::SpecError, "unknown equation: " + equation);
    }
    if (!snapshots_out.empty()) {
      std::ofstream snap(snapshots_out);
      if (!snap) fail(ErrorKind::SpecError, "cannot open snapshot file: " + snapshots_out);
      snap << io::snapshots_to_json(p.g, res).dump(2);
    }
    emit(c_evolve, io::norms_csv(res));
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const qgraph::Error& e) {
    std::cerr << qgraph::to_string(e.kind()) << ": " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  }
}

#include "qgraph/classify.hpp"

#include <cmath>

namespace qgraph::classify {

using boundary::BCClass;

GeneratorVerdict generator_verdict(const boundary::BoundaryConditions& bc, RankTolerance tol) {
  GeneratorVerdict out;
  out.bc_class = boundary::classify(bc, tol).tag;
  const bool generates = boundary::is_quasi_sectorial(out.bc_class);
  out.generates_c0_semigroup = generates;
  out.generates_analytic_semigroup = generates;
  out.generates_cosine_family = generates;
  return out;
}

const char* to_string(Obstruction o) {
  switch (o) {
    case Obstruction::None: return "None";
    case Obstruction::NotQuasiSectorial: return "NotQuasiSectorial";
    case Obstruction::EigenvalueInForbiddenRegion: return "EigenvalueInForbiddenRegion";
    case Obstruction::CyclicVectorOnHalfAxis: return "CyclicVectorOnHalfAxis";
  }
  return "Unknown";
}

SimilarityVerdict similarity_verdict_star(const boundary::BoundaryConditions& bc,
                                          const graph::MetricGraph& g, RankTolerance rtol,
                                          double tol) {
  if (g.n_internal() != 0) {
    fail(ErrorKind::NotAStarGraph,
         "similarity criterion applies to star graphs only (|I| = 0); geometry matters otherwise");
  }
  if (bc.d() != graph::deficiency_index(g)) fail(ErrorKind::ShapeError, "bc size != d");

  SimilarityVerdict out;
  const auto cls = boundary::classify(bc, rtol);
  if (!boundary::is_quasi_sectorial(cls.tag)) {
    out.obstruction = Obstruction::NotQuasiSectorial;
    return out;
  }
  const auto& qw = *cls.qw;
  for (const auto& ev : matrixcore::clustered_eigenvalues(qw.L)) {
    const Complex lambda = ev.mu;
    const bool on_halfaxis = std::abs(lambda.imag()) <= tol * (1.0 + std::abs(lambda)) &&
                             lambda.real() >= -tol;
    const bool open_left = lambda.real() < -tol * (1.0 + std::abs(lambda));
    if (on_halfaxis) {
      if (matrixcore::jordan_chain_length_clustered(qw.L, lambda, ev.multiplicity, rtol) > 1) {
        out.obstruction = Obstruction::CyclicVectorOnHalfAxis;
        out.witness_eigenvalue = lambda;
        return out;
      }
    } else if (!open_left) {
      // Fail closed on the boundary band: the forbidden region includes the
      // open imaginary axis and everything in {Re >= 0} off the half-axis.
      out.obstruction = Obstruction::EigenvalueInForbiddenRegion;
      out.witness_eigenvalue = lambda;
      return out;
    }
  }
  out.is_similar_to_selfadjoint = true;
  return out;
}

Report report(const boundary::BoundaryConditions& bc, const graph::MetricGraph& g,
              const ReportOptions& options) {
  Report rep;
  rep.d = bc.d();
  const auto cls = boundary::classify(bc, options.tol);
  rep.bc_class = cls.tag;
  if (cls.qw) {
    rep.qw_m = cls.qw->m;
    rep.qw_nilpotency_index = cls.qw->nilpotency_index;
  }
  try {
    rep.poles = boundary::cayley_poles(bc, options.tol);
  } catch (const Error& e) {
    rep.poles_error = e.what();
  }
  try {
    rep.generator = generator_verdict(bc, options.tol);
  } catch (const Error& e) {
    rep.generator_error = e.what();
  }
  if (g.n_internal() == 0) {
    try {
      rep.similarity = similarity_verdict_star(bc, g, options.tol);
    } catch (const Error& e) {
      rep.similarity_error = e.what();
    }
  } else {
    rep.similarity_error = "not applicable (|I| > 0): only spectral evidence is available";
  }
  try {
    rep.enclosure = spectral::enclosure(bc, g, options.tol);
  } catch (const Error& e) {
    rep.enclosure_error = e.what();
  }
  if (options.with_spectrum) {
    try {
      if (g.n_internal() == 0) {
        rep.spectrum = spectral::star_point_spectrum(bc, g, options.tol);
      } else {
        rep.spectrum = spectral::compact_spectrum(bc, g, options.region, options.tol);
      }
    } catch (const Error& e) {
      rep.spectrum_error = e.what();
    }
  }
  return rep;
}

}  // namespace qgraph::classify

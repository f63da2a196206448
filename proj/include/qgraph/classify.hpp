#pragma once

#include <optional>
#include <string>

#include "qgraph/boundary.hpp"
#include "qgraph/graph.hpp"
#include "qgraph/spectral.hpp"

namespace qgraph::classify {

/// Generation of C0-, analytic, and cosine semigroups is a single property:
/// all three hold exactly for quasi-sectorial boundary conditions, whatever
/// the graph geometry.
struct GeneratorVerdict {
  bool generates_c0_semigroup = false;
  bool generates_analytic_semigroup = false;
  bool generates_cosine_family = false;
  boundary::BCClass bc_class = boundary::BCClass::Irregular;
};

GeneratorVerdict generator_verdict(const boundary::BoundaryConditions& bc, RankTolerance tol = {});

enum class Obstruction {
  None,
  NotQuasiSectorial,
  EigenvalueInForbiddenRegion,
  CyclicVectorOnHalfAxis,
};

const char* to_string(Obstruction o);

struct SimilarityVerdict {
  bool is_similar_to_selfadjoint = false;
  Obstruction obstruction = Obstruction::None;
  std::optional<Complex> witness_eigenvalue;  // sigma(L) element behind the obstruction
};

/// Star-graph similarity criterion: quasi-sectorial, sigma(L) inside
/// {Re < 0} union [0, inf), and no Jordan chain above the half-axis.
/// Eigenvalues within `tol` of the closed forbidden region fail closed.
/// Refuses graphs with internal edges: the criterion is tied to the star
/// geometry and the same local conditions can lose similarity elsewhere.
SimilarityVerdict similarity_verdict_star(const boundary::BoundaryConditions& bc,
                                          const graph::MetricGraph& g, RankTolerance rtol = {},
                                          double tol = 1e-9);

struct ReportOptions {
  bool with_spectrum = false;
  spectral::Rectangle region{0.1, 10.0, -1.0, 1.0};
  RankTolerance tol{};
};

/// One aggregated document; sections that fail carry their diagnostic instead
/// of aborting the report.
struct Report {
  boundary::BCClass bc_class = boundary::BCClass::Irregular;
  Index d = 0;
  Index qw_m = 0;
  Index qw_nilpotency_index = 0;
  std::optional<boundary::CayleyPoleReport> poles;
  std::string poles_error;
  std::optional<GeneratorVerdict> generator;
  std::string generator_error;
  std::optional<SimilarityVerdict> similarity;  // star graphs only
  std::string similarity_error;                 // "not applicable (|I|>0)" on other graphs
  std::optional<spectral::EnclosureRegion> enclosure;
  std::string enclosure_error;
  std::optional<spectral::SpectralReport> spectrum;
  std::string spectrum_error;
};

Report report(const boundary::BoundaryConditions& bc, const graph::MetricGraph& g,
              const ReportOptions& options = {});

}  // namespace qgraph::classify

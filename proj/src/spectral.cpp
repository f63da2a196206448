#include "qgraph/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <deque>
#include <thread>

#include <Eigen/LU>
#include <Eigen/SVD>

namespace qgraph::spectral {

using boundary::BCClass;
using graph::EdgeFunction;
using graph::MetricGraph;

Complex upper_half_sqrt(Complex lambda) {
  Complex k = std::sqrt(lambda);
  if (k.imag() < 0.0) k = -k;
  return k;
}

namespace {

/// Worker count, capped by the QGRAPH_THREADS environment variable.
Index thread_cap() {
  Index n = static_cast<Index>(std::thread::hardware_concurrency());
  if (n <= 0) n = 1;
  if (const char* env = std::getenv("QGRAPH_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) n = std::min<Index>(n, static_cast<Index>(v));
  }
  return std::max<Index>(n, 1);
}

/// Evaluates f(j) for j in [0, n) on up to thread_cap() workers.  The caller
/// merges per-index results in a fixed order, so the outcome is deterministic.
template <typename F>
void parallel_for_indices(Index n, F&& f) {
  const Index workers = std::min(thread_cap(), n);
  if (workers <= 1) {
    for (Index j = 0; j < n; ++j) f(j);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(static_cast<size_t>(workers));
  pool.reserve(static_cast<size_t>(workers));
  for (Index w = 0; w < workers; ++w) {
    pool.emplace_back([&, w]() {
      try {
        for (Index j = w; j < n; j += workers) f(j);
      } catch (...) {
        errors[static_cast<size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (const auto& err : errors) {
    if (err) std::rethrow_exception(err);
  }
}

}  // namespace

CMatrix t_matrix(const MetricGraph& g, Complex k) {
  const Index d = graph::deficiency_index(g);
  const Index ne = g.n_external();
  const Index ni = g.n_internal();
  CMatrix t = CMatrix::Zero(d, d);
  for (Index i = 0; i < ni; ++i) {
    const Complex e = std::exp(iunit * k * g.internal_edges()[static_cast<size_t>(i)].length);
    t(ne + i, ne + ni + i) = e;
    t(ne + ni + i, ne + i) = e;
  }
  return t;
}

Complex secular(const boundary::BoundaryConditions& bc, const MetricGraph& g, Complex k) {
  if (g.n_internal() == 0) {
    fail(ErrorKind::InvalidArgument, "secular needs an internal edge; use star_point_spectrum");
  }
  if (bc.d() != graph::deficiency_index(g)) fail(ErrorKind::ShapeError, "bc size != d");
  const CMatrix s = boundary::cayley(bc, k);  // throws PoleOfCayley at poles
  const CMatrix m = CMatrix::Identity(bc.d(), bc.d()) - s * t_matrix(g, k);
  return Eigen::PartialPivLU<CMatrix>(m).determinant();
}

Complex secular_entire(const boundary::BoundaryConditions& bc, const MetricGraph& g, Complex k) {
  if (bc.d() != graph::deficiency_index(g)) fail(ErrorKind::ShapeError, "bc size != d");
  const CMatrix z = bc.A + iunit * k * bc.B + (bc.A - iunit * k * bc.B) * t_matrix(g, k);
  return Eigen::PartialPivLU<CMatrix>(z).determinant();
}

// ---------------------------------------------------------------------------
// Argument-principle machinery
// ---------------------------------------------------------------------------

namespace {

using HoloFn = std::function<Complex(Complex)>;

struct ContourZero {};  // thrown internally when the contour walks over a zero

/// Accumulated argument change of f along the segment [za, zb], with recursive
/// bisection until consecutive phase jumps stay below pi/2.
double arg_change(const HoloFn& f, Complex za, Complex zb, Complex fa, Complex fb, int depth,
                  double floor_abs) {
  const double d_arg = std::arg(fb / fa);
  if (std::abs(d_arg) < M_PI / 2.0) {
    if (depth > 6) return d_arg;  // already finely resolved
    // One extra probe guards against a full winding hiding inside the step.
    const Complex zm = 0.5 * (za + zb);
    const Complex fm = f(zm);
    if (!(std::abs(fm) > floor_abs)) throw ContourZero{};
    return arg_change(f, za, zm, fa, fm, depth + 1, floor_abs) +
           arg_change(f, zm, zb, fm, fb, depth + 1, floor_abs);
  }
  if (depth > 48) throw ContourZero{};
  const Complex zm = 0.5 * (za + zb);
  const Complex fm = f(zm);
  if (!(std::abs(fm) > floor_abs)) throw ContourZero{};
  return arg_change(f, za, zm, fa, fm, depth + 1, floor_abs) +
         arg_change(f, zm, zb, fm, fb, depth + 1, floor_abs);
}

/// Winding number of f around the rectangle boundary; throws ContourZero when
/// the walk runs into a vanishing sample.
double winding_raw(const HoloFn& f, const Rectangle& r, Index nodes_per_side, double floor_abs) {
  std::vector<Complex> pts;
  auto push_side = [&](Complex a, Complex b) {
    for (Index j = 0; j < nodes_per_side; ++j) {
      const double t = static_cast<double>(j) / static_cast<double>(nodes_per_side);
      pts.push_back(a + t * (b - a));
    }
  };
  const Complex c00(r.re_lo, r.im_lo), c10(r.re_hi, r.im_lo), c11(r.re_hi, r.im_hi),
      c01(r.re_lo, r.im_hi);
  push_side(c00, c10);
  push_side(c10, c11);
  push_side(c11, c01);
  push_side(c01, c00);
  pts.push_back(c00);

  std::vector<Complex> vals(pts.size());
  for (size_t j = 0; j < pts.size(); ++j) {
    vals[j] = f(pts[j]);
    if (!(std::abs(vals[j]) > floor_abs)) throw ContourZero{};
  }
  double total = 0.0;
  for (size_t j = 0; j + 1 < pts.size(); ++j) {
    total += arg_change(f, pts[j], pts[j + 1], vals[j], vals[j + 1], 0, floor_abs);
  }
  return total / (2.0 * M_PI);
}

/// Integer winding number; subdivision fractions are jittered when the
/// contour passes through (numerically) vanishing values.
Index winding_integer(const HoloFn& f, const Rectangle& r, Index nodes_per_side,
                      double floor_abs) {
  const double w = winding_raw(f, r, nodes_per_side, floor_abs);
  const double rounded = std::round(w);
  if (std::abs(w - rounded) > 1e-3) throw ContourZero{};  // indicator failed: resample/jitter
  return static_cast<Index>(rounded);
}

struct NewtonResult {
  Complex k;
  Complex value;
  bool converged = false;
};

NewtonResult newton_refine(const HoloFn& f, Complex k0, Index multiplicity, double scale,
                           double tol) {
  NewtonResult res;
  Complex k = k0;
  const double mult = static_cast<double>(std::max<Index>(multiplicity, 1));
  for (int it = 0; it < 80; ++it) {
    const Complex fk = f(k);
    const double h = 1e-7 * (1.0 + std::abs(k));
    const Complex fp = (f(k + h) - f(k - h)) / (2.0 * h);
    if (fp == Complex(0.0, 0.0)) break;
    const Complex step = mult * fk / fp;
    k -= step;
    if (std::abs(step) < tol * (1.0 + std::abs(k))) break;
  }
  res.k = k;
  res.value = f(k);
  res.converged = std::abs(res.value) <= 1e-7 * scale;
  return res;
}

const double kJitter[] = {0.5, 0.531, 0.469, 0.611, 0.389, 0.571};

}  // namespace

SpectralReport compact_spectrum(const boundary::BoundaryConditions& bc, const MetricGraph& g,
                                Rectangle region, RankTolerance tol, SearchOptions opts) {
  if (bc.d() != graph::deficiency_index(g)) fail(ErrorKind::ShapeError, "bc size != d");
  {
    const auto cls = boundary::classify(bc, tol);
    if (cls.tag == BCClass::RankDeficient || cls.tag == BCClass::Irregular) {
      fail(ErrorKind::IrregularPencil, "compact_spectrum needs regular boundary conditions");
    }
  }
  if (!(region.re_hi > region.re_lo) || !(region.im_hi > region.im_lo)) {
    fail(ErrorKind::InvalidArgument, "empty search region");
  }

  const HoloFn f = [&](Complex k) { return secular_entire(bc, g, k); };

  // Scale reference from the region boundary.
  double scale = 0.0;
  for (Index j = 0; j < 64; ++j) {
    const double t = static_cast<double>(j) / 64.0;
    scale = std::max(scale, std::abs(f({region.re_lo + t * (region.re_hi - region.re_lo),
                                        region.im_lo})));
    scale = std::max(scale, std::abs(f({region.re_lo + t * (region.re_hi - region.re_lo),
                                        region.im_hi})));
  }
  if (scale == 0.0) fail(ErrorKind::ContourThroughZero, "secular vanishes along the region edge");
  const double floor_abs = 1e-13 * scale;

  auto winding_of = [&](const Rectangle& r) {
    return winding_integer(f, r, opts.nodes_per_side, floor_abs);
  };

  Index total = -1;
  {
    Rectangle r = region;
    bool ok = false;
    for (double grow : {0.0, 1e-7, -1e-7, 3e-7}) {
      try {
        Rectangle rr = r;
        rr.re_lo -= grow * (1.0 + std::abs(rr.re_lo));
        rr.re_hi += grow * (1.0 + std::abs(rr.re_hi));
        rr.im_lo -= grow * (1.0 + std::abs(rr.im_lo));
        rr.im_hi += grow * (1.0 + std::abs(rr.im_hi));
        total = winding_of(rr);
        region = rr;
        ok = true;
        break;
      } catch (const ContourZero&) {
        continue;
      }
    }
    if (!ok) {
      fail(ErrorKind::ContourThroughZero,
           "secular function vanishes on the search contour; shift the region");
    }
  }

  SpectralReport report;
  report.search_region = region;
  report.essential_halfline = g.n_external() > 0;
  report.total_winding = total;

  struct Cell {
    Rectangle r;
    Index winding;
    Index depth;
  };
  std::deque<Cell> work;
  work.push_back({region, total, 0});
  std::vector<Eigenroot> roots;

  auto subdivide = [&](const Cell& cell) {
    // Jittered 2x2 split; retried fractions dodge zeros sitting on the cut.
    for (double fx : kJitter) {
      for (double fy : kJitter) {
        const double rm = cell.r.re_lo + fx * (cell.r.re_hi - cell.r.re_lo);
        const double im = cell.r.im_lo + fy * (cell.r.im_hi - cell.r.im_lo);
        Rectangle quads[4] = {
            {cell.r.re_lo, rm, cell.r.im_lo, im},
            {rm, cell.r.re_hi, cell.r.im_lo, im},
            {cell.r.re_lo, rm, im, cell.r.im_hi},
            {rm, cell.r.re_hi, im, cell.r.im_hi},
        };
        Index ws[4];
        bool all_ok = true;
        Index sum = 0;
        for (int q = 0; q < 4 && all_ok; ++q) {
          try {
            ws[q] = winding_of(quads[q]);
            sum += ws[q];
          } catch (const ContourZero&) {
            all_ok = false;
          }
        }
        if (!all_ok || sum != cell.winding) continue;
        for (int q = 0; q < 4; ++q) {
          if (ws[q] > 0) work.push_back({quads[q], ws[q], cell.depth + 1});
        }
        return true;
      }
    }
    return false;
  };

  while (!work.empty()) {
    const Cell cell = work.front();
    work.pop_front();
    if (cell.winding == 0) continue;
    const double diam = std::hypot(cell.r.re_hi - cell.r.re_lo, cell.r.im_hi - cell.r.im_lo);
    const Complex center(0.5 * (cell.r.re_lo + cell.r.re_hi),
                         0.5 * (cell.r.im_lo + cell.r.im_hi));
    const bool terminal =
        cell.winding == 1 || diam < 1e-6 * (1.0 + std::abs(center)) || cell.depth >= opts.max_depth;
    if (!terminal) {
      if (subdivide(cell)) continue;
      // fall through: treat as terminal when subdivision keeps hitting zeros
    }
    const NewtonResult nr = newton_refine(f, center, cell.winding, scale, opts.newton_tol);
    if (nr.converged && cell.r.contains(nr.k, 0.35 * diam + 1e-9)) {
      roots.push_back({nr.k, nr.k * nr.k, cell.winding});
    } else if (cell.depth < opts.max_depth && subdivide(cell)) {
      continue;
    } else {
      fail(ErrorKind::NoConvergence, "root refinement failed inside a terminal cell");
    }
  }

  // Merge duplicates across cell boundaries.
  std::sort(roots.begin(), roots.end(), [](const Eigenroot& a, const Eigenroot& b) {
    if (a.k.real() != b.k.real()) return a.k.real() < b.k.real();
    return a.k.imag() < b.k.imag();
  });
  std::vector<Eigenroot> merged;
  for (const auto& r : roots) {
    if (!merged.empty() &&
        std::abs(r.k - merged.back().k) <= opts.cluster_rel * (1.0 + std::abs(r.k))) {
      merged.back().multiplicity += r.multiplicity;
    } else {
      merged.push_back(r);
    }
  }
  // Verify each multiplicity by the winding of a small box around the root;
  // this also repairs the case of two cells polishing into the same zero.
  for (size_t j = 0; j < merged.size(); ++j) {
    double sep = std::numeric_limits<double>::infinity();
    if (j > 0) sep = std::min(sep, std::abs(merged[j].k - merged[j - 1].k));
    if (j + 1 < merged.size()) sep = std::min(sep, std::abs(merged[j + 1].k - merged[j].k));
    const double side = std::min(1e-5 * (1.0 + std::abs(merged[j].k)), 0.3 * sep);
    const Rectangle box{merged[j].k.real() - side, merged[j].k.real() + side,
                        merged[j].k.imag() - side, merged[j].k.imag() + side};
    try {
      merged[j].multiplicity = winding_of(box);
    } catch (const ContourZero&) {
      // keep the cell-winding multiplicity when the probe box is unusable
    }
  }
  Index count = 0;
  for (const auto& r : merged) count += r.multiplicity;
  if (count != total) {
    fail(ErrorKind::NoConvergence, "winding total disagrees with recovered multiplicities");
  }
  for (auto& r : merged) r.lambda = r.k * r.k;
  report.point_spectrum = std::move(merged);
  try {
    report.enclosure = enclosure(bc, g, tol);
  } catch (const Error&) {
    // enclosure is advisory inside a spectral report
  }
  return report;
}

SpectralReport star_point_spectrum(const boundary::BoundaryConditions& bc, const MetricGraph& g,
                                   RankTolerance tol) {
  if (g.n_internal() != 0) {
    fail(ErrorKind::NotAStarGraph, "star_point_spectrum needs a graph without internal edges");
  }
  if (bc.d() != graph::deficiency_index(g)) fail(ErrorKind::ShapeError, "bc size != d");
  const CMatrix gram = bc.A * bc.A.adjoint() + bc.B * bc.B.adjoint();
  if (matrixcore::numeric_rank(gram, tol) < bc.d()) {
    fail(ErrorKind::RankDeficient, "boundary conditions are not rank d");
  }
  SpectralReport report;
  report.essential_halfline = true;
  const auto pencil = matrixcore::pencil_eigenvalues(bc.A, bc.B, tol);
  if (pencil.singular) {
    report.everything_is_spectrum = true;
    return report;
  }
  for (const auto& root : pencil.finite) {
    // det(A + ikB) = 0 at mu = ik, i.e. k = -i mu; eigenvalue when Im k > 0.
    const Complex k = -iunit * root.mu;
    if (k.imag() > 1e-12 * (1.0 + std::abs(k))) {
      report.point_spectrum.push_back({k, k * k, root.multiplicity});
    }
  }
  std::sort(report.point_spectrum.begin(), report.point_spectrum.end(),
            [](const Eigenroot& a, const Eigenroot& b) {
              if (a.k.real() != b.k.real()) return a.k.real() < b.k.real();
              return a.k.imag() < b.k.imag();
            });
  try {
    report.enclosure = enclosure(bc, g, tol);
  } catch (const Error&) {
  }
  return report;
}

// ---------------------------------------------------------------------------
// Green's kernel
// ---------------------------------------------------------------------------

GreensKernel::GreensKernel(const boundary::BoundaryConditions& bc, const MetricGraph& g, Complex k,
                           RankTolerance tol)
    : g_(&g), k_(k) {
  if (bc.d() != graph::deficiency_index(g)) fail(ErrorKind::ShapeError, "bc size != d");
  if (k == Complex(0.0, 0.0)) fail(ErrorKind::ZeroK, "k = 0 is excluded");
  if (!(k.imag() > 0.0)) fail(ErrorKind::InvalidArgument, "Green's kernel needs Im k > 0");
  s_ = boundary::cayley(bc, k, tol);  // PoleOfCayley at poles
  const Index d = bc.d();
  const CMatrix m = CMatrix::Identity(d, d) - s_ * t_matrix(g, k);
  Eigen::JacobiSVD<CMatrix> svd(m);
  const auto& sv = svd.singularValues();
  if (sv(sv.size() - 1) <= 1e-12 * std::max(sv(0), 1.0)) {
    fail(ErrorKind::OnSpectrum, "1 - S T is singular: k^2 lies in the spectrum");
  }
  r1_ = Eigen::PartialPivLU<CMatrix>(m).solve(s_);
}

namespace {

/// Moments int_0^h tau^m exp(ik tau) dtau for m = 0, 1, 2.
void exp_moments(Complex k, double h, Complex mu[3]) {
  const Complex z = iunit * k * h;
  if (std::abs(z) < 0.5) {
    for (int m = 0; m < 3; ++m) {
      // int_0^1 s^m e^{zs} ds = sum_j z^j / (j! (m+j+1))
      Complex term(1.0, 0.0);
      Complex acc(0.0, 0.0);
      for (int j = 0; j < 22; ++j) {
        acc += term / static_cast<double>(m + j + 1);
        term *= z / static_cast<double>(j + 1);
      }
      mu[m] = acc * std::pow(h, m + 1);
    }
  } else {
    const Complex ez = std::exp(z);
    Complex e = (ez - 1.0) / z;  // E_0
    mu[0] = h * e;
    for (int m = 1; m < 3; ++m) {
      e = (ez - static_cast<double>(m) * e) / z;  // E_m = (e^z - m E_{m-1}) / z
      mu[m] = std::pow(h, m + 1) * e;
    }
  }
}

struct EdgeQuadrature {
  // P[i] = int_0^{x_i} e^{ik(x_i - y)} f(y) dy   (forward, stable)
  // Q[i] = int_{x_i}^{L} e^{ik(y - x_i)} f(y) dy (backward, stable)
  // total_plus  = int_0^L e^{iky} f(y) dy
  // total_minus = int_0^L e^{ik(L - y)} f(y) dy = Q[0] ... only for internal edges
  CVector P, Q;
  Complex total_plus{0.0, 0.0};
};

/// Product quadrature with exact exponential weights and piecewise-quadratic f.
EdgeQuadrature edge_quadrature(const CVector& fvals, double h, Complex k) {
  const Index n = fvals.size();
  if (n < 3) fail(ErrorKind::GridError, "quadrature needs >= 3 samples");
  Complex mu[3];
  exp_moments(k, h, mu);
  const Complex phase = std::exp(iunit * k * h);  // |phase| <= 1 for Im k >= 0

  // Quadratic coefficients per interval [x_i, x_{i+1}] in local coordinates.
  auto local_coeffs = [&](Index i, Complex c[3]) {
    if (i + 2 < n) {  // nodes i, i+1, i+2 at (0, h, 2h)
      c[0] = fvals(i);
      c[1] = (-3.0 * fvals(i) + 4.0 * fvals(i + 1) - fvals(i + 2)) / (2.0 * h);
      c[2] = (fvals(i) - 2.0 * fvals(i + 1) + fvals(i + 2)) / (2.0 * h * h);
    } else {  // last interval: nodes i-1, i, i+1 at (-h, 0, h)
      c[0] = fvals(i);
      c[1] = (fvals(i + 1) - fvals(i - 1)) / (2.0 * h);
      c[2] = (fvals(i + 1) - 2.0 * fvals(i) + fvals(i - 1)) / (2.0 * h * h);
    }
  };

  EdgeQuadrature out;
  out.P = CVector::Zero(n);
  out.Q = CVector::Zero(n);
  // I_minus(i) = int_0^h e^{ik tau} phi(tau) dtau,
  // I_plus(i)  = int_0^h e^{ik(h - tau)} phi(tau) dtau for phi on [x_i, x_{i+1}].
  CVector iminus(n - 1), iplus(n - 1);
  for (Index i = 0; i + 1 < n; ++i) {
    Complex c[3];
    local_coeffs(i, c);
    iminus(i) = c[0] * mu[0] + c[1] * mu[1] + c[2] * mu[2];
    const Complex a0 = c[0] + c[1] * h + c[2] * h * h;
    const Complex a1 = -(c[1] + 2.0 * c[2] * h);
    iplus(i) = a0 * mu[0] + a1 * mu[1] + c[2] * mu[2];
  }
  for (Index i = 1; i < n; ++i) out.P(i) = phase * out.P(i - 1) + iplus(i - 1);
  for (Index i = n - 2; i >= 0; --i) out.Q(i) = phase * out.Q(i + 1) + iminus(i);

  Complex acc(0.0, 0.0);
  Complex node_phase(1.0, 0.0);  // e^{ik x_i}, decaying
  for (Index i = 0; i + 1 < n; ++i) {
    acc += node_phase * iminus(i);
    node_phase *= phase;
  }
  out.total_plus = acc;
  return out;
}

struct SlotMap {
  Index ext_offset = 0;  // slot of external edge e: e
  Index minus_offset = 0;
  Index plus_offset = 0;
};

SlotMap slot_map(const MetricGraph& g) {
  SlotMap m;
  m.ext_offset = 0;
  m.minus_offset = g.n_external();
  m.plus_offset = g.n_external() + g.n_internal();
  return m;
}

EdgeFunction apply_kernel(const GreensKernel& kern, const EdgeFunction& f, bool transpose) {
  const MetricGraph& g = kern.graph();
  const Complex k = kern.k();
  const SlotMap sm = slot_map(g);
  const Index d = graph::deficiency_index(g);

  EdgeFunction u(g, f.samples(0), f.external_radius());
  std::vector<EdgeQuadrature> quad;
  quad.reserve(static_cast<size_t>(g.n_edges()));
  for (Index e = 0; e < g.n_edges(); ++e) {
    quad.push_back(edge_quadrature(f.values(e), f.spacing(e), k));
  }

  // Free part (i/2k) int e^{ik|x-y|} f(y) dy = (i/2k) (P(x) + Q(x)).
  const Complex pref = iunit / (2.0 * k);
  for (Index e = 0; e < g.n_edges(); ++e) {
    for (Index i = 0; i < u.samples(e); ++i) {
      u.values(e)(i) = pref * (quad[static_cast<size_t>(e)].P(i) + quad[static_cast<size_t>(e)].Q(i));
    }
  }

  // Boundary part (i/2k) Phi(x) R1 J with J = int Phi(y)^T f(y) dy.
  CVector j = CVector::Zero(d);
  for (Index e = 0; e < g.n_external(); ++e) {
    j(sm.ext_offset + e) = quad[static_cast<size_t>(e)].total_plus;
  }
  for (Index i = 0; i < g.n_internal(); ++i) {
    const Index e = g.n_external() + i;
    j(sm.minus_offset + i) = quad[static_cast<size_t>(e)].total_plus;
    // int_0^a e^{ik(a - y)} f(y) dy is the mirrored prefix at the far end.
    j(sm.plus_offset + i) = quad[static_cast<size_t>(e)].P(f.samples(e) - 1);
  }
  const CMatrix& r1 = kern.boundary_part();
  const CVector w = pref * (transpose ? CMatrix(r1.transpose()) * j : r1 * j);
  for (Index e = 0; e < g.n_external(); ++e) {
    Complex node_phase(1.0, 0.0);
    const Complex phase = std::exp(iunit * k * u.spacing(e));
    for (Index i = 0; i < u.samples(e); ++i) {
      u.values(e)(i) += node_phase * w(sm.ext_offset + e);
      node_phase *= phase;
    }
  }
  for (Index i = 0; i < g.n_internal(); ++i) {
    const Index e = g.n_external() + i;
    const Index n = u.samples(e);
    const Complex phase = std::exp(iunit * k * u.spacing(e));
    Complex fwd(1.0, 0.0);
    for (Index idx = 0; idx < n; ++idx) {
      // e^{ikx} w_minus + e^{ik(a-x)} w_plus; both factors decay.
      u.values(e)(idx) += fwd * w(sm.minus_offset + i);
      u.values(e)(n - 1 - idx) += fwd * w(sm.plus_offset + i);
      fwd *= phase;
    }
  }
  return u;
}

}  // namespace

EdgeFunction greens_apply(const GreensKernel& kern, const EdgeFunction& f) {
  return apply_kernel(kern, f, /*transpose=*/false);
}

EdgeFunction greens_apply_transpose(const GreensKernel& kern, const EdgeFunction& f) {
  return apply_kernel(kern, f, /*transpose=*/true);
}

// ---------------------------------------------------------------------------
// Enclosure
// ---------------------------------------------------------------------------

bool EnclosureRegion::contains(Complex lambda, double tol) const {
  const Complex k = upper_half_sqrt(lambda);
  const double slack = tol * (1.0 + std::abs(k));
  if (kind == Kind::Parabola) return k.imag() <= t_star + slack;
  return k.imag() <= std::max(cone_slope * std::abs(k.real()), t_star) + slack;
}

EnclosureRegion enclosure(const boundary::BoundaryConditions& bc, const MetricGraph& g,
                          RankTolerance tol) {
  const auto cls = boundary::classify(bc, tol);
  if (cls.tag == BCClass::RankDeficient || cls.tag == BCClass::Irregular) {
    fail(ErrorKind::IrregularPencil, "enclosure needs regular boundary conditions");
  }
  const auto poles = boundary::cayley_poles(bc, tol);
  const double a_min = g.a_min(1.0);

  auto norm_s = [&](Complex k) -> double {
    try {
      return matrixcore::operator_norm(boundary::cayley(bc, k, tol));
    } catch (const Error&) {
      return std::numeric_limits<double>::infinity();
    }
  };
  double pole_top = 0.0;
  for (const auto& p : poles.finite_poles) pole_top = std::max(pole_top, p.k.imag());
  const double lnorm = cls.qw && cls.qw->m > 0 ? cls.qw->L.norm() : 0.0;

  EnclosureRegion region;
  region.a_min = a_min;

  const bool qs = boundary::is_quasi_sectorial(cls.tag);
  const double t_top = pole_top + std::max({4.0 * (1.0 + lnorm), 10.0 / a_min, 5.0});
  const double re_max = std::max(4.0 * (1.0 + lnorm), 10.0 / a_min);
  const Index nt = 220, nr = 41;

  if (qs) {
    // sup ||S|| over a lattice away from poles, then the first threshold with
    // sup ||S|| e^{-t a_min} < 1/2.
    std::vector<double> tgrid(nt), sup_above(nt, 0.0);
    for (Index j = 0; j < nt; ++j) {
      tgrid[static_cast<size_t>(j)] = (t_top * static_cast<double>(j + 1)) / static_cast<double>(nt);
    }
    for (Index j = 0; j < nt; ++j) {
      const double im = tgrid[static_cast<size_t>(j)];
      double row = 0.0;
      for (Index r = 0; r < nr; ++r) {
        const double re = -re_max + 2.0 * re_max * static_cast<double>(r) / (nr - 1);
        const Complex k(re, im);
        bool near_pole = false;
        for (const auto& p : poles.finite_poles) {
          if (std::abs(k - p.k) < 0.05 * (1.0 + std::abs(p.k))) near_pole = true;
        }
        if (near_pole) continue;
        row = std::max(row, norm_s(k));
      }
      sup_above[static_cast<size_t>(j)] = row;
    }
    for (Index j = nt - 2; j >= 0; --j) {
      sup_above[static_cast<size_t>(j)] =
          std::max(sup_above[static_cast<size_t>(j)], sup_above[static_cast<size_t>(j + 1)]);
    }
    double t_star = t_top;
    for (Index j = 0; j < nt; ++j) {
      const double t = tgrid[static_cast<size_t>(j)];
      if (sup_above[static_cast<size_t>(j)] * std::exp(-t * a_min) < 0.5) {
        t_star = t;
        break;
      }
    }
    region.kind = EnclosureRegion::Kind::Parabola;
    region.t_star = t_star;
    region.c = 1.0 / (4.0 * t_star * t_star);
    region.C = t_star * t_star;
    return region;
  }

  // Non-quasi-sectorial: polynomial growth of order g0 on the cone Im k >= C0 |Re k|.
  const Index g0 = poles.growth_order_at_infinity;
  const double cone = 0.5;
  double beta = 0.0;
  for (Index j = 0; j < nt; ++j) {
    const double im = (t_top * static_cast<double>(j + 1)) / static_cast<double>(nt);
    for (Index r = 0; r < nr; ++r) {
      const double re_bound = im / cone;
      const double re = -re_bound + 2.0 * re_bound * static_cast<double>(r) / (nr - 1);
      const Complex k(re, im);
      bool near_pole = false;
      for (const auto& p : poles.finite_poles) {
        if (std::abs(k - p.k) < 0.05 * (1.0 + std::abs(p.k))) near_pole = true;
      }
      if (near_pole) continue;
      const double s = norm_s(k);
      if (std::isfinite(s)) {
        beta = std::max(beta, s / (1.0 + std::pow(std::abs(k), static_cast<double>(g0))));
      }
    }
  }
  const double kf = std::sqrt(1.0 + 1.0 / (cone * cone));
  double t_star = t_top;
  for (Index j = 0; j < 4000; ++j) {
    const double t = (static_cast<double>(j + 1) / 4000.0) * std::max(t_top, 40.0 / a_min);
    const double bound =
        beta * (1.0 + std::pow(t * kf, static_cast<double>(g0))) * std::exp(-t * a_min);
    if (bound < 0.5 && t >= pole_top) {
      t_star = t;
      break;
    }
  }
  region.kind = EnclosureRegion::Kind::Sector;
  region.t_star = t_star;
  region.cone_slope = cone;
  region.C = 2.0 * cone / (1.0 - cone * cone);
  region.c = (region.C + 1.0 / region.C) * t_star * t_star * 1.001;
  return region;
}

// ---------------------------------------------------------------------------
// Resolvent witnesses
// ---------------------------------------------------------------------------

namespace {

CMatrix h_matrix(const MetricGraph& g, double kappa) {
  const Index d = graph::deficiency_index(g);
  const SlotMap sm = slot_map(g);
  CMatrix h = CMatrix::Zero(d, d);
  for (Index e = 0; e < g.n_external(); ++e) h(e, e) = 1.0 / (2.0 * kappa);
  for (Index i = 0; i < g.n_internal(); ++i) {
    const double a = g.internal_edges()[static_cast<size_t>(i)].length;
    const double diag = (1.0 - std::exp(-2.0 * kappa * a)) / (2.0 * kappa);
    const double off = a * std::exp(-kappa * a);
    h(sm.minus_offset + i, sm.minus_offset + i) = diag;
    h(sm.plus_offset + i, sm.plus_offset + i) = diag;
    h(sm.minus_offset + i, sm.plus_offset + i) = off;
    h(sm.plus_offset + i, sm.minus_offset + i) = off;
  }
  return h;
}

EdgeFunction exponential_profile(const MetricGraph& g, const CVector& coeff, double kappa,
                                 Index samples, double radius) {
  const SlotMap sm = slot_map(g);
  return EdgeFunction::sample(g, samples, radius, [&](Index e, double x) -> Complex {
    if (g.edge_is_external(e)) return coeff(sm.ext_offset + e) * std::exp(-kappa * x);
    const Index i = e - g.n_external();
    const double a = g.internal_edges()[static_cast<size_t>(i)].length;
    return coeff(sm.minus_offset + i) * std::exp(-kappa * x) +
           coeff(sm.plus_offset + i) * std::exp(-kappa * (a - x));
  });
}

}  // namespace

NqsWitness resolvent_witness_nqs(const boundary::BoundaryConditions& bc, const MetricGraph& g,
                                 double kappa, Index samples_per_edge, RankTolerance tol) {
  const auto cls = boundary::classify(bc, tol);
  if (cls.tag != BCClass::RegularNonQuasiSectorial) {
    fail(ErrorKind::WrongClass, "witness needs regular non-quasi-sectorial boundary conditions");
  }
  if (!(kappa > 0.0)) fail(ErrorKind::InvalidArgument, "kappa must be positive");
  const auto& qw = *cls.qw;
  const Index d = bc.d();
  const Index nb = d - qw.m;

  // Cyclic vector: v in Ker N_B^2 with N_B v != 0.
  const CMatrix nb2 = qw.N_B * qw.N_B;
  const auto ker2 = matrixcore::kernel(nb2, tol);
  CVector vtil;
  double best = 0.0;
  for (Index j = 0; j < ker2.dim(); ++j) {
    const double len = (qw.N_B * ker2.basis().col(j)).norm();
    if (len > best) {
      best = len;
      vtil = ker2.basis().col(j);
    }
  }
  if (best <= 0.0) fail(ErrorKind::NoConvergence, "no cyclic vector found in N_B");

  CVector v = CVector::Zero(d);
  v.tail(nb) = vtil;
  CVector nv = CVector::Zero(d);
  nv.tail(nb) = qw.N_B * vtil;

  // Neumann-series validity: ||S(i kappa) T(i kappa)|| < 1.
  const Complex k = iunit * kappa;
  double st_norm = 0.0;
  try {
    st_norm = matrixcore::operator_norm(boundary::cayley(bc, k, tol) * t_matrix(g, k));
  } catch (const Error&) {
    fail(ErrorKind::KappaTooSmall, "i*kappa is a Cayley pole");
  }
  if (st_norm >= 1.0) fail(ErrorKind::KappaTooSmall, "Neumann series invalid at this kappa");

  const CMatrix h = h_matrix(g, kappa);
  const Eigen::PartialPivLU<CMatrix> hlu(h);
  NqsWitness out;
  out.kappa = kappa;
  out.alpha = hlu.solve(qw.G.partialPivLu().solve(v));
  out.beta = hlu.solve(CVector(qw.G.adjoint() * nv));

  const double radius = EdgeFunction::default_radius(g);
  const EdgeFunction psi_a = exponential_profile(g, out.alpha, kappa, samples_per_edge, radius);
  const EdgeFunction psi_b = exponential_profile(g, out.beta, kappa, samples_per_edge, radius);
  GreensKernel kern(bc, g, k, tol);
  const EdgeFunction u = greens_apply(kern, psi_a);
  out.quotient = std::abs(u.inner(psi_b)) / (psi_a.norm() * psi_b.norm());
  return out;
}

IrregularWitness resolvent_witness_irregular(const boundary::BoundaryConditions& bc,
                                             const MetricGraph& g, Complex k,
                                             Index samples_per_edge, RankTolerance tol) {
  const auto cls = boundary::classify(bc, tol);
  if (cls.tag != BCClass::Irregular) {
    fail(ErrorKind::WrongClass, "witness needs irregular boundary conditions");
  }
  IrregularWitness out;
  if (g.n_internal() == 0) {
    out.everything_is_spectrum = true;  // sigma(-Delta(A,B)) = C on star graphs
    return out;
  }
  if (!(k.imag() > 0.0)) fail(ErrorKind::InvalidArgument, "witness needs Im k > 0");

  CMatrix stacked(2 * bc.d(), bc.d());
  stacked.topRows(bc.d()) = bc.A;
  stacked.bottomRows(bc.d()) = bc.B;
  const auto common = matrixcore::kernel(stacked, tol);
  if (common.dim() == 0) {
    fail(ErrorKind::NoConvergence,
         "irregular pencil without common kernel vector: witness construction unavailable");
  }
  const CVector v = common.basis().col(0);
  const double a = g.a_min() / 2.0;
  const SlotMap sm = slot_map(g);

  auto bump = [&](double x) -> Complex {  // psi_a(x; k) on [0, a], zero beyond
    if (x > a) return 0.0;
    return (std::cos(k * (a - x)) - 1.0) / (k * k);
  };
  const double radius = EdgeFunction::default_radius(g);
  const EdgeFunction psi =
      EdgeFunction::sample(g, samples_per_edge, radius, [&](Index e, double x) -> Complex {
        if (g.edge_is_external(e)) return v(sm.ext_offset + e) * bump(x);
        const Index i = e - g.n_external();
        const double ai = g.internal_edges()[static_cast<size_t>(i)].length;
        return v(sm.minus_offset + i) * bump(x) + v(sm.plus_offset + i) * bump(ai - x);
      });
  // (-Delta - k^2) psi = phi with phi the indicator profile; ||phi|| = sqrt(a) ||v||.
  const double phi_norm = std::sqrt(a) * v.norm();
  out.quotient = psi.norm() / phi_norm;
  return out;
}

double resolvent_norm_estimate(const boundary::BoundaryConditions& bc, const MetricGraph& g,
                               double kappa, Index samples_per_edge, int iterations,
                               RankTolerance tol) {
  const Complex k = iunit * kappa;
  GreensKernel kern(bc, g, k, tol);
  const double radius = EdgeFunction::default_radius(g);
  EdgeFunction v = EdgeFunction::sample(g, samples_per_edge, radius, [&](Index e, double x) {
    // Deterministic, spectrally broad start vector.
    return Complex(std::sin(1.7 * x + static_cast<double>(e)) + 0.3, 0.1 * std::cos(2.3 * x));
  });
  double sigma = 0.0;
  auto adjoint_apply = [&](const EdgeFunction& f) {
    // R* g = conj(R^T conj(g)).
    EdgeFunction conj_f = f;
    for (Index e = 0; e < conj_f.n_edges(); ++e) {
      conj_f.values(e) = conj_f.values(e).conjugate();
    }
    EdgeFunction w = greens_apply_transpose(kern, conj_f);
    for (Index e = 0; e < w.n_edges(); ++e) w.values(e) = w.values(e).conjugate();
    return w;
  };
  for (int it = 0; it < iterations; ++it) {
    const double nv = v.norm();
    if (nv == 0.0) fail(ErrorKind::NoConvergence, "power iteration collapsed");
    v *= Complex(1.0 / nv, 0.0);
    v = adjoint_apply(greens_apply(kern, v));
    sigma = std::sqrt(v.norm());  // ||R* R v||^(1/2) with unit v
  }
  return sigma;
}

// ---------------------------------------------------------------------------
// Spectral projection
// ---------------------------------------------------------------------------

graph::EdgeFunction spectral_projection(const boundary::BoundaryConditions& bc,
                                        const MetricGraph& g, Contour contour,
                                        const EdgeFunction& f, double tol, RankTolerance rtol) {
  if (!(contour.radius > 0.0)) fail(ErrorKind::InvalidArgument, "contour radius must be positive");

  // Contour safety: estimate the distance from the contour to the nearest
  // secular zero through a local Newton quotient at the sampled minimum.
  {
    const Index ns = 512;
    std::vector<double> vals(static_cast<size_t>(ns));
    double fmax = 0.0;
    Index jmin = 0;
    for (Index j = 0; j < ns; ++j) {
      const double th = 2.0 * M_PI * (static_cast<double>(j) + 0.5) / static_cast<double>(ns);
      const Complex z = contour.center + contour.radius * std::exp(iunit * th);
      vals[static_cast<size_t>(j)] = std::abs(secular_entire(bc, g, upper_half_sqrt(z)));
      fmax = std::max(fmax, vals[static_cast<size_t>(j)]);
      if (vals[static_cast<size_t>(j)] < vals[static_cast<size_t>(jmin)]) jmin = j;
    }
    const double fmin = vals[static_cast<size_t>(jmin)];
    const double dz = 2.0 * M_PI * contour.radius / static_cast<double>(ns);
    const double slope =
        std::abs(vals[static_cast<size_t>((jmin + 1) % ns)] -
                 vals[static_cast<size_t>((jmin + ns - 1) % ns)]) /
        (2.0 * dz);
    const double dist_est = (slope > 0.0) ? fmin / slope : contour.radius;
    if (!(fmin > 1e-10 * fmax) || dist_est < 0.02 * contour.radius) {
      fail(ErrorKind::ContourTooClose, "contour passes too close to the spectrum");
    }
  }

  EdgeFunction prev(g, f.samples(0), f.external_radius());
  bool have_prev = false;
  const double fnorm = f.norm();
  for (Index n = 64; n <= 2048; n *= 2) {
    // Nodes are independent resolvent applications; QGRAPH_THREADS caps the
    // workers.  Chunked evaluation with an index-ordered reduction keeps the
    // result identical for every thread count while bounding memory.
    EdgeFunction acc(g, f.samples(0), f.external_radius());
    const Index chunk = 128;
    for (Index base = 0; base < n; base += chunk) {
      const Index count = std::min(chunk, n - base);
      std::vector<EdgeFunction> terms(static_cast<size_t>(count),
                                      EdgeFunction(g, f.samples(0), f.external_radius()));
      parallel_for_indices(count, [&](Index jj) {
        const Index j = base + jj;
        // Offset nodes keep every z strictly off the real axis, so Im k > 0.
        const double th = 2.0 * M_PI * (static_cast<double>(j) + 0.5) / static_cast<double>(n);
        const Complex z = contour.center + contour.radius * std::exp(iunit * th);
        const Complex kz = upper_half_sqrt(z);
        GreensKernel kern(bc, g, kz, rtol);
        EdgeFunction term = greens_apply(kern, f);
        // The kernel evaluates (-Delta - z)^{-1} = -(z + Delta)^{-1}; the Riesz
        // projector therefore carries a minus sign against the raw integral.
        term *= -contour.radius * std::exp(iunit * th) / static_cast<double>(n);
        terms[static_cast<size_t>(jj)] = std::move(term);
      });
      for (Index jj = 0; jj < count; ++jj) acc += terms[static_cast<size_t>(jj)];
    }
    if (have_prev) {
      EdgeFunction diff = acc;
      diff -= prev;
      if (diff.norm() <= tol * std::max(fnorm, 1e-30)) return acc;
    }
    prev = acc;
    have_prev = true;
  }
  fail(ErrorKind::NoConvergence, "contour quadrature did not reach the Cauchy criterion");
}

}  // namespace qgraph::spectral

#ifndef REDMAP_SWEEP_HPP
#define REDMAP_SWEEP_HPP

// Orbits, attractor detection, bifurcation diagrams and (alpha, beta)
// robustness maps.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include "redmap/equilibrium.hpp"
#include "redmap/errors.hpp"
#include "redmap/model.hpp"

namespace redmap {

struct Orbit {
  std::vector<double> samples;  ///< states after the transient
  double q0 = 0;
  std::size_t total_steps = 0;
  std::size_t transient = 0;
  double buffer = 0;
};

/// Iterates q_{n+1} = f(q_n) `total` times from q0 and keeps the states
/// q_{transient+1}, ..., q_total.
inline Orbit simulate_orbit(const DerivedModel& m, double q0, std::size_t total,
                            std::size_t transient) {
  if (!(q0 >= 0.0 && q0 <= m.buffer)) {
    throw DomainError("simulate_orbit: q0 must lie in [0,B], got " + std::to_string(q0));
  }
  if (transient >= total) throw DomainError("simulate_orbit: transient must be below total");
  Orbit o;
  o.q0 = q0;
  o.total_steps = total;
  o.transient = transient;
  o.buffer = m.buffer;
  o.samples.reserve(total - transient);
  double q = q0;
  for (std::size_t n = 1; n <= total; ++n) {
    q = map_f(q, m);
    if (n > transient) o.samples.push_back(q);
  }
  return o;
}

enum class AttractorKind { FixedPoint, Cycle, Aperiodic };

struct AttractorSummary {
  AttractorKind kind = AttractorKind::Aperiodic;
  int period = 0;               ///< 1 for FixedPoint, k for Cycle(k), 0 if aperiodic
  std::vector<double> points;   ///< sorted cycle values (limits if still converging)
  double spread = 0;            ///< max - min of the samples
  bool converging = false;      ///< detected by contraction rather than settled values
};

struct AttractorOptions {
  double relative_tolerance = 1e-6;  ///< clustering tolerance, fraction of B
  int max_period = 16;
  double max_contraction = 0.999;
  std::size_t min_phase_samples = 6;
  std::size_t min_samples = 50;
};

namespace detail {

inline AttractorSummary make_cycle(int k, std::vector<double> points, bool converging) {
  AttractorSummary s;
  s.kind = k == 1 ? AttractorKind::FixedPoint : AttractorKind::Cycle;
  s.period = k;
  std::sort(points.begin(), points.end());
  s.points = std::move(points);
  s.converging = converging;
  return s;
}

// Limit of a geometrically converging sequence, or empty if the increments do
// not shrink by at least `rho` per step.
inline std::optional<double> contraction_limit(const std::vector<double>& x, double rho,
                                               double tol) {
  if (x.size() < 3) return std::nullopt;
  double last_ratio = 0.0;
  for (std::size_t i = 2; i < x.size(); ++i) {
    const double d_prev = x[i - 1] - x[i - 2];
    const double d = x[i] - x[i - 1];
    if (std::fabs(d) <= tol && std::fabs(d_prev) <= tol) continue;
    if (std::fabs(d_prev) == 0.0) return std::nullopt;
    const double r = d / d_prev;
    if (!(std::fabs(r) <= rho)) return std::nullopt;
    last_ratio = r;
  }
  const double d_last = x.back() - x[x.size() - 2];
  return x.back() + d_last * last_ratio / (1.0 - last_ratio);
}

}  // namespace detail

/// Classifies the post-transient part of an orbit.
///
/// Samples are Cycle(k) (FixedPoint for k = 1) if they repeat with period
/// k <= 16 within 1e-6 B. Orbits still approaching a cycle at a geometric
/// rate (each phase contracting by at least 0.999 per period) get the same
/// label with `converging` set and the extrapolated limits as points.
inline AttractorSummary summarize_attractor(const Orbit& o, const AttractorOptions& opt = {}) {
  const auto& s = o.samples;
  if (s.size() < opt.min_samples) {
    throw PreconditionViolation("summarize_attractor needs at least " +
                                std::to_string(opt.min_samples) + " samples");
  }
  const double tol = opt.relative_tolerance * o.buffer;
  const auto [lo, hi] = std::minmax_element(s.begin(), s.end());
  const double spread = *hi - *lo;

  for (int k = 1; k <= opt.max_period && static_cast<std::size_t>(k) < s.size(); ++k) {
    bool periodic = true;
    for (std::size_t i = 0; i + k < s.size() && periodic; ++i) {
      periodic = std::fabs(s[i] - s[i + k]) <= tol;
    }
    if (periodic) {
      AttractorSummary out = detail::make_cycle(k, {s.end() - k, s.end()}, false);
      out.spread = spread;
      return out;
    }
  }

  for (int k = 1; k <= opt.max_period; ++k) {
    if (s.size() / k < opt.min_phase_samples) break;
    std::vector<double> limits;
    bool contracting = true;
    for (int phase = 0; phase < k && contracting; ++phase) {
      std::vector<double> sub;
      for (std::size_t i = phase; i < s.size(); i += k) sub.push_back(s[i]);
      const auto limit = detail::contraction_limit(sub, opt.max_contraction, tol);
      if (limit) {
        limits.push_back(*limit);
      } else {
        contracting = false;
      }
    }
    if (contracting) {
      AttractorSummary out = detail::make_cycle(k, std::move(limits), true);
      out.spread = spread;
      return out;
    }
  }

  AttractorSummary out;
  out.spread = spread;
  return out;
}

/// Long-form table. Missing values are std::monostate.
using Cell = std::variant<std::monostate, double, std::int64_t, std::string>;

struct SweepTable {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
};

namespace detail {

// Runs task(i) for i in [0, n) on up to `jobs` threads (0 = hardware
// concurrency) and returns the results in index order.
template <class Result, class Task>
std::vector<Result> parallel_map(std::size_t n, unsigned jobs, Task task) {
  std::vector<Result> results(n);
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  jobs = static_cast<unsigned>(std::min<std::size_t>(jobs, std::max<std::size_t>(n, 1)));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  auto worker = [&] {
    for (std::size_t i = next++; i < n && !failed; i = next++) {
      try {
        results[i] = task(i);
      } catch (...) {
        if (!failed.exchange(true)) failure = std::current_exception();
      }
    }
  };
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(jobs);
    for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  return results;
}

}  // namespace detail

enum class SweepAxis { A1, A2, W };

inline const char* to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::A1: return "A1";
    case SweepAxis::A2: return "A2";
    case SweepAxis::W: return "w";
  }
  return "?";
}

struct DiagramSpec {
  SweepAxis axis = SweepAxis::W;
  double lo = 0;
  double hi = 1;
  std::size_t grid = 2000;
  std::size_t total = 550;
  std::size_t transient = 500;
  std::optional<double> q0;  ///< default B/2
  unsigned jobs = 0;
};

/// Grid value i of an inclusive grid of n points on [lo, hi].
inline double diagram_value(const DiagramSpec& spec, std::size_t i) {
  if (spec.grid == 1) return spec.lo;
  if (i + 1 == spec.grid) return spec.hi;
  return spec.lo + (spec.hi - spec.lo) * static_cast<double>(i) / static_cast<double>(spec.grid - 1);
}

/// Model at one grid value of a diagram. A1 and A2 axes replace the derived
/// constant and keep the other one from `sys`.
inline DerivedModel diagram_model(const SystemParams& sys, const ControlParams& ctl, SweepAxis axis,
                                  double value) {
  switch (axis) {
    case SweepAxis::A1: {
      DerivedModel m = model_from_constants(value, sys.a2(), sys.buffer, ctl);
      m.system = sys;
      return m;
    }
    case SweepAxis::A2: {
      DerivedModel m = model_from_constants(sys.a1(ctl.p_max), value, sys.buffer, ctl);
      m.system = sys;
      return m;
    }
    case SweepAxis::W:
    default: {
      ControlParams c = ctl;
      c.w = value;
      return derive_model(sys, c);
    }
  }
}

/// Bifurcation diagram. Columns: <axis>, step, q, flag. Each valid grid
/// value contributes total - transient rows; an invalid one (parameter out of
/// range, A1 >= A2 + B, ...) contributes one row with empty step and q and
/// flag "invalid". Rows are ordered by grid value, then step.
inline SweepTable bifurcation_diagram(const SystemParams& sys, const ControlParams& ctl,
                                      const DiagramSpec& spec) {
  if (spec.grid == 0 || !(spec.lo <= spec.hi) || !std::isfinite(spec.lo) ||
      !std::isfinite(spec.hi) || (spec.grid > 1 && spec.lo == spec.hi)) {
    throw DomainError("bifurcation_diagram: empty parameter range");
  }
  if (spec.transient >= spec.total) {
    throw DomainError("bifurcation_diagram: transient must be below total");
  }
  sys.validate();
  const double q0 = spec.q0.value_or(0.5 * sys.buffer);

  using Rows = std::vector<std::vector<Cell>>;
  auto cell_rows = [&](std::size_t i) {
    const double value = diagram_value(spec, i);
    Rows rows;
    std::optional<DerivedModel> model;
    try {
      model = diagram_model(sys, ctl, spec.axis, value);
    } catch (const DomainError&) {
    } catch (const ConstraintViolation&) {
    } catch (const ConsistencyError&) {
    }
    if (!model) {
      rows.push_back({value, std::monostate{}, std::monostate{}, std::string("invalid")});
      return rows;
    }
    const Orbit o = simulate_orbit(*model, q0, spec.total, spec.transient);
    rows.reserve(o.samples.size());
    for (std::size_t k = 0; k < o.samples.size(); ++k) {
      rows.push_back({value, static_cast<std::int64_t>(spec.transient + 1 + k), o.samples[k],
                      std::string("ok")});
    }
    return rows;
  };

  const auto parts = detail::parallel_map<Rows>(spec.grid, spec.jobs, cell_rows);
  SweepTable table;
  table.columns = {to_string(spec.axis), "step", "q", "flag"};
  for (const auto& part : parts) {
    table.rows.insert(table.rows.end(), part.begin(), part.end());
  }
  return table;
}

enum class Observable { StationaryDropProb, WBif };

inline const char* to_string(Observable o) {
  return o == Observable::StationaryDropProb ? "pstar" : "wbif";
}

/// Bin width used to group an observable for presentation.
inline double bin_width(Observable o) { return o == Observable::StationaryDropProb ? 0.015 : 0.15; }

struct RobustnessSpec {
  double alpha_lo = 0.002;
  double alpha_hi = 1.5;
  double beta_lo = 0.002;
  double beta_hi = 1.5;
  std::size_t alpha_grid = 400;
  std::size_t beta_grid = 400;
  Observable observable = Observable::WBif;
  unsigned jobs = 0;
};

/// Grid point i of n cells starting at lo with spacing (hi - lo) / n.
inline double robustness_coordinate(double lo, double hi, std::size_t n, std::size_t i) {
  return lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n);
}

/// Index of the grid point nearest to x.
inline std::size_t robustness_index(double lo, double hi, std::size_t n, double x) {
  const double step = (hi - lo) / static_cast<double>(n);
  const double r = std::round((x - lo) / step);
  return static_cast<std::size_t>(std::clamp(r, 0.0, static_cast<double>(n - 1)));
}

/// Observable over the (alpha, beta) plane. Columns: alpha, beta, value, bin,
/// flag. The flag is "ok", "no_fixed_point" (value missing), "no_bifurcation"
/// (w_bif >= 1) or "invalid" (model not constructible or solver failure).
/// Rows are ordered by alpha, then beta.
inline SweepTable robustness_map(const SystemParams& sys, const ControlParams& ctl_base,
                                 const RobustnessSpec& spec) {
  if (!(spec.alpha_lo > 0.0 && spec.beta_lo > 0.0 && spec.alpha_lo < spec.alpha_hi &&
        spec.beta_lo < spec.beta_hi) ||
      spec.alpha_grid == 0 || spec.beta_grid == 0) {
    throw DomainError("robustness_map: shape ranges must be positive and non-empty");
  }
  sys.validate();
  const double width = bin_width(spec.observable);

  auto cell = [&](std::size_t index) {
    const std::size_t ia = index / spec.beta_grid;
    const std::size_t ib = index % spec.beta_grid;
    const double alpha = robustness_coordinate(spec.alpha_lo, spec.alpha_hi, spec.alpha_grid, ia);
    const double beta = robustness_coordinate(spec.beta_lo, spec.beta_hi, spec.beta_grid, ib);
    std::vector<Cell> row{alpha, beta, std::monostate{}, std::monostate{}, std::string("ok")};
    try {
      ControlParams ctl = ctl_base;
      ctl.shape = BetaShape(alpha, beta);
      const DerivedModel m = derive_model(sys, ctl);
      if (!m.has_fixed_point) {
        row[4] = std::string("no_fixed_point");
        return row;
      }
      double value;
      if (spec.observable == Observable::StationaryDropProb) {
        const Equilibrium eq = fixed_point(m);
        value = reg_inc_beta(eq.z_star, m.shape()) * ctl.p_max;
      } else {
        value = w_bifurcation(m).value;
        if (value >= 1.0) row[4] = std::string("no_bifurcation");
      }
      row[2] = value;
      row[3] = static_cast<std::int64_t>(std::floor(value / width));
    } catch (const std::exception&) {
      row[2] = std::monostate{};
      row[3] = std::monostate{};
      row[4] = std::string("invalid");
    }
    return row;
  };

  SweepTable table;
  table.columns = {"alpha", "beta", to_string(spec.observable), "bin", "flag"};
  table.rows = detail::parallel_map<std::vector<Cell>>(spec.alpha_grid * spec.beta_grid, spec.jobs, cell);
  return table;
}

}  // namespace redmap

#endif  // REDMAP_SWEEP_HPP

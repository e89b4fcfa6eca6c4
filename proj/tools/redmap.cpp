// Command-line front end: inspect, equilibrium, certify, sweep.
//
// Exit codes: 0 success (certify: globally stable), 1 internal error,
// 2 invalid input or A1 >= A2 + B, 3 no fixed point, 4 certify undecided,
// 5 certify not stable.

#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>

#include <CLI11.hpp>

#include "redmap/redmap.hpp"

namespace {

using namespace redmap;

constexpr int kExitInternal = 1;
constexpr int kExitInvalid = 2;
constexpr int kExitNoFixedPoint = 3;
constexpr int kExitUndecided = 4;
constexpr int kExitUnstable = 5;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CommonOptions {
  std::string params;
  std::string out;
  std::string format = "json";
  std::optional<double> alpha;
  std::optional<double> beta;
};

struct SweepOptions {
  std::string preset;
  std::string axis;
  std::string range;
  std::optional<std::size_t> grid;
  std::optional<std::size_t> total;
  std::optional<std::size_t> transient;
  std::optional<double> q0;
  std::string observable;
  unsigned jobs = 0;
};

io::Parameters load_parameters(const CommonOptions& opt) {
  if (opt.params.empty()) throw UsageError("--params is required");
  std::ifstream in(opt.params);
  if (!in) throw UsageError("cannot open params file '" + opt.params + "'");
  io::Parameters p = io::read_parameters(in);
  if (opt.alpha || opt.beta) {
    p.control.shape = BetaShape(opt.alpha.value_or(p.control.shape.alpha()),
                                opt.beta.value_or(p.control.shape.beta()));
  }
  return p;
}

// Runs `write` against the --out file or stdout.
template <class Writer>
void emit(const CommonOptions& opt, Writer write) {
  if (opt.out.empty()) {
    write(std::cout);
    std::cout.flush();
    return;
  }
  std::ofstream out(opt.out);
  if (!out) throw UsageError("cannot open output file '" + opt.out + "'");
  write(out);
}

void emit_report(const CommonOptions& opt, const io::Report& r) {
  emit(opt, [&](std::ostream& os) {
    if (opt.format == "csv") {
      io::write_report_csv(os, r);
    } else {
      io::write_report_json(os, r);
    }
  });
}

int cmd_inspect(const CommonOptions& opt) {
  const auto p = load_parameters(opt);
  emit_report(opt, io::model_report(derive_model(p.system, p.control)));
  return 0;
}

int cmd_equilibrium(const CommonOptions& opt, bool with_a1, bool with_a2) {
  const auto p = load_parameters(opt);
  const DerivedModel m = derive_model(p.system, p.control);
  const Equilibrium eq = fixed_point(m);
  io::Report r;
  r.add("q_star", eq.q_star);
  r.add("z_star", eq.z_star);
  r.add("f_prime_at_star", eq.f_prime_at_star);
  r.add("m", eq.m_slope);
  r.add("locally_stable", eq.locally_stable);
  r.add("residual", eq.residual);
  io::add_bifurcation(r, "w_bif", w_bifurcation(m));
  if (with_a1) {
    const BifurcationPoint bp = a1_bifurcation(m);
    io::add_bifurcation(r, "A1_bif", bp);
    r.add("N_bif", connections_for_a1(bp.value, p.system.tcp_constant, p.control.p_max));
  }
  if (with_a2) {
    const BifurcationPoint bp = a2_bifurcation(m);
    io::add_bifurcation(r, "A2_bif", bp);
    r.add("d_bif", rtt_for_a2(bp.value, p.system.packet_size, p.system.capacity));
  }
  emit_report(opt, r);
  return 0;
}

int cmd_certify(const CommonOptions& opt) {
  const auto p = load_parameters(opt);
  const StabilityCertificate cert = certify_global_stability(derive_model(p.system, p.control));
  emit(opt, [&](std::ostream& os) {
    if (opt.format == "csv") {
      io::write_certificate_csv(os, cert);
    } else {
      os << io::certificate_json(cert).dump(2) << "\n";
    }
  });
  switch (cert.globally_stable) {
    case Verdict::Yes: return 0;
    case Verdict::Undecided: return kExitUndecided;
    case Verdict::No: return kExitUnstable;
  }
  return kExitInternal;
}

std::pair<double, double> parse_range(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw UsageError("--range must be lo:hi, got '" + text + "'");
  try {
    std::size_t used_lo = 0;
    std::size_t used_hi = 0;
    const std::string lo_text = text.substr(0, colon);
    const std::string hi_text = text.substr(colon + 1);
    const double lo = std::stod(lo_text, &used_lo);
    const double hi = std::stod(hi_text, &used_hi);
    if (used_lo != lo_text.size() || used_hi != hi_text.size()) throw std::invalid_argument("");
    if (!(lo < hi)) throw UsageError("--range needs lo < hi, got '" + text + "'");
    return {lo, hi};
  } catch (const std::logic_error&) {
    throw UsageError("--range must be lo:hi, got '" + text + "'");
  }
}

SweepAxis parse_axis(const std::string& text) {
  if (text == "a1" || text == "A1") return SweepAxis::A1;
  if (text == "a2" || text == "A2") return SweepAxis::A2;
  if (text == "w" || text == "W") return SweepAxis::W;
  throw UsageError("--axis must be a1, a2 or w, got '" + text + "'");
}

Observable parse_observable(const std::string& text) {
  if (text == "pstar") return Observable::StationaryDropProb;
  if (text == "wbif") return Observable::WBif;
  throw UsageError("--observable must be pstar or wbif, got '" + text + "'");
}

// Preset whose diagram runs along `axis`; supplies the default range.
presets::SweepPreset default_diagram(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::A1: return presets::fig3();
    case SweepAxis::A2: return presets::fig4();
    case SweepAxis::W:
    default: return presets::fig5();
  }
}

int cmd_sweep(const CommonOptions& opt, const SweepOptions& so) {
  const Observable observable =
      so.observable.empty() ? Observable::WBif : parse_observable(so.observable);

  std::optional<presets::SweepPreset> preset;
  if (!so.preset.empty()) {
    preset = presets::by_name(so.preset, opt.alpha.value_or(1.0), opt.beta.value_or(1.0), observable);
    if (!preset) throw UsageError("unknown preset '" + so.preset + "'");
  } else if (so.axis.empty() && so.observable.empty()) {
    throw UsageError("sweep needs --preset, --axis or --observable");
  }

  SystemParams sys = preset ? preset->system : presets::reference_system();
  ControlParams ctl = preset ? preset->control : presets::reference_control();
  if (!opt.params.empty() || !preset) {
    const auto p = load_parameters(opt);
    sys = p.system;
    ctl = p.control;
  }

  const bool diagram = preset ? preset->diagram.has_value() : !so.axis.empty();
  SweepTable table;
  if (diagram) {
    DiagramSpec spec = preset && preset->diagram ? *preset->diagram : DiagramSpec{};
    if (!so.axis.empty()) {
      const SweepAxis axis = parse_axis(so.axis);
      if (!preset || axis != spec.axis) spec = *default_diagram(axis).diagram;
    }
    if (!so.range.empty()) std::tie(spec.lo, spec.hi) = parse_range(so.range);
    if (so.grid) spec.grid = *so.grid;
    if (so.total) spec.total = *so.total;
    if (so.transient) spec.transient = *so.transient;
    if (spec.grid == 0) throw UsageError("--grid must be positive");
    if (spec.transient >= spec.total) throw UsageError("--transient must be below --total");
    spec.q0 = so.q0;
    spec.jobs = so.jobs;
    table = bifurcation_diagram(sys, ctl, spec);
  } else {
    RobustnessSpec spec = preset && preset->robustness ? *preset->robustness : RobustnessSpec{};
    spec.observable = observable;
    if (!so.range.empty()) {
      const auto [lo, hi] = parse_range(so.range);
      if (!(lo > 0.0)) throw UsageError("--range for shape maps must be positive");
      spec.alpha_lo = spec.beta_lo = lo;
      spec.alpha_hi = spec.beta_hi = hi;
    }
    if (so.grid) spec.alpha_grid = spec.beta_grid = *so.grid;
    if (spec.alpha_grid == 0) throw UsageError("--grid must be positive");
    spec.jobs = so.jobs;
    table = robustness_map(sys, ctl, spec);
  }

  emit(opt, [&](std::ostream& os) {
    if (opt.format == "csv") {
      io::write_table_csv(os, table);
    } else {
      io::write_table_jsonl(os, table);
    }
  });
  return 0;
}

void add_common(CLI::App* app, CommonOptions& opt, const std::string& default_format) {
  opt.format = default_format;
  app->add_option("--params", opt.params, "Parameter file (JSON, 12 keys)");
  app->add_option("--out", opt.out, "Output file (default: stdout)");
  app->add_option("--format", opt.format, "Output format")
      ->check(CLI::IsMember({"csv", "json"}))
      ->capture_default_str();
  app->add_option("--alpha", opt.alpha, "Override alpha");
  app->add_option("--beta", opt.beta, "Override beta");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generalized RED map: inspection, equilibria, stability, sweeps"};
  app.require_subcommand(1);

  CommonOptions inspect_opt, equilibrium_opt, certify_opt, sweep_opt;
  SweepOptions sweep;
  bool with_a1 = false;
  bool with_a2 = false;

  auto* inspect = app.add_subcommand("inspect", "Derived constants and thresholds");
  add_common(inspect, inspect_opt, "json");

  auto* equilibrium = app.add_subcommand("equilibrium", "Fixed point and bifurcation points");
  add_common(equilibrium, equilibrium_opt, "json");
  equilibrium->add_flag("--a1-bif", with_a1, "Also solve the A1 bifurcation point");
  equilibrium->add_flag("--a2-bif", with_a2, "Also solve the A2 bifurcation point");

  auto* certify = app.add_subcommand("certify", "Global-stability certificate");
  add_common(certify, certify_opt, "json");

  auto* sweep_cmd = app.add_subcommand("sweep", "Bifurcation diagrams and robustness maps");
  add_common(sweep_cmd, sweep_opt, "csv");
  sweep_cmd->add_option("--preset", sweep.preset, "fig3, fig4, fig5 or fig6");
  sweep_cmd->add_option("--axis", sweep.axis, "Diagram axis: a1, a2 or w");
  sweep_cmd->add_option("--range", sweep.range, "Parameter range lo:hi");
  sweep_cmd->add_option("--grid", sweep.grid, "Grid points (per dimension for maps)");
  sweep_cmd->add_option("--total", sweep.total, "Orbit length");
  sweep_cmd->add_option("--transient", sweep.transient, "Discarded initial iterates");
  sweep_cmd->add_option("--q0", sweep.q0, "Initial state (default B/2)");
  sweep_cmd->add_option("--observable", sweep.observable, "Map observable: pstar or wbif");
  sweep_cmd->add_option("--jobs", sweep.jobs, "Worker threads (0: all cores)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInvalid;
  }

  try {
    if (*inspect) return cmd_inspect(inspect_opt);
    if (*equilibrium) return cmd_equilibrium(equilibrium_opt, with_a1, with_a2);
    if (*certify) return cmd_certify(certify_opt);
    if (*sweep_cmd) return cmd_sweep(sweep_opt, sweep);
  } catch (const ConstraintViolation& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const NoFixedPoint& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNoFixedPoint;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const NonConvergence& e) {
    std::cerr << "error: " << e.what() << "\n";
    if (!e.trace().empty()) std::cerr << e.trace();
    return kExitInternal;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitInternal;
}

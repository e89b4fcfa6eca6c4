#ifndef REDMAP_PRESETS_HPP
#define REDMAP_PRESETS_HPP

// Reference parameter sets and the sweep settings of the published figures.

#include <optional>
#include <string>

#include "redmap/betafn.hpp"
#include "redmap/model.hpp"
#include "redmap/sweep.hpp"

namespace redmap::presets {

inline constexpr double kTcpConstant = 1.2247;

/// University network: N=1850, C=321000 kB/s, d=0.012 s, M=1 kB, B=2000.
inline SystemParams reference_system() {
  return SystemParams{1850.0, kTcpConstant, 321000.0, 0.012, 1.0, 2000.0};
}

/// q_min=500, q_max=1500, w=0.15, p_max=1.
inline ControlParams reference_control(double alpha = 1.0, double beta = 1.0) {
  return ControlParams{1.0, 500.0, 1500.0, 0.15, BetaShape(alpha, beta)};
}

/// A sweep preset: system, controls, and either a diagram or a map spec.
struct SweepPreset {
  std::string name;
  SystemParams system;
  ControlParams control;
  std::optional<DiagramSpec> diagram;
  std::optional<RobustnessSpec> robustness;
};

/// A1 diagram on [0, 2500] with A2 = 3852, w = 0.15.
inline SweepPreset fig3(double alpha = 1.0, double beta = 1.0) {
  DiagramSpec d;
  d.axis = SweepAxis::A1;
  d.lo = 0.0;
  d.hi = 2500.0;
  return {"fig3", reference_system(), reference_control(alpha, beta), d, std::nullopt};
}

/// A2 diagram on [4000, 7000] with A1 from N=1850, K=1.2247, w = 0.15.
inline SweepPreset fig4(double alpha = 1.0, double beta = 1.0) {
  DiagramSpec d;
  d.axis = SweepAxis::A2;
  d.lo = 4000.0;
  d.hi = 7000.0;
  return {"fig4", reference_system(), reference_control(alpha, beta), d, std::nullopt};
}

/// w diagram on [0, 1].
inline SweepPreset fig5(double alpha = 1.0, double beta = 1.0) {
  DiagramSpec d;
  d.axis = SweepAxis::W;
  d.lo = 0.0;
  d.hi = 1.0;
  return {"fig5", reference_system(), reference_control(alpha, beta), d, std::nullopt};
}

/// (alpha, beta) map on [0.002, 1.5]^2, 400 x 400 cells.
inline SweepPreset fig6(Observable observable = Observable::WBif) {
  RobustnessSpec r;
  r.observable = observable;
  return {"fig6", reference_system(), reference_control(), std::nullopt, r};
}

inline std::optional<SweepPreset> by_name(const std::string& name, double alpha, double beta,
                                          Observable observable) {
  if (name == "fig3") return fig3(alpha, beta);
  if (name == "fig4") return fig4(alpha, beta);
  if (name == "fig5") return fig5(alpha, beta);
  if (name == "fig6") return fig6(observable);
  return std::nullopt;
}

}  // namespace redmap::presets

#endif  // REDMAP_PRESETS_HPP

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "pulsequad/detector_sim.hpp"
#include "pulsequad/quadrature_batch.hpp"

namespace pulsequad {

struct PulseWindow {
  std::size_t begin = 0;
  std::size_t length = 0;
};

/// One window of round(tau_p * fs) samples per period, centered on the peak at
/// t_first + k / f_rep (k >= 0). Windows that would leave the trace are dropped.
std::vector<PulseWindow> segment_pulses(const TraceBuffer& trace, double f_rep, double t_first, double tau_p);

/// Trapezoidal integral of a sampled voltage window, V s.
double integrate_pulse(std::span<const double> window, double sample_rate);

std::vector<double> integrate_windows(const TraceBuffer& trace, std::span<const PulseWindow> windows);

/// Contiguous full-period windows for a trace produced by the simulator.
std::vector<double> pulse_areas(const TraceBuffer& trace, const DetectorConfig& config);

struct CalibrationScale {
  double scale = 1.0;   ///< V s per quadrature unit
  double offset = 0.0;  ///< V s baseline per pulse
  std::size_t n_cal = 0;
  double created_at = 0.0;
};

/// Vacuum moment calibration: <X> = 0, Var(X) = 1/2. Throws CalibrationError.
CalibrationScale calibrate_vacuum(std::span<const double> areas, double created_at = 0.0);

/// X_k = (area_k - offset) / scale. `timestamps` and `phases` may be empty.
QuadratureBatch apply_calibration(std::span<const double> areas, const CalibrationScale& cal,
                                  std::span<const double> timestamps = {}, std::span<const double> phases = {});

}  // namespace pulsequad

#include "pulsequad/quad_extract.hpp"

#include <cmath>
#include <stdexcept>

#include "pulsequad/error.hpp"

namespace pulsequad {

std::vector<PulseWindow> segment_pulses(const TraceBuffer& trace, double f_rep, double t_first, double tau_p) {
  if (!(f_rep > 0.0) || !(tau_p > 0.0) || !(trace.sample_rate > 0.0))
    throw std::invalid_argument("segment_pulses: rates and tau_p must be > 0");
  if (tau_p > (1.0 + 1e-12) / f_rep) throw std::invalid_argument("segment_pulses: tau_p exceeds one period");

  const double fs = trace.sample_rate;
  const auto length = static_cast<std::size_t>(std::llround(tau_p * fs));
  std::vector<PulseWindow> windows;
  if (length == 0) return windows;
  const auto n = static_cast<long long>(trace.samples.size());
  const double first_center = (t_first - trace.t0) * fs;
  const double period = fs / f_rep;
  for (long long k = 0;; ++k) {
    const long long center = std::llround(first_center + static_cast<double>(k) * period);
    const long long begin = center - static_cast<long long>(length / 2);
    if (begin + static_cast<long long>(length) > n) break;
    if (begin >= 0) windows.push_back({static_cast<std::size_t>(begin), length});
  }
  return windows;
}

double integrate_pulse(std::span<const double> window, double sample_rate) {
  if (window.size() < 2) throw std::invalid_argument("integrate_pulse: window needs >= 2 samples");
  double sum = 0.5 * (window.front() + window.back());
  for (std::size_t i = 1; i + 1 < window.size(); ++i) sum += window[i];
  return sum / sample_rate;
}

std::vector<double> integrate_windows(const TraceBuffer& trace, std::span<const PulseWindow> windows) {
  std::vector<double> areas;
  areas.reserve(windows.size());
  const std::span<const double> samples(trace.samples);
  for (const auto& w : windows) areas.push_back(integrate_pulse(samples.subspan(w.begin, w.length), trace.sample_rate));
  return areas;
}

std::vector<double> pulse_areas(const TraceBuffer& trace, const DetectorConfig& config) {
  const auto windows = segment_pulses(trace, config.f_rep, 0.0, 1.0 / config.f_rep);
  return integrate_windows(trace, windows);
}

CalibrationScale calibrate_vacuum(std::span<const double> areas, double created_at) {
  if (areas.size() < 2) throw CalibrationError("calibrate_vacuum: need at least 2 areas");
  const double n = static_cast<double>(areas.size());
  double mean = 0.0;
  for (double a : areas) mean += a;
  mean /= n;
  double ss = 0.0;
  for (double a : areas) ss += (a - mean) * (a - mean);
  const double var = ss / (n - 1.0);
  if (!(var > 0.0) || !std::isfinite(var)) throw CalibrationError("calibrate_vacuum: zero-variance vacuum record");
  return CalibrationScale{std::sqrt(var / 0.5), mean, areas.size(), created_at};
}

QuadratureBatch apply_calibration(std::span<const double> areas, const CalibrationScale& cal,
                                  std::span<const double> timestamps, std::span<const double> phases) {
  if (!(cal.scale > 0.0)) throw std::invalid_argument("apply_calibration: scale must be > 0");
  QuadratureBatch batch;
  batch.values.reserve(areas.size());
  for (double a : areas) batch.values.push_back((a - cal.offset) / cal.scale);
  batch.timestamps.assign(timestamps.begin(), timestamps.end());
  if (!phases.empty()) batch.phases.emplace(phases.begin(), phases.end());
  batch.validate();
  return batch;
}

}  // namespace pulsequad

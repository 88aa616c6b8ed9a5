#pragma once

// Pulsed balanced homodyne detector output synthesis.
//
// Trace layout: pulse k peaks at t_k = k / f_rep. The trace starts half a
// period (in whole samples) before the first peak, so every pulse owns the
// contiguous window of samples_per_period() samples centered on its peak.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "pulsequad/quadrature_batch.hpp"
#include "pulsequad/tomo.hpp"

namespace pulsequad {

namespace constants {
inline constexpr double elementary_charge = 1.602176634e-19;  // C
inline constexpr double planck = 6.62607015e-34;              // J s
inline constexpr double speed_of_light = 299792458.0;         // m / s
}  // namespace constants

enum class PulseShape {
  /// Flat top with raised-cosine edges; edge duration = edge_fraction * FWHM.
  flat_top,
  gaussian,
};

struct DriftModel {
  double linear_rate = 3.95e-5;    ///< quadrature units per second
  double random_walk_sigma = 0.0;  ///< per-pulse increment std, quadrature units
};

struct DetectorConfig {
  double f_rep = 80e6;
  double wavelength = 830e-9;
  double p_lo = 5e-3;  ///< 0 means the LO is blocked
  double eta_pd = 0.90;
  double gain = 36e3;
  double fwhm_pulse = 5.5e-9;
  PulseShape pulse_shape = PulseShape::flat_top;
  double edge_fraction = 0.36;
  double sample_rate = 2e9;
  double elec_noise_area_var = 0.0;  ///< (V s)^2 per integrated pulse
  double cmrr_db = 63.0;
  DriftModel drift;

  /// Reference operating point; electronic noise set for a 14.5 dB shot-to-electronic ratio.
  static DetectorConfig defaults();

  /// Throws ConfigError when an invariant is violated.
  void validate() const;
  std::size_t samples_per_period() const;
};

struct TraceBuffer {
  double sample_rate = 0.0;
  double t0 = 0.0;
  std::vector<double> samples;

  double time_at(std::size_t i) const { return t0 + static_cast<double>(i) / sample_rate; }
};

struct GroundTruth {
  std::vector<double> quadratures;
  std::vector<double> baseline_areas;  ///< V s, drift plus common-mode leakage
};

struct SimulatedTrace {
  TraceBuffer trace;
  GroundTruth truth;
};

/// Mean LO photon number per pulse, |alpha_LO|^2.
double photons_per_pulse(double p_lo, double wavelength, double f_rep);
/// sqrt(2) eta e G |alpha_LO|: integrated area per quadrature unit, V s.
double area_scale(const DetectorConfig& config);
/// Electronic-noise area variance giving `snr_db` against vacuum shot noise at this config.
double elec_noise_for_snr(const DetectorConfig& config, double snr_db);
/// Area of one unbalanced single-diode pulse (half the LO on one diode), V s.
double single_diode_area(const DetectorConfig& config);
/// Constant per-pulse area left over from imperfect common-mode rejection, V s.
double cmrr_leakage_area(const DetectorConfig& config);
/// Per-sample std of the white electronic noise, V.
double elec_noise_sample_sigma(const DetectorConfig& config);

/// Sampled pulse shape over one period window, normalized to unit trapezoidal area.
std::vector<double> pulse_kernel(const DetectorConfig& config);

SimulatedTrace generate_trace(const DetectorConfig& config, const StateModel& state, const PhaseSchedule& phases,
                              std::size_t n_pulses, std::uint64_t seed, int cutoff = 10);

/// Balanced vacuum trace (most common use).
SimulatedTrace generate_vacuum_trace(const DetectorConfig& config, std::size_t n_pulses, std::uint64_t seed);

/// One photodiode blocked: unsubtracted photocurrent pulses plus electronic noise.
TraceBuffer single_diode_trace(const DetectorConfig& config, std::size_t n_pulses, std::uint64_t seed);

}  // namespace pulsequad

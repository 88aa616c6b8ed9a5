#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "pulsequad/detector_sim.hpp"
#include "pulsequad/quadrature_batch.hpp"

namespace pulsequad {

// --- Noise variance vs LO power -------------------------------------------

struct NoiseCurve {
  std::vector<std::pair<double, double>> points;  ///< (p_lo W, area variance (V s)^2)
  double fit_slope = 0.0;
  double fit_intercept = 0.0;
  double r_squared = 0.0;
};

/// Ordinary least squares through (power, variance); needs >= 3 distinct powers.
NoiseCurve variance_vs_power(std::vector<std::pair<double, double>> points);

double sample_variance(std::span<const double> values);

struct SnrEstimate {
  double snr_db = 0.0;
  double eta_en = 0.0;
};

/// snr = 10 log10(total / electronic), eta_en = 1 - electronic / total.
SnrEstimate snr_and_efficiency(double var_total, double var_elec);
double overall_efficiency(double eta_en, double eta_pd);

// --- Pulse-to-pulse correlation --------------------------------------------

struct CorrelationEstimate {
  double value = 0.0;
  double std_estimate = 0.0;  ///< 1 / sqrt(N - m)
};

CorrelationEstimate correlation_coefficient(std::span<const double> values, std::size_t lag);
inline CorrelationEstimate correlation_coefficient(const QuadratureBatch& batch, std::size_t lag) {
  return correlation_coefficient(batch.values, lag);
}

// --- Allan deviation -------------------------------------------------------

struct AllanCurve {
  std::vector<double> taus;
  std::vector<double> deviations;
  std::vector<std::size_t> n_pairs;
  std::vector<double> stds;  ///< only set by averaged_allan
};

/// Non-overlapping adjacent-block Allan deviation of samples taken at rate f_rep.
/// Block length floor(f_rep tau); reported taus are the realized block durations.
AllanCurve allan_deviation(std::span<const double> values, double f_rep, std::span<const double> taus);
inline AllanCurve allan_deviation(const QuadratureBatch& batch, double f_rep, std::span<const double> taus) {
  return allan_deviation(batch.values, f_rep, taus);
}

/// Same estimator over pre-averaged blocks of equal duration `block_duration`;
/// exact for taus that are whole multiples of the block.
AllanCurve allan_deviation_blocks(std::span<const double> block_means, double block_duration,
                                  std::span<const double> taus);

/// 20 points per decade between lo and hi.
std::vector<double> log_tau_grid(double lo, double hi, int per_decade = 20);

/// Tau at the global minimum; ties go to the larger tau.
double find_stability_interval(const AllanCurve& curve);

/// Pointwise mean and sample standard deviation over curves sharing one tau grid.
AllanCurve averaged_allan(std::span<const AllanCurve> curves);

// --- Spectra ---------------------------------------------------------------

struct SpectrumEstimate {
  std::vector<double> freqs;
  std::vector<double> psd;  ///< one-sided, V^2 / Hz
  double resolution_hz = 0.0;
};

/// Averaged periodogram over non-overlapping, mean-removed, rectangular-window
/// segments of `segment_len` (a power of two) samples.
SpectrumEstimate noise_spectrum(const TraceBuffer& trace, std::size_t segment_len);

/// Subtracts the average pulse-synchronous waveform (period `samples_per_period`),
/// leaving only the fluctuating part of the trace.
TraceBuffer remove_periodic_mean(const TraceBuffer& trace, std::size_t samples_per_period);

/// First frequency where (shot - elec) falls 3 dB below its plateau (mean of bins 1..10).
double bandwidth_minus3db(const SpectrumEstimate& shot, const SpectrumEstimate& elec);

/// 10 log10(blocked / balanced) at the bin nearest f_rep.
double cmrr_db(const SpectrumEstimate& balanced, const SpectrumEstimate& blocked, double f_rep);

double time_bandwidth_product(double bandwidth_hz, double stability_interval_s);

// --- Report ----------------------------------------------------------------

struct CcPoint {
  std::size_t m = 0;
  double value = 0.0;
  double std = 0.0;           ///< spread across repeated batches when >= 20 exist, else 1/sqrt(N - m)
  double std_analytic = 0.0;  ///< 1/sqrt(N - m)
};

struct DetectorReport {
  std::optional<double> snr_db;  ///< empty when no electronic noise was observed
  double eta_en = 0.0;
  double eta_pd = 0.0;
  double eta_bhd = 0.0;
  double bandwidth_hz = 0.0;
  std::vector<CcPoint> cc;
  double cmrr_db = 0.0;
  double stability_interval_s = 0.0;
  double tbp = 0.0;

  /// Throws std::logic_error if eta values leave [0, 1] or tbp != bandwidth * interval.
  void check() const;
};

}  // namespace pulsequad

#include "pulsequad/characterize.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <mutex>
#include <stdexcept>

#include <fftw3.h>

namespace pulsequad {

namespace {

// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v))
      comp_ += (sum_ - t) + v;
    else
      comp_ += (v - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

// Allan deviation over `count` equal blocks of length `block` in `values`, using
// adjacent-block differences summed element-wise.
std::pair<double, std::size_t> allan_from_blocks(std::span<const double> values, std::size_t block) {
  const std::size_t count = values.size() / block;
  CompensatedSum sq;
  for (std::size_t i = 0; i + 1 < count; ++i) {
    CompensatedSum diff;
    const double* a = values.data() + i * block;
    const double* b = a + block;
    for (std::size_t j = 0; j < block; ++j) diff.add(b[j] - a[j]);
    const double d = diff.value() / static_cast<double>(block);
    sq.add(d * d);
  }
  const std::size_t pairs = count - 1;
  return {std::sqrt(0.5 * sq.value() / static_cast<double>(pairs)), pairs};
}

bool same_grid(const SpectrumEstimate& a, const SpectrumEstimate& b) {
  if (a.freqs.size() != b.freqs.size() || a.psd.size() != a.freqs.size() || b.psd.size() != b.freqs.size())
    return false;
  for (std::size_t i = 0; i < a.freqs.size(); ++i)
    if (std::abs(a.freqs[i] - b.freqs[i]) > 1e-9 * std::max(1.0, std::abs(a.freqs[i]))) return false;
  return true;
}

std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwPlanDeleter {
  void operator()(fftw_plan_s* p) const {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(p);
  }
};
struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

}  // namespace

// ---------------------------------------------------------------------------

NoiseCurve variance_vs_power(std::vector<std::pair<double, double>> points) {
  std::vector<double> powers;
  for (const auto& [p, v] : points) {
    if (!std::isfinite(p) || !std::isfinite(v)) throw std::invalid_argument("variance_vs_power: non-finite point");
    powers.push_back(p);
  }
  std::sort(powers.begin(), powers.end());
  if (std::unique(powers.begin(), powers.end()) - powers.begin() < 3)
    throw std::invalid_argument("variance_vs_power: need at least 3 distinct powers");

  const double n = static_cast<double>(points.size());
  double mx = 0.0, my = 0.0;
  for (const auto& [p, v] : points) {
    mx += p;
    my += v;
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const auto& [p, v] : points) {
    sxx += (p - mx) * (p - mx);
    sxy += (p - mx) * (v - my);
    syy += (v - my) * (v - my);
  }
  NoiseCurve c;
  c.points = std::move(points);
  c.fit_slope = sxy / sxx;
  c.fit_intercept = my - c.fit_slope * mx;
  double ss_res = 0.0;
  for (const auto& [p, v] : c.points) {
    const double r = v - (c.fit_intercept + c.fit_slope * p);
    ss_res += r * r;
  }
  c.r_squared = syy > 0.0 ? std::clamp(1.0 - ss_res / syy, 0.0, 1.0) : 1.0;
  return c;
}

double sample_variance(std::span<const double> values) {
  if (values.size() < 2) throw std::invalid_argument("sample_variance: need at least 2 values");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return ss / static_cast<double>(values.size() - 1);
}

SnrEstimate snr_and_efficiency(double var_total, double var_elec) {
  if (!(var_elec > 0.0) || !(var_total > var_elec) || !std::isfinite(var_total))
    throw std::invalid_argument("snr_and_efficiency: need var_total > var_elec > 0");
  return SnrEstimate{10.0 * std::log10(var_total / var_elec), 1.0 - var_elec / var_total};
}

double overall_efficiency(double eta_en, double eta_pd) {
  if (!(eta_en >= 0.0 && eta_en <= 1.0) || !(eta_pd >= 0.0 && eta_pd <= 1.0))
    throw std::invalid_argument("overall_efficiency: efficiencies must lie in [0, 1]");
  return eta_en * eta_pd;
}

CorrelationEstimate correlation_coefficient(std::span<const double> values, std::size_t lag) {
  if (lag >= values.size()) throw std::invalid_argument("correlation_coefficient: lag must be < batch length");
  const std::size_t n = values.size() - lag;
  if (n < 2) throw std::invalid_argument("correlation_coefficient: need at least 2 pairs");
  const auto a = values.subspan(0, n);
  const auto b = values.subspan(lag, n);
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    cov += (a[i] - ma) * (b[i] - mb);
    va += (a[i] - ma) * (a[i] - ma);
    vb += (b[i] - mb) * (b[i] - mb);
  }
  if (!(va > 0.0) || !(vb > 0.0)) throw std::invalid_argument("correlation_coefficient: degenerate batch");
  return CorrelationEstimate{std::clamp(cov / std::sqrt(va * vb), -1.0, 1.0), 1.0 / std::sqrt(static_cast<double>(n))};
}

// ---------------------------------------------------------------------------

AllanCurve allan_deviation(std::span<const double> values, double f_rep, std::span<const double> taus) {
  if (!(f_rep > 0.0)) throw std::invalid_argument("allan_deviation: f_rep must be > 0");
  std::vector<double> sorted(taus.begin(), taus.end());
  std::sort(sorted.begin(), sorted.end());
  AllanCurve curve;
  std::size_t last_block = 0;
  for (double tau : sorted) {
    const auto block = static_cast<std::size_t>(std::floor(f_rep * tau * (1.0 + 1e-12)));
    if (block == 0) throw std::invalid_argument("allan_deviation: tau shorter than one sample");
    if (block == last_block) continue;
    if (values.size() / block < 2) throw std::invalid_argument("allan_deviation: tau too large for the record");
    const auto [dev, pairs] = allan_from_blocks(values, block);
    curve.taus.push_back(static_cast<double>(block) / f_rep);
    curve.deviations.push_back(dev);
    curve.n_pairs.push_back(pairs);
    last_block = block;
  }
  return curve;
}

AllanCurve allan_deviation_blocks(std::span<const double> block_means, double block_duration,
                                  std::span<const double> taus) {
  if (!(block_duration > 0.0)) throw std::invalid_argument("allan_deviation_blocks: block duration must be > 0");
  std::vector<double> sorted(taus.begin(), taus.end());
  std::sort(sorted.begin(), sorted.end());
  AllanCurve curve;
  std::size_t last = 0;
  for (double tau : sorted) {
    const auto blocks = static_cast<std::size_t>(std::llround(tau / block_duration));
    if (blocks == 0) throw std::invalid_argument("allan_deviation_blocks: tau shorter than one block");
    if (blocks == last) continue;
    if (block_means.size() / blocks < 2) throw std::invalid_argument("allan_deviation_blocks: tau too large for the record");
    const auto [dev, pairs] = allan_from_blocks(block_means, blocks);
    curve.taus.push_back(static_cast<double>(blocks) * block_duration);
    curve.deviations.push_back(dev);
    curve.n_pairs.push_back(pairs);
    last = blocks;
  }
  return curve;
}

std::vector<double> log_tau_grid(double lo, double hi, int per_decade) {
  if (!(lo > 0.0) || !(hi >= lo) || per_decade < 1) throw std::invalid_argument("log_tau_grid: need 0 < lo <= hi");
  std::vector<double> grid;
  const double start = std::log10(lo);
  for (int i = 0;; ++i) {
    const double tau = std::pow(10.0, start + static_cast<double>(i) / per_decade);
    if (tau > hi * (1.0 + 1e-12)) break;
    grid.push_back(tau);
  }
  return grid;
}

double find_stability_interval(const AllanCurve& curve) {
  if (curve.taus.empty()) throw std::invalid_argument("find_stability_interval: empty curve");
  if (curve.taus.size() < 3) throw std::invalid_argument("find_stability_interval: need at least 3 points");
  std::size_t best = 0;
  for (std::size_t i = 1; i < curve.deviations.size(); ++i)
    if (curve.deviations[i] <= curve.deviations[best]) best = i;
  return curve.taus[best];
}

AllanCurve averaged_allan(std::span<const AllanCurve> curves) {
  if (curves.empty()) throw std::invalid_argument("averaged_allan: no curves");
  const auto& ref = curves.front();
  for (const auto& c : curves) {
    if (c.taus.size() != ref.taus.size() || c.deviations.size() != ref.taus.size())
      throw std::invalid_argument("averaged_allan: tau grids differ");
    for (std::size_t i = 0; i < ref.taus.size(); ++i)
      if (std::abs(c.taus[i] - ref.taus[i]) > 1e-12 * ref.taus[i])
        throw std::invalid_argument("averaged_allan: tau grids differ");
  }
  const double n = static_cast<double>(curves.size());
  AllanCurve out;
  out.taus = ref.taus;
  out.n_pairs = ref.n_pairs;
  for (std::size_t i = 0; i < ref.taus.size(); ++i) {
    double mean = 0.0;
    for (const auto& c : curves) mean += c.deviations[i];
    mean /= n;
    double ss = 0.0;
    for (const auto& c : curves) ss += (c.deviations[i] - mean) * (c.deviations[i] - mean);
    out.deviations.push_back(mean);
    out.stds.push_back(curves.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0);
  }
  return out;
}

// ---------------------------------------------------------------------------

SpectrumEstimate noise_spectrum(const TraceBuffer& trace, std::size_t segment_len) {
  if (segment_len < 2 || (segment_len & (segment_len - 1)) != 0)
    throw std::invalid_argument("noise_spectrum: segment_len must be a power of two >= 2");
  if (trace.samples.size() < segment_len) throw std::invalid_argument("noise_spectrum: trace shorter than one segment");
  if (!(trace.sample_rate > 0.0)) throw std::invalid_argument("noise_spectrum: sample rate must be > 0");

  const std::size_t n_bins = segment_len / 2 + 1;
  std::unique_ptr<double, FftwFree> in(static_cast<double*>(fftw_malloc(sizeof(double) * segment_len)));
  std::unique_ptr<fftw_complex, FftwFree> out(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n_bins)));
  std::unique_ptr<fftw_plan_s, FftwPlanDeleter> plan;
  {
    std::lock_guard lock(fftw_planner_mutex());
    plan.reset(fftw_plan_dft_r2c_1d(static_cast<int>(segment_len), in.get(), out.get(), FFTW_ESTIMATE));
  }

  const std::size_t segments = trace.samples.size() / segment_len;
  std::vector<double> acc(n_bins, 0.0);
  for (std::size_t s = 0; s < segments; ++s) {
    const double* src = trace.samples.data() + s * segment_len;
    double mean = 0.0;
    for (std::size_t i = 0; i < segment_len; ++i) mean += src[i];
    mean /= static_cast<double>(segment_len);
    for (std::size_t i = 0; i < segment_len; ++i) in.get()[i] = src[i] - mean;
    fftw_execute(plan.get());
    for (std::size_t k = 0; k < n_bins; ++k) {
      const double re = out.get()[k][0], im = out.get()[k][1];
      acc[k] += re * re + im * im;
    }
  }

  SpectrumEstimate est;
  const double fs = trace.sample_rate;
  const double norm = 1.0 / (static_cast<double>(segments) * fs * static_cast<double>(segment_len));
  est.resolution_hz = fs / static_cast<double>(segment_len);
  est.freqs.resize(n_bins);
  est.psd.resize(n_bins);
  for (std::size_t k = 0; k < n_bins; ++k) {
    const bool edge = k == 0 || k == segment_len / 2;
    est.freqs[k] = static_cast<double>(k) * est.resolution_hz;
    est.psd[k] = acc[k] * norm * (edge ? 1.0 : 2.0);
  }
  return est;
}

TraceBuffer remove_periodic_mean(const TraceBuffer& trace, std::size_t samples_per_period) {
  if (samples_per_period == 0) throw std::invalid_argument("remove_periodic_mean: period must be > 0");
  const std::size_t periods = trace.samples.size() / samples_per_period;
  if (periods == 0) throw std::invalid_argument("remove_periodic_mean: trace shorter than one period");
  std::vector<double> mean(samples_per_period, 0.0);
  for (std::size_t p = 0; p < periods; ++p)
    for (std::size_t j = 0; j < samples_per_period; ++j) mean[j] += trace.samples[p * samples_per_period + j];
  for (double& m : mean) m /= static_cast<double>(periods);
  TraceBuffer out = trace;
  for (std::size_t i = 0; i < out.samples.size(); ++i) out.samples[i] -= mean[i % samples_per_period];
  return out;
}

double bandwidth_minus3db(const SpectrumEstimate& shot, const SpectrumEstimate& elec) {
  if (!same_grid(shot, elec)) throw std::invalid_argument("bandwidth_minus3db: spectra on different grids");
  const std::size_t n = shot.freqs.size();
  if (n < 12) throw std::invalid_argument("bandwidth_minus3db: spectrum too short");
  std::vector<double> net(n);
  for (std::size_t k = 0; k < n; ++k) net[k] = shot.psd[k] - elec.psd[k];
  double plateau = 0.0;
  for (std::size_t k = 1; k <= 10; ++k) plateau += net[k];
  plateau /= 10.0;
  const double threshold = plateau * std::pow(10.0, -0.3);
  for (std::size_t k = 1; k < n; ++k) {
    if (net[k] >= threshold) continue;
    if (k == 1) return shot.freqs[1];
    const double y0 = net[k - 1], y1 = net[k];
    return shot.freqs[k - 1] + (y0 - threshold) / (y0 - y1) * (shot.freqs[k] - shot.freqs[k - 1]);
  }
  throw std::runtime_error("bandwidth_minus3db: spectrum never falls 3 dB below its plateau");
}

double cmrr_db(const SpectrumEstimate& balanced, const SpectrumEstimate& blocked, double f_rep) {
  if (!same_grid(balanced, blocked)) throw std::invalid_argument("cmrr_db: spectra on different grids");
  if (balanced.freqs.size() < 2 || !(f_rep > 0.0) || f_rep > balanced.freqs.back() + 0.5 * balanced.resolution_hz)
    throw std::invalid_argument("cmrr_db: f_rep outside the frequency grid");
  const auto k = static_cast<std::size_t>(std::llround(f_rep / balanced.resolution_hz));
  if (!(balanced.psd[k] > 0.0) || !(blocked.psd[k] > 0.0)) throw std::runtime_error("cmrr_db: empty bin at f_rep");
  return 10.0 * std::log10(blocked.psd[k] / balanced.psd[k]);
}

double time_bandwidth_product(double bandwidth_hz, double stability_interval_s) {
  if (!(bandwidth_hz > 0.0) || !(stability_interval_s > 0.0))
    throw std::invalid_argument("time_bandwidth_product: inputs must be > 0");
  return bandwidth_hz * stability_interval_s;
}

void DetectorReport::check() const {
  for (double e : {eta_en, eta_pd, eta_bhd})
    if (!(e >= 0.0 && e <= 1.0)) throw std::logic_error("DetectorReport: efficiency outside [0, 1]");
  if (std::abs(tbp - bandwidth_hz * stability_interval_s) > 1e-12 * std::abs(tbp))
    throw std::logic_error("DetectorReport: tbp differs from bandwidth * stability interval");
}

}  // namespace pulsequad

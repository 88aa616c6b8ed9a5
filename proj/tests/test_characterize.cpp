#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "pulsequad/characterize.hpp"
#include "pulsequad/detector_sim.hpp"
#include "pulsequad/experiment.hpp"
#include "pulsequad/quad_extract.hpp"

using namespace pulsequad;
using std::numbers::pi;

namespace {

std::vector<double> white(std::size_t n, double var, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, std::sqrt(var));
  std::vector<double> v(n);
  for (double& x : v) x = z(rng);
  return v;
}

double loglog_slope(const AllanCurve& c) {
  const std::size_t n = c.taus.size();
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) mx += std::log(c.taus[i]), my += std::log(c.deviations[i]);
  mx /= n, my /= n;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = std::log(c.taus[i]) - mx;
    sxy += dx * (std::log(c.deviations[i]) - my), sxx += dx * dx;
  }
  return sxy / sxx;
}

SpectrumEstimate spectrum_from(std::vector<double> psd, double df = 1e6) {
  SpectrumEstimate s;
  s.resolution_hz = df;
  s.psd = std::move(psd);
  for (std::size_t i = 0; i < s.psd.size(); ++i) s.freqs.push_back(i * df);
  return s;
}

// Plateau-relative -3 dB crossing of an analytic PSD, using the estimator's own rule.
double analytic_crossing(const SpectrumEstimate& grid, auto psd_of) {
  double plateau = 0.0;
  for (int i = 1; i <= 10; ++i) plateau += psd_of(grid.freqs[i]) / 10;
  const double target = plateau * std::pow(10.0, -0.3);
  for (std::size_t i = 2; i < grid.freqs.size(); ++i) {
    const double a = psd_of(grid.freqs[i - 1]), b = psd_of(grid.freqs[i]);
    if (b < target) return grid.freqs[i - 1] + (a - target) / (a - b) * (grid.freqs[i] - grid.freqs[i - 1]);
  }
  return 0.0;
}

}  // namespace

TEST_CASE("noise variance versus LO power") {
  const auto exact = variance_vs_power({{1e-3, 3.0}, {2e-3, 5.0}, {3e-3, 7.0}, {5e-3, 11.0}});
  CHECK(exact.fit_slope == doctest::Approx(2000.0));
  CHECK(exact.fit_intercept == doctest::Approx(1.0));
  CHECK(exact.r_squared == doctest::Approx(1.0));
  CHECK_THROWS(variance_vs_power({{1e-3, 1.0}, {2e-3, 2.0}}));
  CHECK_THROWS(variance_vs_power({{1e-3, 1.0}, {1e-3, 2.0}, {2e-3, 2.0}}));

  SUBCASE("simulated sweep") {
    const auto c = DetectorConfig::defaults();
    const auto curve = measure_noise_curve(c, {1e-3, 2e-3, 3e-3, 4e-3, 5e-3}, 40000, 77);
    CHECK(curve.r_squared > 0.99);
    CHECK(curve.r_squared <= 1.0);
    CHECK(curve.fit_intercept == doctest::Approx(c.elec_noise_area_var).epsilon(0.10));
    // Shot-noise slope: area_scale^2 / 2 per watt of LO power.
    CHECK(curve.fit_slope == doctest::Approx(0.5 * std::pow(area_scale(c), 2) / c.p_lo).epsilon(0.03));
  }
}

TEST_CASE("signal to noise and efficiencies") {
  const auto nominal = snr_and_efficiency(std::pow(10.0, 1.45), 1.0);
  CHECK(nominal.snr_db == doctest::Approx(14.5).epsilon(1e-12));
  CHECK(nominal.eta_en == doctest::Approx(0.9645).epsilon(0.0005 / 0.9645));
  const auto half = snr_and_efficiency(2.0, 1.0);
  CHECK(half.snr_db == doctest::Approx(3.0103).epsilon(1e-4));
  CHECK(half.eta_en == doctest::Approx(0.5));
  CHECK(snr_and_efficiency(1.0, 1e-12).eta_en == doctest::Approx(1.0).epsilon(1e-11));
  CHECK_THROWS(snr_and_efficiency(1.0, 2.0));
  CHECK_THROWS(snr_and_efficiency(1.0, 0.0));

  CHECK(overall_efficiency(0.9645, 0.90) == doctest::Approx(0.868).epsilon(1e-3));
  CHECK(overall_efficiency(1.0, 0.37) == 0.37);
  CHECK(overall_efficiency(0.0, 0.37) == 0.0);
  CHECK_THROWS(overall_efficiency(1.1, 0.5));
}

TEST_CASE("pulse-to-pulse correlation") {
  const auto v = white(2000, 0.5, 1);
  CHECK(correlation_coefficient(v, 0).value == doctest::Approx(1.0).epsilon(1e-15));
  const auto cc1 = correlation_coefficient(v, 1);
  CHECK(std::abs(cc1.value) < 3 / std::sqrt(2000.0));
  CHECK(cc1.std_estimate == doctest::Approx(1 / std::sqrt(1999.0)));

  std::vector<double> repeated;
  for (double x : white(500, 1.0, 2)) repeated.insert(repeated.end(), {x, x});
  // Pairs (X_n, X_{n+1}) alternate between identical and independent values.
  CHECK(correlation_coefficient(repeated, 1).value == doctest::Approx(0.5).epsilon(0.2));

  std::vector<double> ramp(100);
  for (std::size_t i = 0; i < ramp.size(); ++i) ramp[i] = 0.1 * i;
  CHECK(correlation_coefficient(ramp, 1).value == doctest::Approx(1.0));
  CHECK_THROWS(correlation_coefficient(ramp, 100));

  // Bounds hold for adversarial sequences.
  const std::vector<double> alternating{1, -1, 1, -1, 1, -1, 1, -1};
  CHECK(correlation_coefficient(alternating, 1).value == doctest::Approx(-1.0));
  for (std::size_t m = 0; m < 6; ++m) {
    const double cc = correlation_coefficient(alternating, m).value;
    CHECK(cc >= -1.0);
    CHECK(cc <= 1.0);
  }
}

TEST_CASE("Allan deviation closed forms") {
  const double f = 80e6;

  SUBCASE("ramp") {
    const double d = 3.95e-5;
    std::vector<double> ramp(2'000'000);
    for (std::size_t k = 0; k < ramp.size(); ++k) ramp[k] = d * k / f;
    const auto taus = log_tau_grid(10 / f, ramp.size() / f / 2);
    const auto c = allan_deviation(ramp, f, taus);
    for (std::size_t i = 0; i < c.taus.size(); ++i)
      CHECK(std::abs(c.deviations[i] / (d * c.taus[i] / std::sqrt(2.0)) - 1.0) < 1e-12);
  }

  SUBCASE("constant") {
    const std::vector<double> flat(10000, 0.7);
    const double taus[] = {1e-7, 1e-6, 5e-5};
    for (double dev : allan_deviation(flat, f, taus).deviations) CHECK(dev == 0.0);
  }

  SUBCASE("white noise") {
    const auto v = white(10'000'000, 0.5, 5);
    const double tau = 1e-4;
    const auto c = allan_deviation(v, f, std::span<const double>(&tau, 1));
    REQUIRE(c.n_pairs[0] == 1249);
    // 1250 blocks hold 625 disjoint pairs; the deviation from M disjoint pairs has relative error 1/sqrt(2M).
    CHECK(c.deviations[0] == doctest::Approx(std::sqrt(0.5 / (f * tau))).epsilon(3 / std::sqrt(2.0 * 624)));
    CHECK(std::sqrt(0.5 / f) == doctest::Approx(7.9e-5).epsilon(0.01));

    const auto grid = log_tau_grid(10 / f, 1000 / f);
    const auto curve = allan_deviation(v, f, grid);
    CHECK(loglog_slope(curve) == doctest::Approx(-0.5).epsilon(0.1));

    auto scaled = v;
    for (double& x : scaled) x *= 3.0;
    const auto c3 = allan_deviation(scaled, f, grid);
    for (std::size_t i = 0; i < grid.size(); ++i) CHECK(c3.deviations[i] == doctest::Approx(3 * curve.deviations[i]));
  }

  SUBCASE("realized taus and errors") {
    const std::vector<double> v(1000, 0.0);
    const double taus[] = {3.3e-8, 2e-7};
    const auto c = allan_deviation(v, f, taus);
    CHECK(c.taus[0] == doctest::Approx(2 / f));  // floor(2.64) samples
    CHECK(c.taus[1] == doctest::Approx(16 / f));
    CHECK(c.n_pairs[1] == 61);
    const double too_long[] = {1000 / f};
    CHECK_THROWS(allan_deviation(v, f, too_long));
  }

  SUBCASE("block means agree with the per-sample estimator") {
    const auto v = white(200000, 0.5, 9);
    std::vector<double> blocks;
    for (std::size_t b = 0; b < 2000; ++b) {
      double s = 0.0;
      for (std::size_t i = 0; i < 100; ++i) s += v[b * 100 + i];
      blocks.push_back(s / 100);
    }
    const double taus[] = {100 / f, 700 / f, 10000 / f};
    const auto direct = allan_deviation(v, f, taus);
    const auto thinned = allan_deviation_blocks(blocks, 100 / f, taus);
    for (std::size_t i = 0; i < 3; ++i) CHECK(thinned.deviations[i] == doctest::Approx(direct.deviations[i]).epsilon(1e-12));
  }
}

TEST_CASE("tau grid") {
  const auto g = log_tau_grid(1e-7, 1e-5);
  CHECK(g.size() == 41);
  CHECK(g.front() == doctest::Approx(1e-7));
  CHECK(g.back() == doctest::Approx(1e-5));
  CHECK(g[20] == doctest::Approx(1e-6));
}

TEST_CASE("stability interval") {
  AllanCurve c;
  c.taus = {1, 2, 3, 4};
  c.deviations = {4, 3, 2, 1};
  c.n_pairs = {8, 4, 2, 2};
  CHECK(find_stability_interval(c) == 4);
  c.deviations = {3, 1, 1, 2};
  CHECK(find_stability_interval(c) == 3);
  AllanCurve shortc;
  shortc.taus = {1, 2};
  shortc.deviations = {1, 2};
  shortc.n_pairs = {2, 2};
  CHECK_THROWS(find_stability_interval(shortc));
  CHECK_THROWS(find_stability_interval(AllanCurve{}));
}

TEST_CASE("averaging Allan curves") {
  AllanCurve a;
  a.taus = {0.1, 1.0, 10.0};
  a.deviations = {1.0, 0.5, 0.8};
  a.n_pairs = {100, 10, 2};
  const std::vector<AllanCurve> same(10, a);
  const auto m = averaged_allan(same);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(m.deviations[i] == doctest::Approx(a.deviations[i]));
    CHECK(m.stds[i] == doctest::Approx(0.0));
  }

  AllanCurve one, three;
  one.taus = three.taus = {1.0};
  one.n_pairs = three.n_pairs = {2};
  one.deviations = {1.0};
  three.deviations = {3.0};
  const std::vector<AllanCurve> pair{one, three};
  const auto avg = averaged_allan(pair);
  CHECK(avg.deviations[0] == doctest::Approx(2.0));
  CHECK(avg.stds[0] == doctest::Approx(std::sqrt(2.0)));  // sample std of {1, 3}

  auto shifted = a;
  shifted.taus[1] = 2.0;
  const std::vector<AllanCurve> mismatch{a, shifted};
  CHECK_THROWS(averaged_allan(mismatch));
}

TEST_CASE("tie-breaking in the stability interval goes to the larger tau") {
  AllanCurve c;
  c.taus = {1, 2, 3, 4, 5};
  c.deviations = {5, 2, 3, 2, 4};
  c.n_pairs = {10, 5, 3, 2, 2};
  CHECK(find_stability_interval(c) == 4);
}

TEST_CASE("periodogram") {
  const double fs = 2e9;
  const std::size_t seg = 1024;

  SUBCASE("bin-centered sinusoid") {
    const double amp = 0.3, f0 = 100 * fs / seg;
    TraceBuffer t{fs, 0.0, {}};
    for (std::size_t i = 0; i < 16 * seg; ++i) t.samples.push_back(amp * std::sin(2 * pi * f0 * i / fs));
    const auto s = noise_spectrum(t, seg);
    CHECK(s.resolution_hz == doctest::Approx(fs / seg));
    CHECK(s.freqs.size() == seg / 2 + 1);
    const auto peak = std::max_element(s.psd.begin(), s.psd.end()) - s.psd.begin();
    CHECK(peak == 100);
    CHECK(s.psd[peak] * s.resolution_hz == doctest::Approx(amp * amp / 2).epsilon(0.01));
  }

  SUBCASE("white noise is flat and obeys Parseval") {
    for (std::size_t segments : {16, 256}) {
      const auto v = white(segments * seg, 2.0, segments);
      const auto s = noise_spectrum(TraceBuffer{fs, 0.0, v}, seg);
      double integral = 0.0, mean = 0.0, m2 = 0.0;
      for (std::size_t i = 0; i < s.psd.size(); ++i) integral += s.psd[i] * s.resolution_hz;
      CHECK(integral == doctest::Approx(sample_variance(v)).epsilon(0.05));
      for (std::size_t i = 1; i + 1 < s.psd.size(); ++i) mean += s.psd[i];
      mean /= s.psd.size() - 2;
      CHECK(mean == doctest::Approx(2.0 * 2 / fs).epsilon(0.05));  // one-sided level 2 var / fs
      for (std::size_t i = 1; i + 1 < s.psd.size(); ++i) m2 += std::pow(s.psd[i] / mean - 1, 2);
      // Relative per-bin scatter of an average of K periodograms is 1/sqrt(K).
      CHECK(std::sqrt(m2 / (s.psd.size() - 2)) == doctest::Approx(1 / std::sqrt(double(segments))).epsilon(0.1));
    }
  }

  SUBCASE("Parseval on a simulated detector trace") {
    const auto c = DetectorConfig::defaults();
    const auto sim = generate_vacuum_trace(c, 8000, 3);
    const auto s = noise_spectrum(sim.trace, seg);
    double integral = 0.0;
    for (double p : s.psd) integral += p * s.resolution_hz;
    CHECK(integral == doctest::Approx(sample_variance(sim.trace.samples)).epsilon(0.05));
  }

  CHECK_THROWS(noise_spectrum(TraceBuffer{fs, 0.0, std::vector<double>(100, 0.0)}, 128));
  CHECK_THROWS(noise_spectrum(TraceBuffer{fs, 0.0, std::vector<double>(1000, 0.0)}, 100));
}

TEST_CASE("removing the pulse-synchronous mean") {
  TraceBuffer t{2e9, 0.0, {}};
  for (int k = 0; k < 40; ++k)
    for (int i = 0; i < 25; ++i) t.samples.push_back(std::sin(i * 0.3) + 0.01 * ((k * 7 + i) % 5));
  const auto r = remove_periodic_mean(t, 25);
  for (int i = 0; i < 25; ++i) {
    double s = 0.0;
    for (int k = 0; k < 40; ++k) s += r.samples[k * 25 + i];
    CHECK(std::abs(s) < 1e-12);
  }
}

TEST_CASE("bandwidth estimate") {
  SUBCASE("synthetic spectra") {
    std::vector<double> shot, elec;
    for (int i = 0; i < 200; ++i) {
      const double f = i * 1e6;
      shot.push_back(1.0 / (1 + std::pow(f / 50e6, 2)) + 0.2);
      elec.push_back(0.2);
    }
    const auto s = spectrum_from(shot), e = spectrum_from(elec);
    const double expect = analytic_crossing(s, [](double f) { return 1.0 / (1 + std::pow(f / 50e6, 2)); });
    CHECK(bandwidth_minus3db(s, e) == doctest::Approx(expect).epsilon(1e-3));
    CHECK(expect == doctest::Approx(50e6).epsilon(0.02));  // plateau averaged over 1..10 MHz sits slightly low

    CHECK_THROWS(bandwidth_minus3db(spectrum_from(std::vector<double>(200, 1.0)), spectrum_from(std::vector<double>(200, 0.1))));
    CHECK_THROWS(bandwidth_minus3db(s, spectrum_from(elec, 2e6)));
  }

  const auto measure = [](const DetectorConfig& c) {
    auto dark = c;
    dark.p_lo = 0.0;
    const std::size_t spp = c.samples_per_period();
    const auto shot = noise_spectrum(remove_periodic_mean(generate_vacuum_trace(c, 40000, 1).trace, spp), 1024);
    const auto elec = noise_spectrum(remove_periodic_mean(generate_vacuum_trace(dark, 40000, 1).trace, spp), 1024);
    return std::pair{bandwidth_minus3db(shot, elec), shot};
  };

  SUBCASE("default flat-top pulse is at 80 MHz") {
    CHECK(measure(DetectorConfig::defaults()).first == doctest::Approx(80e6).epsilon(0.15));
  }

  SUBCASE("gaussian pulse follows its analytic envelope") {
    auto c = DetectorConfig::defaults();
    c.pulse_shape = PulseShape::gaussian;
    c.elec_noise_area_var = elec_noise_for_snr(c, 14.5);
    const auto [bw, grid] = measure(c);
    const double sigma = c.fwhm_pulse / (2 * std::sqrt(2 * std::log(2.0)));
    const double expect = analytic_crossing(grid, [&](double f) { return std::exp(-std::pow(2 * pi * f * sigma, 2)); });
    CHECK(expect == doctest::Approx(57e6).epsilon(0.05));
    CHECK(bw == doctest::Approx(expect).epsilon(0.05));

    c.fwhm_pulse /= 2;
    CHECK(measure(c).first == doctest::Approx(2 * bw).epsilon(0.15));
  }
}

TEST_CASE("common-mode rejection") {
  std::vector<double> bal(200, 1e-12), blk(200, 1e-12);
  bal[80] = 1.0;
  blk[80] = std::pow(10.0, 6.3);
  CHECK(cmrr_db(spectrum_from(bal), spectrum_from(blk), 80e6) == doctest::Approx(63.0));
  CHECK(cmrr_db(spectrum_from(bal), spectrum_from(bal), 80e6) == doctest::Approx(0.0));
  CHECK_THROWS(cmrr_db(spectrum_from(bal), spectrum_from(blk), 500e6));

  for (double target : {63.0, 40.0}) {
    auto c = DetectorConfig::defaults();
    c.cmrr_db = target;
    const auto bal_s = noise_spectrum(generate_vacuum_trace(c, 20000, 4).trace, 1024);
    const auto blk_s = noise_spectrum(single_diode_trace(c, 20000, 5), 1024);
    CHECK(cmrr_db(bal_s, blk_s, c.f_rep) == doctest::Approx(target).epsilon(1.0 / target));
  }
}

TEST_CASE("time-bandwidth product and report invariants") {
  CHECK(time_bandwidth_product(80e6, 2.0) == doctest::Approx(1.6e8));
  CHECK(time_bandwidth_product(1.0, 1.0) == 1.0);
  CHECK(time_bandwidth_product(80e6, 1e-300) > 0.0);
  CHECK_THROWS(time_bandwidth_product(0.0, 1.0));

  DetectorReport r;
  r.eta_en = 0.9645;
  r.eta_pd = 0.9;
  r.eta_bhd = 0.868;
  r.bandwidth_hz = 80e6;
  r.stability_interval_s = 2.0;
  r.tbp = 1.6e8;
  CHECK_NOTHROW(r.check());
  r.tbp = 1.7e8;
  CHECK_THROWS(r.check());
  r.tbp = 1.6e8;
  r.eta_en = 1.2;
  CHECK_THROWS(r.check());
}

TEST_CASE("simulated Allan records") {
  const auto c = DetectorConfig::defaults();
  AllanRecordOptions opt;
  opt.record_s = 80.0;
  opt.full_rate_pulses = std::size_t{1} << 20;
  const auto curve = simulate_allan_record(c, opt, 3);
  for (std::size_t i = 1; i < curve.taus.size(); ++i) CHECK(curve.taus[i] > curve.taus[i - 1]);
  CHECK(curve.taus.back() <= 40.0 + 1e-9);

  // White region: slope -1/2 below 0.1 s.
  AllanCurve early;
  for (std::size_t i = 0; i < curve.taus.size(); ++i)
    if (curve.taus[i] < 0.1) {
      early.taus.push_back(curve.taus[i]);
      early.deviations.push_back(curve.deviations[i]);
    }
  CHECK(loglog_slope(early) == doctest::Approx(-0.5).epsilon(0.1));

  // Drift-only record: the ramp law dominates the long taus.
  auto ramp_only = c;
  ramp_only.drift.linear_rate = 1.0;
  const auto ramp = simulate_allan_record(ramp_only, opt, 4);
  const std::size_t last = ramp.taus.size() - 1;
  const double cal_scale = std::sqrt(1 + std::pow(10.0, -1.45));
  CHECK(ramp.deviations[last] == doctest::Approx(ramp.taus[last] / std::sqrt(2.0) / cal_scale).epsilon(0.01));
}

TEST_CASE("block-thinned random walk follows the discrete random-walk Allan law") {
  auto c = DetectorConfig::defaults();
  c.drift.linear_rate = 0.0;
  c.drift.random_walk_sigma = 1e-4;
  AllanRecordOptions opt;
  opt.record_s = 8.0;
  opt.full_rate_pulses = std::size_t{1} << 18;
  std::vector<AllanCurve> records;
  for (std::uint64_t s = 0; s < 10; ++s) records.push_back(simulate_allan_record(c, opt, 50 + s));
  const auto avg = averaged_allan(records);

  // Discrete walk plus white noise: AVAR(n) = s^2 (2n^2 + 1) / (6n) + w^2 / n, in units of the calibrated scale.
  const double white_var = 0.5 * (1 + std::pow(10.0, -1.45));
  const double cal_scale = std::sqrt(2 * white_var);
  for (std::size_t i = 0; i < avg.taus.size(); ++i) {
    if (avg.taus[i] < 0.05 || avg.taus[i] > 0.2) continue;
    const double n = std::round(avg.taus[i] * c.f_rep);
    const double avar = 1e-8 * (2 * n * n + 1) / (6 * n) + white_var / n;
    const double disjoint_pairs = 10 * std::floor(opt.record_s / avg.taus[i] / 2);
    CAPTURE(avg.taus[i]);
    CHECK(avg.deviations[i] == doctest::Approx(std::sqrt(avar) / cal_scale).epsilon(3 / std::sqrt(2 * disjoint_pairs)));
  }
}

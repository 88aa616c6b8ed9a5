#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "pulsequad/characterize.hpp"
#include "pulsequad/detector_sim.hpp"
#include "pulsequad/error.hpp"
#include "pulsequad/quad_extract.hpp"

using namespace pulsequad;

namespace {

// Everything except shot noise switched off.
DetectorConfig quiet() {
  DetectorConfig c;
  c.elec_noise_area_var = 0.0;
  c.drift.linear_rate = 0.0;
  c.cmrr_db = 400.0;
  return c;
}

double slope(const std::vector<double>& t, const std::vector<double>& y) {
  const double mt = std::accumulate(t.begin(), t.end(), 0.0) / t.size();
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / y.size();
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < t.size(); ++i) sxy += (t[i] - mt) * (y[i] - my), sxx += (t[i] - mt) * (t[i] - mt);
  return sxy / sxx;
}

}  // namespace

TEST_CASE("LO photon number") {
  const double e_photon = 6.62607015e-34 * 299792458.0 / 830e-9;
  CHECK(e_photon == doctest::Approx(2.395e-19).epsilon(1e-3));
  CHECK(photons_per_pulse(5e-3, 830e-9, 80e6) == doctest::Approx(2.61e8).epsilon(0.01e8 / 2.61e8));
  CHECK(photons_per_pulse(2.5e-3, 830e-9, 80e6) == doctest::Approx(1.305e8).epsilon(1e-3));
  CHECK(photons_per_pulse(2.5e-3, 830e-9, 80e6) == doctest::Approx(0.5 * photons_per_pulse(5e-3, 830e-9, 80e6)));
  CHECK_THROWS_AS(photons_per_pulse(0.0, 830e-9, 80e6), std::domain_error);
  CHECK_THROWS_AS(photons_per_pulse(5e-3, -1.0, 80e6), std::domain_error);
}

TEST_CASE("area scale and derived areas") {
  const auto c = DetectorConfig::defaults();
  CHECK(area_scale(c) == doctest::Approx(std::sqrt(2.0) * 0.9 * 1.602176634e-19 * 36e3 * std::sqrt(2.61e8)).epsilon(0.01));
  CHECK(area_scale(c) == doctest::Approx(1.19e-10).epsilon(0.01));
  auto dark = c;
  dark.eta_pd = 0.0;
  CHECK(area_scale(dark) == 0.0);
  auto bright = c;
  bright.p_lo *= 4;
  CHECK(area_scale(bright) == doctest::Approx(2 * area_scale(c)));

  CHECK(single_diode_area(c) == doctest::Approx(0.9 * 1.602e-19 * 3.6e4 * 1.305e8).epsilon(0.01));
  CHECK(cmrr_leakage_area(c) == doctest::Approx(single_diode_area(c) * std::pow(10.0, -63.0 / 20)));
  CHECK(c.elec_noise_area_var == doctest::Approx(0.5 * std::pow(area_scale(c), 2) * std::pow(10.0, -1.45)));
}

TEST_CASE("config validation") {
  auto c = DetectorConfig::defaults();
  CHECK(c.samples_per_period() == 25);
  c.eta_pd = 1.2;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = DetectorConfig::defaults();
  c.sample_rate = 2.1e9;  // 26.25 samples per period
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.sample_rate = 480e6;  // 6 samples per period
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = DetectorConfig::defaults();
  c.drift.random_walk_sigma = -1e-3;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = DetectorConfig::defaults();
  c.gain = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = DetectorConfig::defaults();
  c.p_lo = 0.0;  // LO blocked is a legal measurement configuration
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("pulse kernel") {
  auto c = DetectorConfig::defaults();
  for (auto shape : {PulseShape::flat_top, PulseShape::gaussian}) {
    c.pulse_shape = shape;
    const auto k = pulse_kernel(c);
    REQUIRE(k.size() == 25);
    CHECK(integrate_pulse(k, c.sample_rate) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(*std::max_element(k.begin(), k.end()) == doctest::Approx(k[12]));
    for (int i = 1; i <= 12; ++i) CHECK(k[12 - i] == doctest::Approx(k[12 + i]));
    for (double v : k) CHECK(v >= 0.0);
  }

  SUBCASE("gaussian samples follow the FWHM") {
    c.pulse_shape = PulseShape::gaussian;
    const auto k = pulse_kernel(c);
    const double sigma = 5.5e-9 / (2 * std::sqrt(2 * std::log(2.0)));
    for (int i = 0; i < 25; ++i) {
      const double t = (i - 12) * 0.5e-9;
      CHECK(k[i] / k[12] == doctest::Approx(std::exp(-t * t / (2 * sigma * sigma))).epsilon(1e-12));
    }
    // Fraction of the untruncated Gaussian outside one 12.5 ns period.
    CHECK(std::erfc(6.25e-9 / (sigma * std::sqrt(2.0))) < 0.01);
  }

  SUBCASE("flat top reaches half maximum at the FWHM") {
    c.pulse_shape = PulseShape::flat_top;
    c.sample_rate = 80e6 * 500;  // fine grid to resolve the edges
    const auto k = pulse_kernel(c);
    const double peak = k[250];
    const double dt = 1.0 / c.sample_rate;
    const auto above = std::count_if(k.begin(), k.end(), [&](double v) { return v >= 0.5 * peak; });
    CHECK(above * dt == doctest::Approx(5.5e-9).epsilon(0.01));
  }
}

TEST_CASE("trace layout") {
  const auto c = DetectorConfig::defaults();
  const auto sim = generate_vacuum_trace(c, 100, 3);
  CHECK(sim.trace.samples.size() == 2500);
  CHECK(sim.trace.sample_rate == 2e9);
  CHECK(sim.trace.time_at(12) == doctest::Approx(0.0).epsilon(1e-20));
  CHECK(sim.trace.time_at(12 + 25) == doctest::Approx(12.5e-9));
  CHECK(sim.truth.quadratures.size() == 100);
  CHECK(sim.truth.baseline_areas.size() == 100);
  for (double v : sim.trace.samples) CHECK(std::isfinite(v));
}

TEST_CASE("ground-truth consistency with noise off") {
  const auto c = quiet();
  const auto sim = generate_trace(c, StateModel::coherent({0.6, 0.2}), PhaseSchedule::uniform_random(2000, 1), 2000, 5);
  const auto areas = pulse_areas(sim.trace, c);
  const double s = area_scale(c);
  REQUIRE(areas.size() == 2000);
  double worst = 0.0;
  for (std::size_t k = 0; k < areas.size(); ++k)
    worst = std::max(worst, std::abs(areas[k] - (s * sim.truth.quadratures[k] + sim.truth.baseline_areas[k])) / s);
  CHECK(worst < 1e-6);
}

TEST_CASE("vacuum shot noise has variance one half") {
  const auto c = quiet();
  const std::size_t n = 100000;
  const auto sim = generate_vacuum_trace(c, n, 8);
  auto areas = pulse_areas(sim.trace, c);
  for (double& a : areas) a /= area_scale(c);
  CHECK(std::abs(sample_variance(areas) - 0.5) < 3 * 0.5 * std::sqrt(2.0 / (n - 1)));
}

TEST_CASE("a dark detector produces a zero trace") {
  auto c = quiet();
  c.eta_pd = 0.0;
  const auto sim = generate_trace(c, StateModel::coherent(1.0), PhaseSchedule::constant(0.0), 50, 1);
  for (double v : sim.trace.samples) CHECK(v == 0.0);
}

TEST_CASE("linear drift shows up as an area slope") {
  auto c = quiet();
  c.drift.linear_rate = 2e3;  // large enough to dominate shot noise within 2e4 pulses
  const std::size_t n = 20000;
  const auto sim = generate_vacuum_trace(c, n, 4);
  const auto areas = pulse_areas(sim.trace, c);
  std::vector<double> t(n);
  for (std::size_t k = 0; k < n; ++k) t[k] = k / c.f_rep;
  CHECK(slope(t, areas) == doctest::Approx(c.drift.linear_rate * area_scale(c)).epsilon(0.01));
}

TEST_CASE("random walk baseline accumulates") {
  auto c = quiet();
  c.drift.random_walk_sigma = 0.05;
  const auto sim = generate_vacuum_trace(c, 4000, 6);
  const double s = area_scale(c);
  std::vector<double> steps;
  for (std::size_t k = 1; k < 4000; ++k)
    steps.push_back((sim.truth.baseline_areas[k] - sim.truth.baseline_areas[k - 1]) / s);
  CHECK(std::sqrt(sample_variance(steps)) == doctest::Approx(0.05).epsilon(0.05));
}

TEST_CASE("electronic noise hits the configured pulse-area variance") {
  auto c = DetectorConfig::defaults();
  c.p_lo = 0.0;
  c.cmrr_db = 400.0;
  const std::size_t n = 50000;
  const auto areas = pulse_areas(generate_vacuum_trace(c, n, 2).trace, c);
  CHECK(sample_variance(areas) == doctest::Approx(c.elec_noise_area_var).epsilon(4 * std::sqrt(2.0 / n)));
}

TEST_CASE("shot-noise variance is linear in LO power") {
  auto c = quiet();
  std::vector<std::pair<double, double>> pts;
  for (double p : {0.5e-3, 1e-3, 2e-3, 3e-3, 5e-3}) {
    c.p_lo = p;
    pts.emplace_back(p, sample_variance(pulse_areas(generate_vacuum_trace(c, 20000, 12).trace, c)));
  }
  CHECK(variance_vs_power(pts).r_squared > 0.995);
}

TEST_CASE("single-diode trace") {
  const auto c = DetectorConfig::defaults();
  auto quiet_c = c;
  quiet_c.elec_noise_area_var = 0.0;
  const auto areas = pulse_areas(single_diode_trace(quiet_c, 20, 1), quiet_c);
  for (double a : areas) CHECK(a == doctest::Approx(6.77e-7).epsilon(0.01));

  auto blocked = c;
  blocked.p_lo = 0.0;
  const auto noise_only = pulse_areas(single_diode_trace(blocked, 20000, 3), blocked);
  CHECK(std::abs(std::accumulate(noise_only.begin(), noise_only.end(), 0.0) / 20000) <
        4 * std::sqrt(c.elec_noise_area_var / 20000));
}

TEST_CASE("traces are reproducible per seed") {
  const auto c = DetectorConfig::defaults();
  const auto a = generate_trace(c, StateModel::coherent(0.86), PhaseSchedule::stepped(300, 3, 0, 1), 300, 42);
  const auto b = generate_trace(c, StateModel::coherent(0.86), PhaseSchedule::stepped(300, 3, 0, 1), 300, 42);
  const auto d = generate_trace(c, StateModel::coherent(0.86), PhaseSchedule::stepped(300, 3, 0, 1), 300, 43);
  CHECK(a.trace.samples == b.trace.samples);
  CHECK(a.truth.quadratures == b.truth.quadratures);
  CHECK(a.trace.samples != d.trace.samples);
  CHECK_THROWS(generate_trace(c, StateModel::vacuum(), PhaseSchedule{{0.0, 1.0}}, 3, 1));
  CHECK_THROWS(generate_trace(c, StateModel::vacuum(), PhaseSchedule::constant(0.0), 0, 1));
}

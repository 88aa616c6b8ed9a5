#include "pulsequad/detector_sim.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "pulsequad/error.hpp"
#include "pulsequad/random.hpp"

namespace pulsequad {

namespace {

// Random stream ids derived from the run seed.
enum Stream : std::uint64_t { kQuadratureStream = 1, kElectronicStream = 2, kWalkStream = 3 };

bool positive(double v) { return std::isfinite(v) && v > 0.0; }

double lo_photons(const DetectorConfig& c) {
  return c.p_lo > 0.0 ? photons_per_pulse(c.p_lo, c.wavelength, c.f_rep) : 0.0;
}

double pulse_shape_value(const DetectorConfig& c, double t) {
  const double at = std::abs(t);
  if (c.pulse_shape == PulseShape::gaussian) {
    const double sigma = c.fwhm_pulse / (2.0 * std::sqrt(2.0 * std::log(2.0)));
    return std::exp(-0.5 * at * at / (sigma * sigma));
  }
  const double edge = c.edge_fraction * c.fwhm_pulse;
  const double flat = c.fwhm_pulse - edge;
  if (at <= 0.5 * flat) return 1.0;
  if (edge <= 0.0 || at >= 0.5 * flat + edge) return 0.0;
  return 0.5 * (1.0 + std::cos(std::numbers::pi * (at - 0.5 * flat) / edge));
}

// Fills `out` (n_pulses * spp samples) with pulses of the given areas.
void deposit_pulses(const std::vector<double>& kernel, const std::vector<double>& areas, std::vector<double>& out) {
  const std::size_t spp = kernel.size();
  for (std::size_t k = 0; k < areas.size(); ++k) {
    double* w = out.data() + k * spp;
    for (std::size_t i = 0; i < spp; ++i) w[i] += areas[k] * kernel[i];
  }
}

void add_electronic_noise(const DetectorConfig& c, std::uint64_t seed, std::vector<double>& out) {
  const double sigma = elec_noise_sample_sigma(c);
  if (sigma == 0.0) return;
  Rng rng = make_rng(seed, kElectronicStream);
  std::normal_distribution<double> noise(0.0, sigma);
  for (double& v : out) v += noise(rng);
}

TraceBuffer empty_trace(const DetectorConfig& c, std::size_t n_pulses) {
  const std::size_t spp = c.samples_per_period();
  TraceBuffer t;
  t.sample_rate = c.sample_rate;
  t.t0 = -static_cast<double>(spp / 2) / c.sample_rate;
  t.samples.assign(n_pulses * spp, 0.0);
  return t;
}

}  // namespace

DetectorConfig DetectorConfig::defaults() {
  DetectorConfig c;
  c.elec_noise_area_var = elec_noise_for_snr(c, 14.5);
  return c;
}

void DetectorConfig::validate() const {
  if (!positive(f_rep)) throw ConfigError("detector.f_rep must be > 0");
  if (!positive(wavelength)) throw ConfigError("detector.lambda must be > 0");
  if (!(std::isfinite(p_lo) && p_lo >= 0.0)) throw ConfigError("detector.p_lo must be >= 0");
  if (!(eta_pd >= 0.0 && eta_pd <= 1.0)) throw ConfigError("detector.eta_pd must lie in [0, 1]");
  if (!positive(gain)) throw ConfigError("detector.gain must be > 0");
  if (!positive(fwhm_pulse)) throw ConfigError("detector.fwhm_pulse must be > 0");
  if (!(edge_fraction >= 0.0 && edge_fraction <= 1.0)) throw ConfigError("detector.edge_fraction must lie in [0, 1]");
  if (!positive(sample_rate)) throw ConfigError("detector.sample_rate must be > 0");
  if (!(std::isfinite(elec_noise_area_var) && elec_noise_area_var >= 0.0))
    throw ConfigError("detector.elec_noise_area_var must be >= 0");
  if (!std::isfinite(cmrr_db)) throw ConfigError("detector.cmrr_db must be finite");
  if (!std::isfinite(drift.linear_rate)) throw ConfigError("detector.drift.linear_rate must be finite");
  if (!(std::isfinite(drift.random_walk_sigma) && drift.random_walk_sigma >= 0.0))
    throw ConfigError("detector.drift.random_walk_sigma must be >= 0");
  const double ratio = sample_rate / f_rep;
  if (std::abs(ratio - std::round(ratio)) > 1e-9 * ratio || std::round(ratio) < 8.0)
    throw ConfigError("detector.sample_rate / f_rep must be an integer >= 8");
}

std::size_t DetectorConfig::samples_per_period() const {
  return static_cast<std::size_t>(std::llround(sample_rate / f_rep));
}

double photons_per_pulse(double p_lo, double wavelength, double f_rep) {
  if (!positive(p_lo) || !positive(wavelength) || !positive(f_rep))
    throw std::domain_error("photons_per_pulse: inputs must be > 0");
  const double photon_energy = constants::planck * constants::speed_of_light / wavelength;
  return (p_lo / f_rep) / photon_energy;
}

double area_scale(const DetectorConfig& c) {
  c.validate();
  return std::sqrt(2.0) * c.eta_pd * constants::elementary_charge * c.gain * std::sqrt(lo_photons(c));
}

double elec_noise_for_snr(const DetectorConfig& c, double snr_db) {
  const double s = area_scale(c);
  return 0.5 * s * s * std::pow(10.0, -snr_db / 10.0);
}

double single_diode_area(const DetectorConfig& c) {
  c.validate();
  return c.eta_pd * constants::elementary_charge * c.gain * 0.5 * lo_photons(c);
}

double cmrr_leakage_area(const DetectorConfig& c) {
  return single_diode_area(c) * std::pow(10.0, -c.cmrr_db / 20.0);
}

double elec_noise_sample_sigma(const DetectorConfig& c) {
  c.validate();
  // Trapezoid over one period window: squared weights sum to dt^2 (spp - 1.5).
  const double dt = 1.0 / c.sample_rate;
  const double spp = static_cast<double>(c.samples_per_period());
  return std::sqrt(c.elec_noise_area_var / (dt * dt * (spp - 1.5)));
}

std::vector<double> pulse_kernel(const DetectorConfig& c) {
  c.validate();
  const std::size_t spp = c.samples_per_period();
  const std::size_t half = spp / 2;
  const double dt = 1.0 / c.sample_rate;
  std::vector<double> k(spp);
  for (std::size_t i = 0; i < spp; ++i)
    k[i] = pulse_shape_value(c, (static_cast<double>(i) - static_cast<double>(half)) * dt);
  double area = 0.0;
  for (std::size_t i = 0; i < spp; ++i) area += (i == 0 || i + 1 == spp ? 0.5 : 1.0) * k[i];
  area *= dt;
  if (!(area > 0.0)) throw ConfigError("pulse shape has no area inside one period window");
  for (double& v : k) v /= area;
  return k;
}

SimulatedTrace generate_trace(const DetectorConfig& config, const StateModel& state, const PhaseSchedule& phases,
                              std::size_t n_pulses, std::uint64_t seed, int cutoff) {
  config.validate();
  if (n_pulses == 0) throw std::invalid_argument("generate_trace: n_pulses must be >= 1");
  if (!phases.fits(n_pulses)) throw std::invalid_argument("generate_trace: phase schedule length mismatch");

  const QuadratureSampler sampler(realize(state, cutoff));
  const double scale = area_scale(config);
  const double leakage = cmrr_leakage_area(config);

  SimulatedTrace out{empty_trace(config, n_pulses), {}};
  auto& truth = out.truth;
  truth.quadratures.resize(n_pulses);
  truth.baseline_areas.resize(n_pulses);

  Rng quad_rng = make_rng(seed, kQuadratureStream);
  Rng walk_rng = make_rng(seed, kWalkStream);
  std::normal_distribution<double> step(0.0, 1.0);
  double walk = 0.0;
  std::vector<double> areas(n_pulses);
  for (std::size_t k = 0; k < n_pulses; ++k) {
    const double t_k = static_cast<double>(k) / config.f_rep;
    if (k > 0 && config.drift.random_walk_sigma > 0.0) walk += config.drift.random_walk_sigma * step(walk_rng);
    const double x = sampler(phases.at(k), quad_rng);
    const double baseline = config.drift.linear_rate * t_k + walk;
    truth.quadratures[k] = x;
    truth.baseline_areas[k] = scale * baseline + leakage;
    areas[k] = scale * (x + baseline) + leakage;
  }
  deposit_pulses(pulse_kernel(config), areas, out.trace.samples);
  add_electronic_noise(config, seed, out.trace.samples);
  return out;
}

SimulatedTrace generate_vacuum_trace(const DetectorConfig& config, std::size_t n_pulses, std::uint64_t seed) {
  return generate_trace(config, StateModel::vacuum(), PhaseSchedule::constant(0.0), n_pulses, seed, 1);
}

TraceBuffer single_diode_trace(const DetectorConfig& config, std::size_t n_pulses, std::uint64_t seed) {
  config.validate();
  if (n_pulses == 0) throw std::invalid_argument("single_diode_trace: n_pulses must be >= 1");
  TraceBuffer trace = empty_trace(config, n_pulses);
  deposit_pulses(pulse_kernel(config), std::vector<double>(n_pulses, single_diode_area(config)), trace.samples);
  add_electronic_noise(config, seed, trace.samples);
  return trace;
}

}  // namespace pulsequad

#include "pulsequad/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "pulsequad/error.hpp"
#include "pulsequad/io.hpp"
#include "pulsequad/random.hpp"

namespace pulsequad {

namespace {

using nlohmann::json;

// Sub-stream tags for one run seed.
enum : std::uint64_t {
  kSweepSeed = 11,
  kCmrrSeed = 12,
  kCcSeed = 13,
  kAllanSeed = 14,
  kPhaseSeed = 21,
  kSampleSeed = 22,
};

// Read-only view of one JSON object that rejects keys outside `allowed`.
class Section {
 public:
  Section(const json& j, std::string path, std::set<std::string> allowed) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) throw ConfigError(path_ + ": expected an object");
    for (const auto& [key, _] : j.items())
      if (!allowed.count(key)) throw ConfigError(path_ + ": unknown key '" + key + "'");
  }

  bool has(const std::string& key) const { return j_.contains(key); }
  const json& raw(const std::string& key) const { return j_.at(key); }
  std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  double number(const std::string& key, double fallback) const {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_number()) throw ConfigError(where(key) + ": expected a number");
    return v.get<double>();
  }

  std::uint64_t count(const std::string& key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_number_unsigned()) throw ConfigError(where(key) + ": expected a nonnegative integer");
    return v.get<std::uint64_t>();
  }

  std::string text(const std::string& key, std::string fallback) const {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_string()) throw ConfigError(where(key) + ": expected a string");
    return v.get<std::string>();
  }

  std::vector<double> numbers(const std::string& key, std::vector<double> fallback) const {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_array()) throw ConfigError(where(key) + ": expected an array of numbers");
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number()) throw ConfigError(where(key) + ": expected an array of numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

 private:
  const json& j_;
  std::string path_;
};

DetectorConfig parse_detector(const json& j) {
  const Section s(j, "detector",
                  {"f_rep", "lambda", "p_lo", "eta_pd", "gain", "fwhm_pulse", "pulse_shape", "edge_fraction",
                   "sample_rate", "elec_noise_area_var", "snr_db", "cmrr_db", "drift"});
  DetectorConfig c;
  c.f_rep = s.number("f_rep", c.f_rep);
  c.wavelength = s.number("lambda", c.wavelength);
  c.p_lo = s.number("p_lo", c.p_lo);
  c.eta_pd = s.number("eta_pd", c.eta_pd);
  c.gain = s.number("gain", c.gain);
  c.fwhm_pulse = s.number("fwhm_pulse", c.fwhm_pulse);
  const std::string shape = s.text("pulse_shape", "flat_top");
  if (shape == "flat_top")
    c.pulse_shape = PulseShape::flat_top;
  else if (shape == "gaussian")
    c.pulse_shape = PulseShape::gaussian;
  else
    throw ConfigError("detector.pulse_shape: expected \"flat_top\" or \"gaussian\"");
  c.edge_fraction = s.number("edge_fraction", c.edge_fraction);
  c.sample_rate = s.number("sample_rate", c.sample_rate);
  c.cmrr_db = s.number("cmrr_db", c.cmrr_db);
  if (s.has("drift")) {
    const Section d(s.raw("drift"), "detector.drift", {"linear_rate", "random_walk_sigma"});
    c.drift.linear_rate = d.number("linear_rate", c.drift.linear_rate);
    c.drift.random_walk_sigma = d.number("random_walk_sigma", c.drift.random_walk_sigma);
  }
  c.validate();
  if (s.has("elec_noise_area_var") && s.has("snr_db"))
    throw ConfigError("detector: give either elec_noise_area_var or snr_db, not both");
  if (s.has("elec_noise_area_var"))
    c.elec_noise_area_var = s.number("elec_noise_area_var", 0.0);
  else
    c.elec_noise_area_var = elec_noise_for_snr(c, s.number("snr_db", 14.5));
  c.validate();
  return c;
}

Complex parse_alpha(const json& v) {
  if (v.is_number()) return {v.get<double>(), 0.0};
  if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number())
    return {v[0].get<double>(), v[1].get<double>()};
  throw ConfigError("state.alpha: expected a number or [re, im]");
}

StateModel parse_state(const json& j, const std::string& path) {
  const Section s(j, path, {"kind", "alpha", "n", "efficiency", "weights", "components"});
  const std::string kind = s.text("kind", "vacuum");
  const double eff = s.number("efficiency", 1.0);
  StateModel st;
  if (kind == "vacuum") {
    st = StateModel::vacuum();
    st.efficiency = eff;
  } else if (kind == "coherent") {
    if (!s.has("alpha")) throw ConfigError(path + ": coherent state needs alpha");
    st = StateModel::coherent(parse_alpha(s.raw("alpha")), eff);
  } else if (kind == "fock") {
    st = StateModel::fock(static_cast<int>(s.count("n", 1)), eff);
  } else if (kind == "mixture") {
    if (!s.has("components") || !s.raw("components").is_array())
      throw ConfigError(path + ": mixture needs a components array");
    std::vector<StateModel> comps;
    for (std::size_t i = 0; i < s.raw("components").size(); ++i)
      comps.push_back(parse_state(s.raw("components")[i], path + ".components[" + std::to_string(i) + "]"));
    st = StateModel::mixture(s.numbers("weights", {}), std::move(comps), eff);
  } else {
    throw ConfigError(path + ".kind: expected vacuum, coherent, fock or mixture");
  }
  try {
    st.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return st;
}

PhaseSpec parse_phases(const json& j) {
  const Section s(j, "phases", {"kind", "values", "steps", "start", "span"});
  PhaseSpec p;
  const std::string kind = s.text("kind", "fixed");
  if (kind == "fixed") {
    p.kind = PhaseSpec::Kind::fixed;
    p.values = s.numbers("values", {0.0});
    if (p.values.empty()) throw ConfigError("phases.values: must not be empty");
  } else if (kind == "stepped") {
    p.kind = PhaseSpec::Kind::stepped;
    p.steps = s.count("steps", p.steps);
    p.start = s.number("start", p.start);
    p.span = s.number("span", p.span);
    if (p.steps == 0) throw ConfigError("phases.steps: must be >= 1");
  } else if (kind == "uniform") {
    p.kind = PhaseSpec::Kind::uniform;
  } else {
    throw ConfigError("phases.kind: expected fixed, stepped or uniform");
  }
  return p;
}

TomographyOptions parse_tomography(const json& j) {
  const Section s(j, "tomography",
                  {"cutoff", "bin_width", "tol", "max_iter", "eta", "max_phase_groups", "wigner_extent", "wigner_points"});
  TomographyOptions t;
  t.mle.cutoff = static_cast<int>(s.count("cutoff", t.mle.cutoff));
  t.mle.bin_width = s.number("bin_width", t.mle.bin_width);
  t.mle.tol = s.number("tol", t.mle.tol);
  t.mle.max_iter = static_cast<int>(s.count("max_iter", t.mle.max_iter));
  t.mle.eta = s.number("eta", t.mle.eta);
  t.mle.max_phase_groups = s.count("max_phase_groups", t.mle.max_phase_groups);
  t.wigner_extent = s.number("wigner_extent", t.wigner_extent);
  t.wigner_points = s.count("wigner_points", t.wigner_points);
  return t;
}

CharacterizeOptions parse_characterize(const json& j) {
  const Section s(j, "characterize",
                  {"powers_w", "cc_batches", "cc_batch_size", "cc_max_lag", "allan_records", "record_s",
                   "full_rate_pulses", "block_s", "spectrum_segment"});
  CharacterizeOptions c;
  c.powers_w = s.numbers("powers_w", c.powers_w);
  c.cc_batches = s.count("cc_batches", c.cc_batches);
  c.cc_batch_size = s.count("cc_batch_size", c.cc_batch_size);
  c.cc_max_lag = s.count("cc_max_lag", c.cc_max_lag);
  c.allan_records = s.count("allan_records", c.allan_records);
  c.record_s = s.number("record_s", c.record_s);
  c.full_rate_pulses = s.count("full_rate_pulses", c.full_rate_pulses);
  c.block_s = s.number("block_s", c.block_s);
  c.spectrum_segment = s.count("spectrum_segment", c.spectrum_segment);
  return c;
}

double realized_block(double block_s, double f_rep) {
  return static_cast<double>(std::max<long long>(1, std::llround(block_s * f_rep))) / f_rep;
}

std::vector<double> timestamps_for(std::size_t n, double f_rep) {
  std::vector<double> t(n);
  for (std::size_t k = 0; k < n; ++k) t[k] = static_cast<double>(k) / f_rep;
  return t;
}

}  // namespace

RunKind parse_run_kind(const std::string& name) {
  if (name == "characterize") return RunKind::characterize;
  if (name == "tomography") return RunKind::tomography;
  if (name == "trace-export") return RunKind::trace_export;
  throw ConfigError("run: expected characterize, tomography or trace-export, got '" + name + "'");
}

std::string run_kind_name(RunKind kind) {
  switch (kind) {
    case RunKind::characterize:
      return "characterize";
    case RunKind::tomography:
      return "tomography";
    case RunKind::trace_export:
      return "trace-export";
  }
  return "?";
}

PhaseSchedule PhaseSpec::build(std::size_t n, std::uint64_t seed) const {
  switch (kind) {
    case Kind::fixed: {
      if (values.size() != 1 && values.size() != n)
        throw ConfigError("phases.values: length must be 1 or n_pulses");
      return PhaseSchedule{values};
    }
    case Kind::stepped:
      return PhaseSchedule::stepped(n, steps, start, span);
    case Kind::uniform:
      return PhaseSchedule::uniform_random(n, mix_seed(seed, kPhaseSeed));
  }
  throw ConfigError("phases: unsupported kind");
}

ExperimentConfig ExperimentConfig::from_json(const json& doc) {
  const Section s(doc, "",
                  {"run", "seed", "out", "n_pulses", "detector", "state", "phases", "tomography", "characterize"});
  ExperimentConfig c;
  if (s.has("run")) c.run = parse_run_kind(s.text("run", ""));
  c.seed = s.count("seed", c.seed);
  c.out = s.text("out", c.out.string());
  c.n_pulses = s.count("n_pulses", c.n_pulses);
  if (s.has("detector")) c.detector = parse_detector(s.raw("detector"));
  if (s.has("state")) c.state = parse_state(s.raw("state"), "state");
  if (s.has("phases")) c.phases = parse_phases(s.raw("phases"));
  if (s.has("tomography")) c.tomography = parse_tomography(s.raw("tomography"));
  if (s.has("characterize")) c.characterize = parse_characterize(s.raw("characterize"));
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot read config file " + file.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config is not valid JSON: " + std::string(e.what()));
  }
  return from_json(doc);
}

void ExperimentConfig::validate() const {
  detector.validate();
  if (n_pulses == 0) throw ConfigError("n_pulses must be >= 1");
  if (out.empty()) throw ConfigError("out must not be empty");
  if (phases.kind == PhaseSpec::Kind::fixed && phases.values.size() != 1 && phases.values.size() != n_pulses)
    throw ConfigError("phases.values: length must be 1 or n_pulses");
  try {
    state.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("state: ") + e.what());
  }
  const auto& m = tomography.mle;
  if (m.cutoff < 2) throw ConfigError("tomography.cutoff must be >= 2");
  if (!(m.bin_width > 0.0)) throw ConfigError("tomography.bin_width must be > 0");
  if (!(m.tol > 0.0)) throw ConfigError("tomography.tol must be > 0");
  if (m.max_iter < 1) throw ConfigError("tomography.max_iter must be >= 1");
  if (!(m.eta > 0.0 && m.eta <= 1.0)) throw ConfigError("tomography.eta must lie in (0, 1]");
  if (m.max_phase_groups < 1) throw ConfigError("tomography.max_phase_groups must be >= 1");
  if (!(tomography.wigner_extent > 0.0) || tomography.wigner_points < 2)
    throw ConfigError("tomography: wigner_extent must be > 0 and wigner_points >= 2");
  if (state.kind == StateModel::Kind::fock && state.photons >= m.cutoff)
    throw ConfigError("state.n must be below tomography.cutoff");

  const auto& ch = characterize;
  if (run == RunKind::characterize) {
    if (!(detector.p_lo > 0.0)) throw ConfigError("characterize needs detector.p_lo > 0");
    if (n_pulses < 2) throw ConfigError("characterize needs n_pulses >= 2");
  }
  std::vector<double> powers = ch.powers_w;
  std::sort(powers.begin(), powers.end());
  if (std::unique(powers.begin(), powers.end()) - powers.begin() < 3 || powers.front() <= 0.0)
    throw ConfigError("characterize.powers_w needs >= 3 distinct positive powers");
  if (ch.cc_batches < 1 || ch.cc_batch_size <= ch.cc_max_lag + 1)
    throw ConfigError("characterize: cc_batch_size must exceed cc_max_lag + 1 and cc_batches >= 1");
  if (ch.allan_records < 1) throw ConfigError("characterize.allan_records must be >= 1");
  if (!(ch.block_s > 0.0) || !(ch.record_s >= 4.0 * ch.block_s))
    throw ConfigError("characterize: need block_s > 0 and record_s >= 4 block_s");
  if (static_cast<double>(ch.full_rate_pulses) < 2.0 * ch.block_s * detector.f_rep)
    throw ConfigError("characterize.full_rate_pulses must cover two blocks");
  const std::size_t seg = ch.spectrum_segment;
  if (seg < 32 || (seg & (seg - 1)) != 0) throw ConfigError("characterize.spectrum_segment must be a power of two >= 32");
  if (run == RunKind::characterize && seg > n_pulses * detector.samples_per_period())
    throw ConfigError("characterize.spectrum_segment exceeds the trace length");
}

void prepare_output_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw ConfigError("cannot create output directory " + dir.string());
  const auto probe = dir / ".pulsequad-write-probe";
  {
    std::ofstream f(probe);
    if (!f) throw ConfigError("output directory is not writable: " + dir.string());
  }
  std::filesystem::remove(probe, ec);
}

// ---------------------------------------------------------------------------

NoiseCurve measure_noise_curve(const DetectorConfig& detector, const std::vector<double>& powers_w,
                               std::size_t n_pulses, std::uint64_t seed) {
  std::vector<std::pair<double, double>> points;
  for (double p : powers_w) {
    DetectorConfig d = detector;
    d.p_lo = p;
    // Every power point reuses one noise realization (common random numbers).
    const auto sim = generate_vacuum_trace(d, n_pulses, seed);
    points.emplace_back(p, sample_variance(pulse_areas(sim.trace, d)));
  }
  return variance_vs_power(std::move(points));
}

AllanCurve simulate_allan_record(const DetectorConfig& detector, const AllanRecordOptions& options,
                                 std::uint64_t seed) {
  detector.validate();
  const double scale = area_scale(detector);
  if (!(scale > 0.0)) throw std::invalid_argument("simulate_allan_record: detector has no LO");
  const double f = detector.f_rep;
  const double white_sigma = std::sqrt(0.5 + detector.elec_noise_area_var / (scale * scale));
  const double d = detector.drift.linear_rate;
  const double rw = detector.drift.random_walk_sigma;
  const double block_s = realized_block(options.block_s, f);
  const auto block_n = static_cast<std::size_t>(std::llround(block_s * f));

  // Per-pulse record, in quadrature units of area_scale.
  std::vector<double> fine(options.full_rate_pulses);
  {
    Rng rng = make_rng(seed, 1);
    std::normal_distribution<double> z(0.0, 1.0);
    double walk = 0.0;
    for (std::size_t k = 0; k < fine.size(); ++k) {
      if (k > 0 && rw > 0.0) walk += rw * z(rng);
      fine[k] = white_sigma * z(rng) + d * static_cast<double>(k) / f + walk;
    }
  }
  const std::size_t n_cal = std::min<std::size_t>(fine.size(), 100000);
  const CalibrationScale cal = calibrate_vacuum(std::span<const double>(fine).first(n_cal));
  for (double& x : fine) x = (x - cal.offset) / cal.scale;

  // Block means over the full record, drawn from their exact joint statistics.
  const auto n_blocks = static_cast<std::size_t>(std::floor(options.record_s / block_s + 1e-9));
  std::vector<double> blocks(n_blocks);
  {
    Rng rng = make_rng(seed, 2);
    std::normal_distribution<double> z(0.0, 1.0);
    const double n = static_cast<double>(block_n);
    const double var_end = n * rw * rw;
    // Within a block the walk sits at W + S_j, j = 0..n-1; the next block starts at W + S_n.
    const double var_mean = rw * rw * (n - 1.0) * (2.0 * n - 1.0) / (6.0 * n);
    const double cov = rw * rw * (n - 1.0) / 2.0;
    double walk = 0.0;
    for (std::size_t b = 0; b < n_blocks; ++b) {
      const double t_mid = (static_cast<double>(b) * n + 0.5 * (n - 1.0)) / f;
      double walk_mean = walk;
      if (rw > 0.0) {
        const double s_end = std::sqrt(var_end) * z(rng);
        const double s_mean = cov / var_end * s_end + std::sqrt(std::max(var_mean - cov * cov / var_end, 0.0)) * z(rng);
        walk_mean = walk + s_mean;
        walk += s_end;
      }
      const double mean = white_sigma / std::sqrt(n) * z(rng) + d * t_mid + walk_mean;
      blocks[b] = (mean - cal.offset) / cal.scale;
    }
  }

  const auto grid = log_tau_grid(10.0 / f, 0.5 * static_cast<double>(n_blocks) * block_s);
  std::vector<double> short_taus, long_taus;
  for (double tau : grid) (tau < block_s ? short_taus : long_taus).push_back(tau);
  AllanCurve curve = allan_deviation(fine, f, short_taus);
  const AllanCurve tail = allan_deviation_blocks(blocks, block_s, long_taus);
  for (std::size_t i = 0; i < tail.taus.size(); ++i) {
    if (!curve.taus.empty() && tail.taus[i] <= curve.taus.back()) continue;
    curve.taus.push_back(tail.taus[i]);
    curve.deviations.push_back(tail.deviations[i]);
    curve.n_pairs.push_back(tail.n_pairs[i]);
  }
  return curve;
}

std::vector<CcPoint> measure_cc(const DetectorConfig& detector, const CalibrationScale& cal, std::size_t batches,
                                std::size_t batch_size, std::size_t max_lag, std::uint64_t seed) {
  std::vector<std::vector<double>> values(max_lag + 1);
  for (std::size_t b = 0; b < batches; ++b) {
    const auto sim = generate_vacuum_trace(detector, batch_size, mix_seed(seed, b));
    const auto batch = apply_calibration(pulse_areas(sim.trace, detector), cal);
    for (std::size_t m = 0; m <= max_lag; ++m) values[m].push_back(correlation_coefficient(batch, m).value);
  }
  std::vector<CcPoint> out;
  for (std::size_t m = 0; m <= max_lag; ++m) {
    CcPoint p;
    p.m = m;
    for (double v : values[m]) p.value += v;
    p.value /= static_cast<double>(batches);
    p.std_analytic = 1.0 / std::sqrt(static_cast<double>(batch_size - m));
    p.std = batches >= 20 ? std::sqrt(sample_variance(values[m])) : p.std_analytic;
    out.push_back(p);
  }
  return out;
}

std::optional<StateVector> pure_target(const StateModel& state, int dim) {
  switch (state.kind) {
    case StateModel::Kind::vacuum:
      return fock_vector(0, dim);
    case StateModel::Kind::coherent:
      return coherent_vector(std::sqrt(state.efficiency) * state.alpha, dim);
    case StateModel::Kind::fock:
      if (state.photons == 0 || state.efficiency == 1.0) return fock_vector(state.efficiency == 1.0 ? state.photons : 0, dim);
      return std::nullopt;
    case StateModel::Kind::mixture:
      return std::nullopt;
  }
  return std::nullopt;
}

CharacterizeResult run_characterize(const ExperimentConfig& config) {
  config.validate();
  const DetectorConfig& det = config.detector;
  const auto& opt = config.characterize;
  const std::uint64_t sweep_seed = mix_seed(config.seed, kSweepSeed);
  prepare_output_dir(config.out);

  CharacterizeResult r;
  r.noise = measure_noise_curve(det, opt.powers_w, config.n_pulses, sweep_seed);

  // Working point and electronic-only (LO blocked) records.
  DetectorConfig dark = det;
  dark.p_lo = 0.0;
  const auto shot = generate_vacuum_trace(det, config.n_pulses, sweep_seed);
  const auto elec = generate_vacuum_trace(dark, config.n_pulses, sweep_seed);
  const auto shot_areas = pulse_areas(shot.trace, det);
  const double var_total = sample_variance(shot_areas);
  const double var_elec = sample_variance(pulse_areas(elec.trace, dark));
  auto& rep = r.report;
  if (var_elec > 0.0) {
    const auto snr = snr_and_efficiency(var_total, var_elec);
    rep.snr_db = snr.snr_db;
    rep.eta_en = snr.eta_en;
  } else {
    rep.eta_en = 1.0;
  }
  rep.eta_pd = det.eta_pd;
  rep.eta_bhd = overall_efficiency(rep.eta_en, rep.eta_pd);

  const std::size_t spp = det.samples_per_period();
  r.shot_spectrum = noise_spectrum(remove_periodic_mean(shot.trace, spp), opt.spectrum_segment);
  r.elec_spectrum = noise_spectrum(remove_periodic_mean(elec.trace, spp), opt.spectrum_segment);
  rep.bandwidth_hz = bandwidth_minus3db(r.shot_spectrum, r.elec_spectrum);

  const auto blocked = single_diode_trace(det, config.n_pulses, mix_seed(config.seed, kCmrrSeed));
  rep.cmrr_db = cmrr_db(noise_spectrum(shot.trace, opt.spectrum_segment),
                        noise_spectrum(blocked, opt.spectrum_segment), det.f_rep);

  const CalibrationScale cal = calibrate_vacuum(shot_areas);
  rep.cc = measure_cc(det, cal, opt.cc_batches, opt.cc_batch_size, opt.cc_max_lag, mix_seed(config.seed, kCcSeed));

  const AllanRecordOptions allan_opt{opt.record_s, opt.full_rate_pulses, opt.block_s};
  std::vector<AllanCurve> records;
  for (std::size_t i = 0; i < opt.allan_records; ++i)
    records.push_back(simulate_allan_record(det, allan_opt, mix_seed(mix_seed(config.seed, kAllanSeed), i)));
  r.allan = averaged_allan(records);
  rep.stability_interval_s = find_stability_interval(r.allan);
  rep.tbp = time_bandwidth_product(rep.bandwidth_hz, rep.stability_interval_s);
  rep.check();

  write_file_atomic(config.out / "report.json", report_json(rep).dump(2) + "\n");
  write_file_atomic(config.out / "noise_curve.csv", noise_curve_csv(r.noise));
  write_file_atomic(config.out / "allan.csv", allan_csv(r.allan));
  write_file_atomic(config.out / "spectrum.csv", spectrum_csv(r.shot_spectrum));
  write_file_atomic(config.out / "spectrum_elec.csv", spectrum_csv(r.elec_spectrum));
  write_file_atomic(config.out / "cc.csv", cc_csv(rep.cc));
  return r;
}

TomographyResult run_tomography(const ExperimentConfig& config) {
  config.validate();
  prepare_output_dir(config.out);
  const auto& t = config.tomography;
  const int dim = t.mle.cutoff;

  // The simulated detector loses photons with the same efficiency the analysis corrects for.
  StateModel measured = config.state;
  measured.efficiency *= t.mle.eta;
  const PhaseSchedule phases = config.phases.build(config.n_pulses, config.seed);

  QuadratureBatch samples =
      sample_quadratures(measured, phases, config.n_pulses, mix_seed(config.seed, kSampleSeed), dim);
  samples.timestamps = timestamps_for(config.n_pulses, config.detector.f_rep);
  MleResult mle = mle_reconstruct(samples, t.mle);
  std::optional<double> fidelity;
  if (auto target = pure_target(config.state, dim)) fidelity = fidelity_pure(mle.rho, *target);
  const auto axis = linspace(-t.wigner_extent, t.wigner_extent, t.wigner_points);
  TomographyResult r{std::move(samples), std::move(mle), fidelity, 0.0, {}, {}};
  r.w00 = wigner_at(r.mle.rho, 0.0, 0.0);
  r.photons = photon_statistics(r.mle.rho);
  r.wigner = wigner(r.mle.rho, axis, axis);

  nlohmann::ordered_json summary;
  summary["run"] = "tomography";
  summary["n_samples"] = r.samples.size();
  summary["cutoff"] = dim;
  summary["eta"] = t.mle.eta;
  summary["fidelity"] = r.fidelity ? nlohmann::ordered_json(*r.fidelity) : nlohmann::ordered_json(nullptr);
  summary["w00"] = r.w00;
  summary["photon_numbers"] = r.photons.probs;
  summary["iterations"] = r.mle.iterations;
  summary["converged"] = r.mle.converged;
  summary["log_likelihood"] = r.mle.log_likelihood.back();
  summary["cells"] = r.mle.cells;

  write_file_atomic(config.out / "rho.csv", density_matrix_csv(r.mle.rho));
  write_file_atomic(config.out / "wigner.csv", wigner_csv(r.wigner));
  write_file_atomic(config.out / "photon_stats.csv", photon_statistics_csv(r.photons));
  write_file_atomic(config.out / "samples.csv", quadratures_csv(r.samples));
  write_file_atomic(config.out / "summary.json", summary.dump(2) + "\n");
  return r;
}

SimulatedTrace run_trace_export(const ExperimentConfig& config) {
  config.validate();
  prepare_output_dir(config.out);
  const PhaseSchedule phases = config.phases.build(config.n_pulses, config.seed);
  auto sim = generate_trace(config.detector, config.state, phases, config.n_pulses, config.seed,
                            config.tomography.mle.cutoff);
  write_file_atomic(config.out / "trace.csv", trace_csv(sim.trace));
  write_file_atomic(config.out / "trace.bin", trace_binary(sim.trace));
  return sim;
}

}  // namespace pulsequad

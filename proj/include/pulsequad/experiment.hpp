#pragma once

// Config-driven experiments behind the `pulsequad` command line tool.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pulsequad/characterize.hpp"
#include "pulsequad/detector_sim.hpp"
#include "pulsequad/quad_extract.hpp"
#include "pulsequad/tomo.hpp"

namespace pulsequad {

enum class RunKind { characterize, tomography, trace_export };

RunKind parse_run_kind(const std::string& name);
std::string run_kind_name(RunKind kind);

struct PhaseSpec {
  enum class Kind { fixed, stepped, uniform };
  Kind kind = Kind::fixed;
  std::vector<double> values{0.0};
  std::size_t steps = 7;
  double start = 0.0;
  double span = std::numbers::pi;

  PhaseSchedule build(std::size_t n, std::uint64_t seed) const;
};

struct TomographyOptions {
  MleOptions mle;
  double wigner_extent = 4.0;
  std::size_t wigner_points = 81;
};

struct CharacterizeOptions {
  std::vector<double> powers_w{1e-3, 2e-3, 3e-3, 4e-3, 5e-3};
  std::size_t cc_batches = 20;
  std::size_t cc_batch_size = 2000;
  std::size_t cc_max_lag = 9;
  std::size_t allan_records = 10;
  double record_s = 80.0;
  /// Length of the per-pulse record used for taus below block_s.
  std::size_t full_rate_pulses = std::size_t{1} << 21;
  /// Duration of the pre-averaged blocks used for taus >= block_s.
  double block_s = 1e-3;
  std::size_t spectrum_segment = 1024;
};

struct ExperimentConfig {
  RunKind run = RunKind::characterize;
  DetectorConfig detector = DetectorConfig::defaults();
  StateModel state;
  PhaseSpec phases;
  std::size_t n_pulses = 40000;
  std::uint64_t seed = 1;
  std::filesystem::path out = "pulsequad-out";
  TomographyOptions tomography;
  CharacterizeOptions characterize;

  /// Strict parse: unknown keys and invalid values throw ConfigError.
  static ExperimentConfig from_json(const nlohmann::json& doc);
  static ExperimentConfig load(const std::filesystem::path& file);
  void validate() const;
};

/// Creates the output directory and checks that it accepts files. Throws ConfigError.
void prepare_output_dir(const std::filesystem::path& dir);

// --- Building blocks (also used directly by the acceptance suite) -----------

NoiseCurve measure_noise_curve(const DetectorConfig& detector, const std::vector<double>& powers_w,
                               std::size_t n_pulses, std::uint64_t seed);

struct AllanRecordOptions {
  double record_s = 80.0;
  std::size_t full_rate_pulses = std::size_t{1} << 21;
  double block_s = 1e-3;
};

/// Calibrated vacuum Allan curve of one drift record. Short taus come from a
/// per-pulse record; taus >= block_s come from exact block-mean statistics.
AllanCurve simulate_allan_record(const DetectorConfig& detector, const AllanRecordOptions& options,
                                 std::uint64_t seed);

std::vector<CcPoint> measure_cc(const DetectorConfig& detector, const CalibrationScale& cal, std::size_t batches,
                                std::size_t batch_size, std::size_t max_lag, std::uint64_t seed);

struct CharacterizeResult {
  DetectorReport report;
  NoiseCurve noise;
  AllanCurve allan;
  SpectrumEstimate shot_spectrum;
  SpectrumEstimate elec_spectrum;
};

struct TomographyResult {
  QuadratureBatch samples;
  MleResult mle;
  std::optional<double> fidelity;
  double w00 = 0.0;
  PhotonStatistics photons;
  WignerGrid wigner;
};

CharacterizeResult run_characterize(const ExperimentConfig& config);
TomographyResult run_tomography(const ExperimentConfig& config);
SimulatedTrace run_trace_export(const ExperimentConfig& config);

/// Pure target vector for fidelity reporting, if `state` is pure.
std::optional<StateVector> pure_target(const StateModel& state, int dim);

}  // namespace pulsequad

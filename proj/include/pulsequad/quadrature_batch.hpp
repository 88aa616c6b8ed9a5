#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

namespace pulsequad {

/// LO phase per pulse. A single entry applies to every pulse.
struct PhaseSchedule {
  std::vector<double> values{0.0};

  double at(std::size_t k) const { return values.size() == 1 ? values.front() : values[k]; }
  bool fits(std::size_t n) const { return values.size() == 1 || values.size() == n; }

  static PhaseSchedule constant(double theta);
  /// `steps` equally spaced phases start + j*span/steps, each held for a contiguous block of pulses.
  static PhaseSchedule stepped(std::size_t n, std::size_t steps, double start, double span);
  /// Independent uniform phases in [0, 2pi).
  static PhaseSchedule uniform_random(std::size_t n, std::uint64_t seed);
};

/// Calibrated dimensionless quadrature samples. Phases are absent when the LO phase is unknown.
struct QuadratureBatch {
  std::vector<double> values;
  std::optional<std::vector<double>> phases;
  std::vector<double> timestamps;

  std::size_t size() const { return values.size(); }
  /// Throws std::invalid_argument on length mismatch or non-finite entries.
  void validate() const;
};

}  // namespace pulsequad

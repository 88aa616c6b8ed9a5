#include "pulsequad/quadrature_batch.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "pulsequad/random.hpp"

namespace pulsequad {

PhaseSchedule PhaseSchedule::constant(double theta) { return PhaseSchedule{{theta}}; }

PhaseSchedule PhaseSchedule::stepped(std::size_t n, std::size_t steps, double start, double span) {
  if (n == 0 || steps == 0) throw std::invalid_argument("stepped phases: n and steps must be positive");
  PhaseSchedule s;
  s.values.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t j = k * steps / n;
    s.values[k] = start + span * static_cast<double>(j) / static_cast<double>(steps);
  }
  return s;
}

PhaseSchedule PhaseSchedule::uniform_random(std::size_t n, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("uniform phases: n must be positive");
  Rng rng = make_rng(seed, 0x70686173);
  std::uniform_real_distribution<double> u(0.0, 2.0 * std::numbers::pi);
  PhaseSchedule s;
  s.values.resize(n);
  for (auto& v : s.values) v = u(rng);
  return s;
}

void QuadratureBatch::validate() const {
  if (phases && phases->size() != values.size())
    throw std::invalid_argument("QuadratureBatch: phases length differs from values");
  if (!timestamps.empty() && timestamps.size() != values.size())
    throw std::invalid_argument("QuadratureBatch: timestamps length differs from values");
  for (double v : values)
    if (!std::isfinite(v)) throw std::invalid_argument("QuadratureBatch: non-finite quadrature");
  if (phases)
    for (double v : *phases)
      if (!std::isfinite(v)) throw std::invalid_argument("QuadratureBatch: non-finite phase");
}

}  // namespace pulsequad

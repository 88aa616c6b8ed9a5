#pragma once

// File formats. CSVs carry one header row and '\n' line endings; numbers are
// printed with 17 significant digits so output is byte-reproducible.

#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "pulsequad/characterize.hpp"
#include "pulsequad/detector_sim.hpp"
#include "pulsequad/quadrature_batch.hpp"
#include "pulsequad/tomo.hpp"

namespace pulsequad {

/// Writes to a sibling temp file, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string trace_csv(const TraceBuffer& trace);
/// "PQTRACE1", sample_rate (f64 LE), count (u64 LE), then samples as f64 LE.
std::string trace_binary(const TraceBuffer& trace);
/// Inverse of trace_binary; t0 is not stored and comes back as 0. Throws std::runtime_error.
TraceBuffer parse_trace_binary(std::string_view bytes);

std::string quadratures_csv(const QuadratureBatch& batch);
std::string density_matrix_csv(const DensityMatrix& rho);
std::string wigner_csv(const WignerGrid& grid);
std::string photon_statistics_csv(const PhotonStatistics& stats);
std::string allan_csv(const AllanCurve& curve);
std::string spectrum_csv(const SpectrumEstimate& spectrum);
std::string noise_curve_csv(const NoiseCurve& curve);
std::string cc_csv(const std::vector<CcPoint>& cc);

nlohmann::ordered_json report_json(const DetectorReport& report);

}  // namespace pulsequad

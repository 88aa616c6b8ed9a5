#include "pulsequad/io.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace pulsequad {

namespace {

constexpr std::string_view kTraceMagic = "PQTRACE1";

void append_number(std::string& out, double v) {
  char buf[32];
  const int n = std::snprintf(buf, sizeof buf, "%.17g", v);
  out.append(buf, static_cast<std::size_t>(n));
}

template <class... Ts>
void append_row(std::string& out, Ts... values) {
  bool first = true;
  (
      [&] {
        if (!first) out.push_back(',');
        first = false;
        if constexpr (std::is_integral_v<Ts>)
          out += std::to_string(values);
        else
          append_number(out, values);
      }(),
      ...);
  out.push_back('\n');
}

template <class T>
void append_le(std::string& out, T value) {
  auto bits = std::bit_cast<std::uint64_t>(value);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

std::uint64_t read_le(std::string_view bytes, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t{static_cast<unsigned char>(bytes[at + i])} << (8 * i);
  return v;
}

}  // namespace

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!f) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string trace_csv(const TraceBuffer& trace) {
  std::string out = "time_s,voltage_v\n";
  out.reserve(out.size() + trace.samples.size() * 48);
  for (std::size_t i = 0; i < trace.samples.size(); ++i) append_row(out, trace.time_at(i), trace.samples[i]);
  return out;
}

std::string trace_binary(const TraceBuffer& trace) {
  std::string out(kTraceMagic);
  out.reserve(24 + 8 * trace.samples.size());
  append_le(out, trace.sample_rate);
  append_le(out, static_cast<std::uint64_t>(trace.samples.size()));
  for (double v : trace.samples) append_le(out, v);
  return out;
}

TraceBuffer parse_trace_binary(std::string_view bytes) {
  if (bytes.size() < 24 || bytes.substr(0, 8) != kTraceMagic) throw std::runtime_error("not a PQTRACE1 block");
  const std::uint64_t count = read_le(bytes, 16);
  if (bytes.size() != 24 + 8 * count) throw std::runtime_error("PQTRACE1 block has the wrong length");
  TraceBuffer t;
  t.sample_rate = std::bit_cast<double>(read_le(bytes, 8));
  t.samples.resize(count);
  for (std::uint64_t i = 0; i < count; ++i) t.samples[i] = std::bit_cast<double>(read_le(bytes, 24 + 8 * i));
  return t;
}

std::string quadratures_csv(const QuadratureBatch& batch) {
  batch.validate();
  std::string out = "timestamp_s,phase_rad,quadrature\n";
  for (std::size_t k = 0; k < batch.size(); ++k) {
    if (!batch.timestamps.empty()) append_number(out, batch.timestamps[k]);
    out.push_back(',');
    if (batch.phases) append_number(out, (*batch.phases)[k]);
    out.push_back(',');
    append_number(out, batch.values[k]);
    out.push_back('\n');
  }
  return out;
}

std::string density_matrix_csv(const DensityMatrix& rho) {
  std::string out = "m,n,re,im\n";
  for (int m = 0; m < rho.dim(); ++m)
    for (int n = 0; n < rho.dim(); ++n) append_row(out, m, n, rho(m, n).real(), rho(m, n).imag());
  return out;
}

std::string wigner_csv(const WignerGrid& grid) {
  std::string out = "x,p,w\n";
  for (std::size_t i = 0; i < grid.x_axis.size(); ++i)
    for (std::size_t j = 0; j < grid.p_axis.size(); ++j) append_row(out, grid.x_axis[i], grid.p_axis[j], grid.at(i, j));
  return out;
}

std::string photon_statistics_csv(const PhotonStatistics& stats) {
  std::string out = "n,p\n";
  for (std::size_t n = 0; n < stats.probs.size(); ++n) append_row(out, n, stats.probs[n]);
  return out;
}

std::string allan_csv(const AllanCurve& curve) {
  std::string out = "tau_s,allan_dev\n";
  for (std::size_t i = 0; i < curve.taus.size(); ++i) append_row(out, curve.taus[i], curve.deviations[i]);
  return out;
}

std::string spectrum_csv(const SpectrumEstimate& spectrum) {
  std::string out = "freq_hz,psd\n";
  for (std::size_t i = 0; i < spectrum.freqs.size(); ++i) append_row(out, spectrum.freqs[i], spectrum.psd[i]);
  return out;
}

std::string noise_curve_csv(const NoiseCurve& curve) {
  std::string out = "power_w,variance\n";
  for (const auto& [p, v] : curve.points) append_row(out, p, v);
  return out;
}

std::string cc_csv(const std::vector<CcPoint>& cc) {
  std::string out = "m,cc,std,std_analytic\n";
  for (const auto& c : cc) append_row(out, c.m, c.value, c.std, c.std_analytic);
  return out;
}

nlohmann::ordered_json report_json(const DetectorReport& report) {
  report.check();
  nlohmann::ordered_json cc = nlohmann::ordered_json::array();
  for (const auto& c : report.cc) cc.push_back({{"m", c.m}, {"value", c.value}, {"std", c.std}, {"std_analytic", c.std_analytic}});
  nlohmann::ordered_json j;
  j["snr_db"] = report.snr_db ? nlohmann::ordered_json(*report.snr_db) : nlohmann::ordered_json(nullptr);
  j["eta_en"] = report.eta_en;
  j["eta_pd"] = report.eta_pd;
  j["eta_bhd"] = report.eta_bhd;
  j["bandwidth_hz"] = report.bandwidth_hz;
  j["cc"] = std::move(cc);
  j["cmrr_db"] = report.cmrr_db;
  j["stability_interval_s"] = report.stability_interval_s;
  j["tbp"] = report.tbp;
  return j;
}

}  // namespace pulsequad

#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "flowse/audio.hpp"
#include "flowse/paths.hpp"

namespace flowse {

/// 17 significant digits: enough for binary64 round trips through text.
inline std::string format_float(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create directory " + dir + ": " + ec.message());
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!f) throw std::runtime_error("write failed on " + path);
}

inline void write_csv(const std::string& path, const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& rows) {
  std::string out;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) out += ",";
    out += header[i];
  }
  out += "\n";
  for (const auto& row : rows) {
    if (row.size() != header.size())
      throw std::invalid_argument("write_csv: row width does not match header");
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ",";
      out += format_float(row[i]);
    }
    out += "\n";
  }
  write_text_file(path, out);
}

inline void write_schedule_csv(const std::string& path, const std::vector<PathPoint>& curve) {
  std::vector<std::vector<double>> rows;
  rows.reserve(curve.size());
  for (const PathPoint& p : curve) rows.push_back({p.t, p.alpha, p.beta, p.var});
  write_csv(path, {"t", "alpha", "beta", "var"}, rows);
}

/// One row per pair: x0 coordinates then y coordinates.
inline void write_pairs_csv(const std::string& path, const PairedBatch& batch) {
  batch.validate();
  std::vector<std::string> header;
  for (std::size_t j = 0; j < batch.dim; ++j) header.push_back("x0_" + std::to_string(j));
  for (std::size_t j = 0; j < batch.dim; ++j) header.push_back("y_" + std::to_string(j));
  std::vector<std::vector<double>> rows;
  rows.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    std::vector<double> row = batch.x0[i];
    row.insert(row.end(), batch.y[i].begin(), batch.y[i].end());
    rows.push_back(std::move(row));
  }
  write_csv(path, header, rows);
}

inline void write_spectrogram_csv(const std::string& path, const ComplexSpectrogram& spec) {
  spec.validate();
  std::vector<std::vector<double>> rows;
  rows.reserve(spec.n_frames * spec.n_bins);
  for (std::size_t f = 0; f < spec.n_frames; ++f)
    for (std::size_t b = 0; b < spec.n_bins; ++b)
      rows.push_back({static_cast<double>(f), static_cast<double>(b), spec.at(f, b).real(),
                      spec.at(f, b).imag()});
  write_csv(path, {"frame", "bin", "re", "im"}, rows);
}

inline void write_json_file(const std::string& path, const nlohmann::json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

}  // namespace flowse

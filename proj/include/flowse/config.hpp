#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "flowse/audio.hpp"
#include "flowse/model.hpp"
#include "flowse/oracle.hpp"
#include "flowse/paths.hpp"
#include "flowse/sampler.hpp"

namespace flowse {

// Run configuration: one key-value tree file per run, TOML-style. Only the
// subset the tool needs is implemented: [section] headers, `key = value`
// lines, # comments, and values that are strings, booleans, numbers, or flat
// integer lists. Unknown keys are rejected so typos fail loudly.

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

/// Drops an unquoted # comment tail.
inline std::string strip_comment(const std::string& line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') in_string = !in_string;
    if (line[i] == '#' && !in_string) return line.substr(0, i);
  }
  return line;
}

}  // namespace detail

class ConfigTree {
 public:
  ConfigTree() = default;

  static ConfigTree parse_text(const std::string& text) {
    ConfigTree tree;
    std::istringstream in(text);
    std::string raw_line;
    std::string section;
    int line_no = 0;
    while (std::getline(in, raw_line)) {
      ++line_no;
      const std::string line = detail::trim(detail::strip_comment(raw_line));
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']')
          throw ConfigError("config line " + std::to_string(line_no) +
                            ": unterminated section header");
        section = detail::trim(line.substr(1, line.size() - 2));
        if (section.empty())
          throw ConfigError("config line " + std::to_string(line_no) + ": empty section name");
        continue;
      }
      const std::size_t eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError("config line " + std::to_string(line_no) +
                          ": expected `key = value`");
      const std::string key = detail::trim(line.substr(0, eq));
      const std::string value = detail::trim(line.substr(eq + 1));
      if (key.empty())
        throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
      if (value.empty())
        throw ConfigError("config line " + std::to_string(line_no) + ": empty value for " + key);
      if (!tree.values_[section].emplace(key, value).second)
        throw ConfigError("config line " + std::to_string(line_no) + ": duplicate key " +
                          qualified(section, key));
    }
    return tree;
  }

  static ConfigTree parse_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("config: cannot open " + path);
    std::ostringstream buf;
    buf << f.rdbuf();
    return parse_text(buf.str());
  }

  bool has(const std::string& section, const std::string& key) const {
    const auto sit = values_.find(section);
    return sit != values_.end() && sit->second.count(key) > 0;
  }

  std::int64_t get_int(const std::string& section, const std::string& key,
                       std::int64_t fallback) const {
    const std::string* raw = lookup(section, key);
    if (!raw) return fallback;
    std::int64_t out = 0;
    const auto [ptr, ec] = std::from_chars(raw->data(), raw->data() + raw->size(), out);
    if (ec != std::errc() || ptr != raw->data() + raw->size())
      throw ConfigError("config: " + qualified(section, key) + ": expected integer, got `" +
                        *raw + "`");
    return out;
  }

  std::uint64_t get_u64(const std::string& section, const std::string& key,
                        std::uint64_t fallback) const {
    const std::string* raw = lookup(section, key);
    if (!raw) return fallback;
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(raw->data(), raw->data() + raw->size(), out);
    if (ec != std::errc() || ptr != raw->data() + raw->size())
      throw ConfigError("config: " + qualified(section, key) +
                        ": expected unsigned integer, got `" + *raw + "`");
    return out;
  }

  double get_double(const std::string& section, const std::string& key, double fallback) const {
    const std::string* raw = lookup(section, key);
    if (!raw) return fallback;
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(raw->data(), raw->data() + raw->size(), out);
    if (ec != std::errc() || ptr != raw->data() + raw->size())
      throw ConfigError("config: " + qualified(section, key) + ": expected number, got `" +
                        *raw + "`");
    return out;
  }

  bool get_bool(const std::string& section, const std::string& key, bool fallback) const {
    const std::string* raw = lookup(section, key);
    if (!raw) return fallback;
    if (*raw == "true") return true;
    if (*raw == "false") return false;
    throw ConfigError("config: " + qualified(section, key) + ": expected true or false, got `" +
                      *raw + "`");
  }

  std::string get_string(const std::string& section, const std::string& key,
                         const std::string& fallback) const {
    const std::string* raw = lookup(section, key);
    if (!raw) return fallback;
    if (raw->size() < 2 || raw->front() != '"' || raw->back() != '"')
      throw ConfigError("config: " + qualified(section, key) + ": expected a quoted string, got `" +
                        *raw + "`");
    const std::string body = raw->substr(1, raw->size() - 2);
    if (body.find('"') != std::string::npos || body.find('\\') != std::string::npos)
      throw ConfigError("config: " + qualified(section, key) +
                        ": escapes and embedded quotes are not supported");
    return body;
  }

  std::vector<int> get_int_list(const std::string& section, const std::string& key,
                                const std::vector<int>& fallback) const {
    const std::string* raw = lookup(section, key);
    if (!raw) return fallback;
    if (raw->size() < 2 || raw->front() != '[' || raw->back() != ']')
      throw ConfigError("config: " + qualified(section, key) + ": expected [a, b, ...], got `" +
                        *raw + "`");
    std::vector<int> out;
    std::string body = raw->substr(1, raw->size() - 2);
    std::istringstream in(body);
    std::string item;
    while (std::getline(in, item, ',')) {
      const std::string token = detail::trim(item);
      if (token.empty())
        throw ConfigError("config: " + qualified(section, key) + ": empty list element");
      int v = 0;
      const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
      if (ec != std::errc() || ptr != token.data() + token.size())
        throw ConfigError("config: " + qualified(section, key) +
                          ": expected integer list element, got `" + token + "`");
      out.push_back(v);
    }
    if (out.empty() && !detail::trim(body).empty())
      throw ConfigError("config: " + qualified(section, key) + ": malformed list");
    return out;
  }

  /// Keys present in the file that no getter asked about; nonempty means the
  /// file holds something the tool would silently ignore.
  std::vector<std::string> unconsumed() const {
    std::vector<std::string> out;
    for (const auto& [section, kv] : values_)
      for (const auto& [key, value] : kv)
        if (consumed_.count(qualified(section, key)) == 0)
          out.push_back(qualified(section, key));
    return out;
  }

 private:
  static std::string qualified(const std::string& section, const std::string& key) {
    return section.empty() ? key : section + "." + key;
  }

  const std::string* lookup(const std::string& section, const std::string& key) const {
    consumed_.insert(qualified(section, key));
    const auto sit = values_.find(section);
    if (sit == values_.end()) return nullptr;
    const auto kit = sit->second.find(key);
    if (kit == sit->second.end()) return nullptr;
    return &kit->second;
  }

  std::map<std::string, std::map<std::string, std::string>> values_;
  mutable std::set<std::string> consumed_;
};

enum class DataKind { GaussianWorld1d, TwoArcs2d, Audio };

inline const char* data_kind_name(DataKind k) {
  switch (k) {
    case DataKind::GaussianWorld1d: return "gaussian-world";
    case DataKind::TwoArcs2d: return "two-arcs-2d";
    case DataKind::Audio: return "audio";
  }
  return "?";
}

inline DataKind data_kind_from_name(const std::string& s) {
  if (s == "gaussian-world") return DataKind::GaussianWorld1d;
  if (s == "two-arcs-2d") return DataKind::TwoArcs2d;
  if (s == "audio") return DataKind::Audio;
  throw std::invalid_argument("unknown data kind: " + s);
}

/// Everything a run needs, bound to config sections. A run is reproducible
/// from this plus nothing else.
struct RunConfig {
  std::uint64_t seed = 0;
  std::string out_dir = "out";

  PathSpec path;  // [path]
  BarSigmaConvention bar_sigma = BarSigmaConvention::Difference;

  int schedule_points = 201;  // [schedule]

  TrainConfig train;  // [train]; path/seed mirrored from above on load

  InferenceMode mode = InferenceMode::Ode;  // [inference]
  int ode_steps = 50;
  double t_max = 1.0;
  std::vector<int> sweep_steps = {1, 2, 5, 10, 20, 30, 50};

  DataKind data_kind = DataKind::GaussianWorld1d;  // [data]
  int eval_size = 2000;

  SynthConfig synth;  // [audio]
  int n_clips = 4;
  int stft_window = 512;
  int stft_hop = 128;

  void validate() const {
    path.validate();
    train.validate();
    if (schedule_points < 2) throw ConfigError("config: schedule.n_points must be >= 2");
    if (ode_steps < 1) throw ConfigError("config: inference.n_steps must be >= 1");
    if (!(t_max > 0.0 && t_max <= 1.0))
      throw ConfigError("config: inference.t_max must lie in (0, 1]");
    if (sweep_steps.empty()) throw ConfigError("config: inference.sweep_steps must be nonempty");
    for (int n : sweep_steps)
      if (n < 1) throw ConfigError("config: inference.sweep_steps entries must be >= 1");
    if (eval_size < 1) throw ConfigError("config: data.eval_size must be >= 1");
    if (n_clips < 1) throw ConfigError("config: audio.n_clips must be >= 1");
    if (stft_window < 2 || (stft_window & (stft_window - 1)) != 0)
      throw ConfigError("config: audio.stft_window must be a power of two");
    if (stft_hop < 1 || stft_hop >= stft_window)
      throw ConfigError("config: audio.stft_hop must satisfy 0 < hop < window");
    synth.validate();
  }
};

inline RunConfig run_config_from_tree(const ConfigTree& t) {
  RunConfig c;
  const RunConfig defaults;
  try {
    c.seed = t.get_u64("", "seed", defaults.seed);
    c.out_dir = t.get_string("", "out", defaults.out_dir);

    c.path.family = family_from_name(
        t.get_string("path", "family", family_name(defaults.path.family)));
    c.path.k = t.get_double("path", "k", defaults.path.k);
    c.path.c = t.get_double("path", "c", defaults.path.c);
    c.bar_sigma = bar_sigma_from_name(
        t.get_string("path", "bar_sigma", bar_sigma_name(defaults.bar_sigma)));

    c.schedule_points =
        static_cast<int>(t.get_int("schedule", "n_points", defaults.schedule_points));

    c.train.loss_kind =
        loss_from_name(t.get_string("train", "loss", loss_name(defaults.train.loss_kind)));
    c.train.n_steps = static_cast<int>(t.get_int("train", "steps", defaults.train.n_steps));
    c.train.batch_size =
        static_cast<int>(t.get_int("train", "batch_size", defaults.train.batch_size));
    c.train.learning_rate =
        t.get_double("train", "learning_rate", defaults.train.learning_rate);
    c.train.hidden = t.get_int_list("train", "hidden", defaults.train.hidden);
    c.train.activation = activation_from_name(
        t.get_string("train", "activation", activation_name(defaults.train.activation)));
    c.train.time_feature_dim = static_cast<int>(
        t.get_int("train", "time_feature_dim", defaults.train.time_feature_dim));
    c.train.t_min = t.get_double("train", "t_min", defaults.train.t_min);

    c.mode = inference_mode_from_name(
        t.get_string("inference", "mode", inference_mode_name(defaults.mode)));
    c.ode_steps = static_cast<int>(t.get_int("inference", "n_steps", defaults.ode_steps));
    c.t_max = t.get_double("inference", "t_max", defaults.t_max);
    c.sweep_steps = t.get_int_list("inference", "sweep_steps", defaults.sweep_steps);

    c.data_kind = data_kind_from_name(
        t.get_string("data", "kind", data_kind_name(defaults.data_kind)));
    c.eval_size = static_cast<int>(t.get_int("data", "eval_size", defaults.eval_size));

    c.synth.duration_s = t.get_double("audio", "duration_s", defaults.synth.duration_s);
    c.synth.sample_rate = t.get_double("audio", "sample_rate", defaults.synth.sample_rate);
    c.synth.f0_min_hz = t.get_double("audio", "f0_min_hz", defaults.synth.f0_min_hz);
    c.synth.f0_max_hz = t.get_double("audio", "f0_max_hz", defaults.synth.f0_max_hz);
    c.synth.n_harmonics =
        static_cast<int>(t.get_int("audio", "n_harmonics", defaults.synth.n_harmonics));
    c.synth.noise_color = noise_color_from_name(
        t.get_string("audio", "noise_color", noise_color_name(defaults.synth.noise_color)));
    c.synth.snr_db_min = t.get_double("audio", "snr_db_min", defaults.synth.snr_db_min);
    c.synth.snr_db_max = t.get_double("audio", "snr_db_max", defaults.synth.snr_db_max);
    c.n_clips = static_cast<int>(t.get_int("audio", "n_clips", defaults.n_clips));
    c.stft_window = static_cast<int>(t.get_int("audio", "stft_window", defaults.stft_window));
    c.stft_hop = static_cast<int>(t.get_int("audio", "stft_hop", defaults.stft_hop));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }

  const std::vector<std::string> extra = t.unconsumed();
  if (!extra.empty()) {
    std::string msg = "config: unknown key(s):";
    for (const std::string& k : extra) msg += " " + k;
    throw ConfigError(msg);
  }

  c.train.path = c.path;
  c.train.seed = c.seed;
  c.train.noise_domain =
      c.data_kind == DataKind::Audio ? NoiseDomain::ComplexInterleaved : NoiseDomain::Real;
  try {
    c.validate();
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  return c;
}

namespace detail {

inline std::string config_number(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  std::string s(buf, ptr);
  // Keep floats visually distinct from integers.
  if (s.find('.') == std::string::npos && s.find('e') == std::string::npos &&
      s.find("inf") == std::string::npos && s.find("nan") == std::string::npos)
    s += ".0";
  return s;
}

inline std::string config_int_list(const std::vector<int>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(v[i]);
  }
  s += "]";
  return s;
}

}  // namespace detail

/// Serializes a RunConfig to config text that parses back to the same values.
inline std::string config_to_text(const RunConfig& c) {
  std::ostringstream out;
  out << "seed = " << c.seed << "\n";
  out << "out = \"" << c.out_dir << "\"\n";
  out << "\n[path]\n";
  out << "family = \"" << family_name(c.path.family) << "\"  # sb-ve | sb-sv | icfm\n";
  out << "k = " << detail::config_number(c.path.k) << "\n";
  out << "c = " << detail::config_number(c.path.c) << "\n";
  out << "bar_sigma = \"" << bar_sigma_name(c.bar_sigma)
      << "\"  # difference | root-of-squares\n";
  out << "\n[schedule]\n";
  out << "n_points = " << c.schedule_points << "\n";
  out << "\n[train]\n";
  out << "loss = \"" << loss_name(c.train.loss_kind) << "\"  # dp | fm\n";
  out << "steps = " << c.train.n_steps << "\n";
  out << "batch_size = " << c.train.batch_size << "\n";
  out << "learning_rate = " << detail::config_number(c.train.learning_rate) << "\n";
  out << "hidden = " << detail::config_int_list(c.train.hidden) << "\n";
  out << "activation = \"" << activation_name(c.train.activation)
      << "\"  # gelu | softplus | tanh\n";
  out << "time_feature_dim = " << c.train.time_feature_dim << "\n";
  out << "t_min = " << detail::config_number(c.train.t_min) << "\n";
  out << "\n[inference]\n";
  out << "mode = \"" << inference_mode_name(c.mode) << "\"  # ode | ddp\n";
  out << "n_steps = " << c.ode_steps << "\n";
  out << "t_max = " << detail::config_number(c.t_max) << "\n";
  out << "sweep_steps = " << detail::config_int_list(c.sweep_steps) << "\n";
  out << "\n[data]\n";
  out << "kind = \"" << data_kind_name(c.data_kind)
      << "\"  # gaussian-world | two-arcs-2d | audio\n";
  out << "eval_size = " << c.eval_size << "\n";
  out << "\n[audio]\n";
  out << "duration_s = " << detail::config_number(c.synth.duration_s) << "\n";
  out << "sample_rate = " << detail::config_number(c.synth.sample_rate) << "\n";
  out << "f0_min_hz = " << detail::config_number(c.synth.f0_min_hz) << "\n";
  out << "f0_max_hz = " << detail::config_number(c.synth.f0_max_hz) << "\n";
  out << "n_harmonics = " << c.synth.n_harmonics << "\n";
  out << "noise_color = \"" << noise_color_name(c.synth.noise_color) << "\"  # white | pink\n";
  out << "snr_db_min = " << detail::config_number(c.synth.snr_db_min) << "\n";
  out << "snr_db_max = " << detail::config_number(c.synth.snr_db_max) << "\n";
  out << "n_clips = " << c.n_clips << "\n";
  out << "stft_window = " << c.stft_window << "\n";
  out << "stft_hop = " << c.stft_hop << "\n";
  return out.str();
}

inline std::string dump_default_config() { return config_to_text(RunConfig{}); }

}  // namespace flowse

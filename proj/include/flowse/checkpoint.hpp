#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "flowse/model.hpp"
#include "flowse/paths.hpp"

namespace flowse {

// Checkpoint container: 8-byte magic, a little-endian u64 header length, a
// JSON header describing shapes and the path spec, then the raw parameter
// doubles (layer order, weights before biases). The JSON key order is fixed
// by the library, so identical models serialize byte-identically.

inline constexpr char kCheckpointMagic[8] = {'F', 'L', 'O', 'W', 'C', 'K', 'P', '1'};

struct Checkpoint {
  PredictorModel model;
  PathSpec path;
};

inline void save_checkpoint(const std::string& file, const Checkpoint& ckp) {
  ckp.model.validate();
  ckp.path.validate();
  nlohmann::json header;
  header["format"] = 1;
  header["activation"] = activation_name(ckp.model.activation);
  header["loss_kind"] = loss_name(ckp.model.loss_kind);
  header["data_dim"] = ckp.model.data_dim;
  header["time_feature_dim"] = ckp.model.time_feature_dim;
  nlohmann::json layers = nlohmann::json::array();
  for (const DenseLayer& l : ckp.model.layers)
    layers.push_back({{"in", l.in}, {"out", l.out}});
  header["layers"] = layers;
  header["path"] = {{"family", family_name(ckp.path.family)},
                    {"k", ckp.path.k},
                    {"c", ckp.path.c}};
  header["param_count"] = parameter_count(ckp.model);
  const std::string htext = header.dump();

  std::ofstream f(file, std::ios::binary);
  if (!f) throw std::runtime_error("save_checkpoint: cannot open " + file);
  f.write(kCheckpointMagic, 8);
  const std::uint64_t hlen = htext.size();
  char lenbuf[8];
  for (int i = 0; i < 8; ++i) lenbuf[i] = static_cast<char>((hlen >> (8 * i)) & 0xff);
  f.write(lenbuf, 8);
  f.write(htext.data(), static_cast<std::streamsize>(htext.size()));
  for (const DenseLayer& l : ckp.model.layers) {
    const auto dump = [&f](const std::vector<double>& v) {
      f.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
    };
    dump(l.w);
    dump(l.b);
  }
  if (!f) throw std::runtime_error("save_checkpoint: write failed on " + file);
}

inline Checkpoint load_checkpoint(const std::string& file) {
  std::ifstream f(file, std::ios::binary);
  if (!f) throw std::runtime_error("load_checkpoint: cannot open " + file);
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw std::runtime_error("load_checkpoint: bad magic in " + file);
  char lenbuf[8];
  f.read(lenbuf, 8);
  if (!f) throw std::runtime_error("load_checkpoint: truncated header in " + file);
  std::uint64_t hlen = 0;
  for (int i = 0; i < 8; ++i)
    hlen |= static_cast<std::uint64_t>(static_cast<unsigned char>(lenbuf[i])) << (8 * i);
  if (hlen > (1u << 20))
    throw std::runtime_error("load_checkpoint: implausible header length in " + file);
  std::string htext(hlen, '\0');
  f.read(htext.data(), static_cast<std::streamsize>(hlen));
  if (!f) throw std::runtime_error("load_checkpoint: truncated header in " + file);

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(htext);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("load_checkpoint: bad header JSON in " + file + ": " + e.what());
  }

  Checkpoint ckp;
  try {
    if (header.at("format").get<int>() != 1)
      throw std::runtime_error("unsupported format version");
    ckp.model.activation = activation_from_name(header.at("activation").get<std::string>());
    ckp.model.loss_kind = loss_from_name(header.at("loss_kind").get<std::string>());
    ckp.model.data_dim = header.at("data_dim").get<int>();
    ckp.model.time_feature_dim = header.at("time_feature_dim").get<int>();
    for (const auto& l : header.at("layers")) {
      DenseLayer layer;
      layer.in = l.at("in").get<int>();
      layer.out = l.at("out").get<int>();
      layer.w.resize(static_cast<std::size_t>(layer.in) * static_cast<std::size_t>(layer.out));
      layer.b.resize(static_cast<std::size_t>(layer.out));
      ckp.model.layers.push_back(std::move(layer));
    }
    ckp.path.family = family_from_name(header.at("path").at("family").get<std::string>());
    ckp.path.k = header.at("path").at("k").get<double>();
    ckp.path.c = header.at("path").at("c").get<double>();
    const std::uint64_t declared = header.at("param_count").get<std::uint64_t>();
    if (declared != parameter_count(ckp.model))
      throw std::runtime_error("parameter count does not match layer shapes");
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("load_checkpoint: malformed header in " + file + ": " + e.what());
  }

  for (DenseLayer& l : ckp.model.layers) {
    const auto slurp = [&f, &file](std::vector<double>& v) {
      f.read(reinterpret_cast<char*>(v.data()),
             static_cast<std::streamsize>(v.size() * sizeof(double)));
      if (!f) throw std::runtime_error("load_checkpoint: truncated parameters in " + file);
    };
    slurp(l.w);
    slurp(l.b);
  }
  f.peek();
  if (!f.eof())
    throw std::runtime_error("load_checkpoint: trailing bytes after parameters in " + file);
  ckp.model.validate();
  ckp.path.validate();
  return ckp;
}

}  // namespace flowse

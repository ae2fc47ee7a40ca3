#include "bclstm/model_io.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace bclstm {

namespace fs = std::filesystem;
using nlohmann::json;

std::uint64_t fnv1a64(const void* data, std::size_t len) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  std::uint64_t hash = 14695981039346656037ULL;
  for (std::size_t i = 0; i < len; ++i) {
    hash ^= bytes[i];
    hash *= 1099511628211ULL;
  }
  return hash;
}

std::string fnv1a64_hex(const void* data, std::size_t len) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(data, len)));
  return std::string(buf);
}

json arch_to_json(const LstmArchSpec& arch) {
  json j;
  j["name"] = arch.name;
  j["input_dim"] = arch.input_dim;
  j["hidden_dim"] = arch.hidden_dim;
  j["projection_dim"] = arch.projection_dim;
  j["num_layers"] = arch.num_layers;
  j["bidirectional"] = arch.bidirectional;
  j["peephole"] = arch.peephole;
  j["projection"] = arch.projection;
  j["block_size"] = arch.block_size;
  j["gate_activation"] =
      arch.gate_activation == GateActivation::Sigmoid ? "sigmoid" : "tanh";
  return j;
}

LstmArchSpec arch_from_json(const json& j) {
  LstmArchSpec arch;
  arch.name = j.value("name", "custom");
  arch.input_dim = j.at("input_dim").get<std::size_t>();
  arch.hidden_dim = j.at("hidden_dim").get<std::size_t>();
  arch.projection_dim = j.value("projection_dim", std::size_t{0});
  arch.num_layers = j.value("num_layers", std::size_t{1});
  arch.bidirectional = j.value("bidirectional", false);
  arch.peephole = j.value("peephole", false);
  arch.projection = j.value("projection", false);
  arch.block_size = j.value("block_size", std::size_t{1});
  const std::string act = j.value("gate_activation", "sigmoid");
  if (act == "sigmoid") {
    arch.gate_activation = GateActivation::Sigmoid;
  } else if (act == "tanh") {
    arch.gate_activation = GateActivation::Tanh;
  } else {
    throw std::invalid_argument("arch: unknown gate activation '" + act + "'");
  }
  arch.validate();
  return arch;
}

namespace {

struct BinWriter {
  std::ofstream out;
  std::size_t offset = 0;

  explicit BinWriter(const fs::path& path)
      : out(path, std::ios::binary | std::ios::trunc) {
    if (!out) throw std::runtime_error("cannot open " + path.string());
  }

  template <typename T>
  std::pair<std::size_t, std::string> append(const std::vector<T>& data) {
    const std::size_t bytes = data.size() * sizeof(T);
    const std::size_t at = offset;
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(bytes));
    offset += bytes;
    return {at, fnv1a64_hex(data.data(), bytes)};
  }
};

std::vector<char> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  const std::streamsize size = in.tellg();
  in.seekg(0);
  std::vector<char> buf(static_cast<std::size_t>(size));
  in.read(buf.data(), size);
  return buf;
}

template <typename T>
std::vector<T> slice(const std::vector<char>& file, std::size_t offset,
                     std::size_t count, const std::string& name,
                     const std::string& expect_hash) {
  const std::size_t bytes = count * sizeof(T);
  if (offset + bytes > file.size()) {
    throw std::runtime_error("bundle: tensor '" + name + "' out of range");
  }
  if (fnv1a64_hex(file.data() + offset, bytes) != expect_hash) {
    throw std::runtime_error("bundle: hash mismatch for tensor '" + name + "'");
  }
  std::vector<T> data(count);
  std::memcpy(data.data(), file.data() + offset, bytes);
  return data;
}

json tensor_entry(const std::string& name, const std::string& kind,
                  const std::string& dtype, const std::string& file,
                  std::size_t offset, std::size_t count,
                  const std::string& hash) {
  json t;
  t["name"] = name;
  t["kind"] = kind;
  t["dtype"] = dtype;
  t["file"] = file;
  t["offset"] = offset;
  t["count"] = count;
  t["fnv1a64"] = hash;
  return t;
}

std::vector<double> spectrum_to_f64(const SpectralWeights& sw) {
  std::vector<double> flat;
  flat.reserve(sw.spectra.size() * (sw.k / 2 + 1) * 2);
  for (const auto& s : sw.spectra) {
    for (const auto& bin : s.bins) {
      flat.push_back(bin.real());
      flat.push_back(bin.imag());
    }
  }
  return flat;
}

std::vector<std::int16_t> spectrum_to_i16(const FxpSpectralWeights& sw) {
  std::vector<std::int16_t> flat;
  flat.reserve(sw.spectra.size() * (sw.k / 2 + 1) * 2);
  for (const auto& s : sw.spectra) {
    for (const auto& bin : s.bins) {
      flat.push_back(bin.re);
      flat.push_back(bin.im);
    }
  }
  return flat;
}

}  // namespace

void save_bundle(const std::string& dir, const ModelBundle& bundle,
                 bool with_spectra) {
  const fs::path root(dir);
  fs::create_directories(root);
  BinWriter weights_bin(root / "weights.bin");
  json tensors = json::array();

  auto put_f64 = [&](const std::string& name, const std::string& kind,
                     const std::vector<double>& data) {
    auto [offset, hash] = weights_bin.append(data);
    tensors.push_back(tensor_entry(name, kind, "f64le", "weights.bin", offset,
                                   data.size(), hash));
  };

  const LstmArchSpec& arch = bundle.weights.arch;
  static const char* kGateNames[4] = {"gate_i", "gate_f", "gate_c", "gate_o"};
  for (std::size_t layer = 0; layer < bundle.weights.layers.size(); ++layer) {
    for (std::size_t d = 0; d < bundle.weights.layers[layer].size(); ++d) {
      const auto& dw = bundle.weights.layers[layer][d];
      const std::string prefix =
          "layer" + std::to_string(layer) + (d == 0 ? ".fwd." : ".bwd.");
      for (std::size_t g = 0; g < 4; ++g) {
        put_f64(prefix + kGateNames[g] + ".w", "block_circulant",
                dw.gates[g].w.data());
        put_f64(prefix + kGateNames[g] + ".bias", "vector", dw.gates[g].bias);
      }
      if (arch.peephole) {
        put_f64(prefix + "peep_i", "vector", dw.peep_i);
        put_f64(prefix + "peep_f", "vector", dw.peep_f);
        put_f64(prefix + "peep_o", "vector", dw.peep_o);
      }
      if (dw.projection) {
        put_f64(prefix + "projection", "block_circulant",
                dw.projection->data());
      }
    }
  }

  json spectra_entries = json::array();
  with_spectra = with_spectra && arch.block_size > 1;  // no transforms at k=1
  if (with_spectra) {
    BinWriter spectra_bin(root / "spectra.bin");
    auto put_spectrum = [&](const std::string& name,
                            const BlockCirculantMatrix& w) {
      const SpectralWeights sw = SpectralWeights::from(w);
      const FxpFormat fmt = format_for_range(max_abs_bin(sw));
      const FxpSpectralWeights swq = FxpSpectralWeights::from(sw, fmt);
      const auto f64 = spectrum_to_f64(sw);
      auto [off_f, hash_f] = spectra_bin.append(f64);
      json entry = tensor_entry(name + ".spectrum", "packed_spectrum", "f64le",
                                "spectra.bin", off_f, f64.size(), hash_f);
      const auto i16 = spectrum_to_i16(swq);
      auto [off_q, hash_q] = spectra_bin.append(i16);
      json qentry = tensor_entry(name + ".spectrum_q", "packed_spectrum",
                                 "i16le", "spectra.bin", off_q, i16.size(),
                                 hash_q);
      qentry["fxp_format"] = fmt.to_string();
      spectra_entries.push_back(entry);
      spectra_entries.push_back(qentry);
    };
    for (std::size_t layer = 0; layer < bundle.weights.layers.size(); ++layer) {
      for (std::size_t d = 0; d < bundle.weights.layers[layer].size(); ++d) {
        const auto& dw = bundle.weights.layers[layer][d];
        const std::string prefix =
            "layer" + std::to_string(layer) + (d == 0 ? ".fwd." : ".bwd.");
        for (std::size_t g = 0; g < 4; ++g) {
          put_spectrum(prefix + kGateNames[g] + ".w", dw.gates[g].w);
        }
        if (dw.projection) put_spectrum(prefix + "projection", *dw.projection);
      }
    }
  }

  json manifest;
  manifest["format_version"] = 1;
  manifest["arch"] = arch_to_json(arch);
  manifest["datapath"] = bundle.datapath.to_string();
  manifest["seed"] = bundle.seed;
  manifest["tensors"] = tensors;
  manifest["spectra"] = json{{"present", with_spectra},
                             {"entries", spectra_entries}};
  std::ofstream mf(root / "manifest.json", std::ios::trunc);
  if (!mf) throw std::runtime_error("cannot write manifest.json");
  mf << manifest.dump(2) << '\n';
}

ModelBundle load_bundle(const std::string& dir, bool verify_spectra) {
  const fs::path root(dir);
  std::ifstream mf(root / "manifest.json");
  if (!mf) {
    throw std::runtime_error("bundle: missing manifest.json in " + dir);
  }
  json manifest;
  mf >> manifest;

  ModelBundle bundle;
  const LstmArchSpec arch = arch_from_json(manifest.at("arch"));
  bundle.datapath = parse_format(manifest.at("datapath").get<std::string>());
  bundle.seed = manifest.value("seed", std::uint64_t{0});
  bundle.has_spectra = manifest.at("spectra").at("present").get<bool>();

  const std::vector<char> weights_file = read_file(root / "weights.bin");
  std::size_t cursor = 0;
  const json& tensors = manifest.at("tensors");
  auto next_f64 = [&](const std::string& name) {
    if (cursor >= tensors.size()) {
      throw std::invalid_argument("bundle: manifest missing tensor '" + name + "'");
    }
    const json& t = tensors[cursor++];
    if (t.at("name").get<std::string>() != name) {
      throw std::invalid_argument("bundle: expected tensor '" + name +
                                  "', found '" +
                                  t.at("name").get<std::string>() + "'");
    }
    return slice<double>(weights_file, t.at("offset").get<std::size_t>(),
                         t.at("count").get<std::size_t>(), name,
                         t.at("fnv1a64").get<std::string>());
  };

  static const char* kGateNames[4] = {"gate_i", "gate_f", "gate_c", "gate_o"};
  bundle.weights.arch = arch;
  bundle.weights.layers.resize(arch.num_layers);
  for (std::size_t layer = 0; layer < arch.num_layers; ++layer) {
    auto& dirs = bundle.weights.layers[layer];
    dirs.resize(arch.num_directions());
    for (std::size_t d = 0; d < dirs.size(); ++d) {
      auto& dw = dirs[d];
      const std::string prefix =
          "layer" + std::to_string(layer) + (d == 0 ? ".fwd." : ".bwd.");
      const std::size_t fused = arch.fused_input_dim(layer);
      for (std::size_t g = 0; g < 4; ++g) {
        dw.gates[g].w =
            BlockCirculantMatrix(arch.hidden_dim, fused, arch.block_size);
        auto data = next_f64(prefix + kGateNames[g] + std::string(".w"));
        if (data.size() != dw.gates[g].w.data().size()) {
          throw std::runtime_error("bundle: tensor size mismatch");
        }
        dw.gates[g].w.data() = std::move(data);
        dw.gates[g].bias = next_f64(prefix + kGateNames[g] + std::string(".bias"));
      }
      if (arch.peephole) {
        dw.peep_i = next_f64(prefix + "peep_i");
        dw.peep_f = next_f64(prefix + "peep_f");
        dw.peep_o = next_f64(prefix + "peep_o");
      }
      if (arch.projection) {
        dw.projection = BlockCirculantMatrix(arch.projection_dim,
                                             arch.hidden_dim, arch.block_size);
        auto data = next_f64(prefix + "projection");
        if (data.size() != dw.projection->data().size()) {
          throw std::runtime_error("bundle: tensor size mismatch");
        }
        dw.projection->data() = std::move(data);
      }
    }
  }

  if (bundle.has_spectra && verify_spectra) {
    const std::vector<char> spectra_file = read_file(root / "spectra.bin");
    const json& entries = manifest.at("spectra").at("entries");
    std::size_t scursor = 0;
    auto check_spectrum = [&](const std::string& name,
                              const BlockCirculantMatrix& w) {
      const json& t = entries[scursor];
      scursor += 2;  // quantized copy follows; hash-checked on demand
      const auto stored =
          slice<double>(spectra_file, t.at("offset").get<std::size_t>(),
                        t.at("count").get<std::size_t>(),
                        t.at("name").get<std::string>(),
                        t.at("fnv1a64").get<std::string>());
      const auto f64 = spectrum_to_f64(SpectralWeights::from(w));
      if (stored.size() != f64.size()) {
        throw std::runtime_error("bundle: spectrum size mismatch for " + name);
      }
      for (std::size_t i = 0; i < f64.size(); ++i) {
        if (std::abs(stored[i] - f64[i]) > 1e-12) {
          throw std::runtime_error("bundle: spectrum of '" + name +
                                   "' does not match its rows");
        }
      }
    };
    for (std::size_t layer = 0; layer < arch.num_layers; ++layer) {
      for (std::size_t d = 0; d < bundle.weights.layers[layer].size(); ++d) {
        const auto& dw = bundle.weights.layers[layer][d];
        const std::string prefix =
            "layer" + std::to_string(layer) + (d == 0 ? ".fwd." : ".bwd.");
        for (std::size_t g = 0; g < 4; ++g) {
          check_spectrum(prefix + kGateNames[g] + ".w", dw.gates[g].w);
        }
        if (dw.projection) check_spectrum(prefix + "projection", *dw.projection);
      }
    }
  }
  return bundle;
}

std::vector<std::vector<double>> load_sequence_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open sequence file " + path);
  json j;
  in >> j;
  const json& frames = j.contains("frames") ? j.at("frames") : j;
  if (!frames.is_array()) {
    throw std::invalid_argument("sequence: expected an array of frames");
  }
  std::vector<std::vector<double>> out;
  out.reserve(frames.size());
  for (const auto& f : frames) out.push_back(f.get<std::vector<double>>());
  return out;
}

std::vector<std::vector<double>> load_sequence_raw(const std::string& path,
                                                   std::size_t frame_dim) {
  if (frame_dim == 0) throw std::invalid_argument("sequence: frame_dim is 0");
  const std::vector<char> file = read_file(path);
  if (file.size() % (frame_dim * sizeof(float)) != 0) {
    throw std::invalid_argument("sequence: raw file is not a whole number of frames");
  }
  const std::size_t frames = file.size() / (frame_dim * sizeof(float));
  std::vector<std::vector<double>> out(frames, std::vector<double>(frame_dim));
  const char* cursor = file.data();
  for (auto& frame : out) {
    for (double& v : frame) {
      float f;
      std::memcpy(&f, cursor, sizeof(float));
      cursor += sizeof(float);
      v = static_cast<double>(f);
    }
  }
  return out;
}

}  // namespace bclstm

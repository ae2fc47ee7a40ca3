#ifndef BCLSTM_MODEL_IO_HPP_
#define BCLSTM_MODEL_IO_HPP_

#include <cstdint>
#include <string>

#include "json.hpp"

#include "bclstm/lstm.hpp"

namespace bclstm {

// On-disk model bundle: manifest.json + weights.bin (+ spectra.bin).
// weights.bin holds the little-endian float64 reference arrays; spectra.bin
// holds the precomputed packed weight spectra as float64 re/im pairs plus
// their int16 quantized copies. Every array is hashed in the manifest.
struct ModelBundle {
  LstmWeights weights;
  FxpFormat datapath{12};
  std::uint64_t seed = 0;
  bool has_spectra = false;
};

void save_bundle(const std::string& dir, const ModelBundle& bundle,
                 bool with_spectra);

// Verifies every array hash; with verify_spectra also recomputes the DFTs
// and checks the stored spectra match. Throws std::runtime_error on
// corruption, std::invalid_argument on malformed manifests.
ModelBundle load_bundle(const std::string& dir, bool verify_spectra = false);

std::uint64_t fnv1a64(const void* data, std::size_t len);
std::string fnv1a64_hex(const void* data, std::size_t len);

nlohmann::json arch_to_json(const LstmArchSpec& arch);
LstmArchSpec arch_from_json(const nlohmann::json& j);

// Sequence files: {"frames": [[...], ...]} JSON or raw little-endian
// float32 frames with a known frame width.
std::vector<std::vector<double>> load_sequence_json(const std::string& path);
std::vector<std::vector<double>> load_sequence_raw(const std::string& path,
                                                   std::size_t frame_dim);

}  // namespace bclstm

#endif  // BCLSTM_MODEL_IO_HPP_

#ifndef BCLSTM_LSTM_HPP_
#define BCLSTM_LSTM_HPP_

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "bclstm/circulant.hpp"

namespace bclstm {

enum class GateActivation { Sigmoid, Tanh };

struct LstmArchSpec {
  std::string name = "custom";
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  std::size_t projection_dim = 0;  // used only when projection is set
  std::size_t num_layers = 1;
  bool bidirectional = false;
  bool peephole = false;
  bool projection = false;
  std::size_t block_size = 1;
  // The cell-candidate activation. Sigmoid matches the gate equations this
  // datapath implements; Tanh is the conventional-LSTM toggle.
  GateActivation gate_activation = GateActivation::Sigmoid;

  // Per-direction output width (projection output or hidden).
  std::size_t output_dim() const {
    return projection ? projection_dim : hidden_dim;
  }
  // Input width of layer `layer` (concatenated for bidirectional stacks).
  std::size_t layer_input_dim(std::size_t layer) const {
    if (layer == 0) return input_dim;
    return output_dim() * (bidirectional ? 2 : 1);
  }
  // Fused gate matrices act on [x_t ; y_{t-1}].
  std::size_t fused_input_dim(std::size_t layer) const {
    return layer_input_dim(layer) + output_dim();
  }
  std::size_t num_directions() const { return bidirectional ? 2 : 1; }

  void validate() const;  // throws std::invalid_argument
};

// Built-in presets: "google" (peephole + projection single layer) and
// "small" (2-layer bidirectional, no peephole/projection).
LstmArchSpec arch_preset(const std::string& name);

// Weight matrix shape list for parameter accounting (gate matrices and the
// projection are compressed; biases and peepholes are not).
std::vector<MatrixShape> weight_shapes(const LstmArchSpec& arch);
CompressionStats compression_stats(const LstmArchSpec& arch, std::size_t k);

// ---------------------------------------------------------------------------
// Weights

struct GateWeights {
  BlockCirculantMatrix w;  // fused [x_t ; y_{t-1}] matrix
  std::vector<double> bias;
};

struct DirectionWeights {
  std::array<GateWeights, 4> gates;  // input, forget, cell, output
  std::vector<double> peep_i, peep_f, peep_o;
  std::optional<BlockCirculantMatrix> projection;
};

struct LstmWeights {
  LstmArchSpec arch;
  std::vector<std::vector<DirectionWeights>> layers;  // [layer][direction]
};

// Seeded uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)]. The generator
// mapping is fixed (not distribution-dependent) so bundles are reproducible
// byte for byte.
LstmWeights random_weights(const LstmArchSpec& arch, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Piece-wise linear activations

enum class PwlFunction { Sigmoid, Tanh };

struct PwlSegment {
  double left;  // segment covers [left, next.left); intervals left-closed
  double slope;
  double intercept;
};

// 22 segments over [-8, 8], breakpoints placed by greedy max-error
// equalization, mirrored around zero so tanh stays exactly odd. Outside the
// domain the output clamps to the asymptote.
struct PwlTable {
  PwlFunction function;
  std::vector<PwlSegment> segments;
  double domain_min = -8.0;
  double domain_max = 8.0;
  double clamp_lo = 0.0;  // value below domain_min
  double clamp_hi = 1.0;  // value above domain_max
  double max_error = 0.0;  // measured at build time

  std::size_t segment_count() const { return segments.size(); }
};

PwlTable build_pwl(PwlFunction f);

// Float evaluation (segment lookup + a*x + b in doubles).
double pwl_eval_real(const PwlTable& t, double x);

// Datapath evaluation: one comparison-indexed 16-bit multiply plus one
// addition. `stats`, when given, counts the arithmetic ops performed.
struct FxpOpStats {
  std::uint64_t muls = 0;
  std::uint64_t adds = 0;
};

FxpScalar pwl_eval(const PwlTable& t, FxpScalar x, FxpOpStats* stats = nullptr);

// ---------------------------------------------------------------------------
// Execution

struct CellState {
  std::vector<double> c;
  std::vector<double> y;
};

struct FxpCellState {
  FxpVector c;
  FxpVector y;
};

enum class RunMode { Float, Fxp };

// Owns the weights plus everything derived from them: per-matrix spectra,
// quantized spectra, quantized biases/peepholes and the activation tables.
class LstmRuntime {
 public:
  LstmRuntime(LstmWeights weights, FxpFormat datapath,
              ShiftPolicy policy = ShiftPolicy::DistributedInIdft);

  const LstmArchSpec& arch() const { return weights_.arch; }
  const LstmWeights& weights() const { return weights_; }
  const PwlTable& sigmoid_table() const { return sigmoid_; }
  const PwlTable& tanh_table() const { return tanh_; }
  FxpFormat datapath() const { return datapath_; }
  ShiftPolicy policy() const { return policy_; }
  CallCounters& counters() { return counters_; }

  // One cell step for a given layer/direction. use_dense selects the
  // expanded-matrix oracle path instead of the FFT path.
  CellState step_float(std::size_t layer, std::size_t dir,
                       std::span<const double> x, const CellState& prev,
                       bool use_dense = false) const;
  FxpCellState step_fxp(std::size_t layer, std::size_t dir, const FxpVector& x,
                        const FxpCellState& prev) const;

  // Full stacked/bidirectional execution from zero state; returns one output
  // vector per timestep. Throws std::invalid_argument on an empty sequence.
  std::vector<std::vector<double>> run_sequence(
      const std::vector<std::vector<double>>& inputs, RunMode mode,
      bool use_dense = false) const;

  // Max-abs activation ranges observed per tensor class; reported by the CLI
  // so users can pick per-tensor formats.
  double max_abs_weight_spectrum() const;

 private:
  struct DirRuntime {
    std::array<SpectralWeights, 4> gate_spectra;
    std::array<FxpSpectralWeights, 4> gate_spectra_fxp;
    std::array<std::vector<double>, 4> gate_dense;  // built lazily
    std::array<FxpVector, 4> bias_fxp;
    FxpVector peep_i_fxp, peep_f_fxp, peep_o_fxp;
    std::optional<SpectralWeights> proj_spectra;
    std::optional<FxpSpectralWeights> proj_spectra_fxp;
    std::vector<double> proj_dense;
  };

  const DirRuntime& dir_runtime(std::size_t layer, std::size_t dir) const {
    return runtime_[layer][dir];
  }
  void ensure_dense(std::size_t layer, std::size_t dir) const;

  LstmWeights weights_;
  FxpFormat datapath_;
  ShiftPolicy policy_;
  PwlTable sigmoid_;
  PwlTable tanh_;
  mutable std::vector<std::vector<DirRuntime>> runtime_;
  mutable CallCounters counters_;
};

}  // namespace bclstm

#endif  // BCLSTM_LSTM_HPP_

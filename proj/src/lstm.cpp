#include "bclstm/lstm.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace bclstm {

void LstmArchSpec::validate() const {
  if (input_dim == 0 || hidden_dim == 0 || num_layers == 0) {
    throw std::invalid_argument("arch: dimensions must be positive");
  }
  if (projection && projection_dim == 0) {
    throw std::invalid_argument("arch: projection enabled without a dimension");
  }
  if (!projection && projection_dim != 0) {
    throw std::invalid_argument("arch: projection_dim set but projection off");
  }
  if (!is_power_of_two(block_size)) {
    throw std::invalid_argument("arch: block size must be a power of two");
  }
}

LstmArchSpec arch_preset(const std::string& name) {
  LstmArchSpec arch;
  arch.name = name;
  if (name == "google") {
    arch.input_dim = 153;
    arch.hidden_dim = 1024;
    arch.projection_dim = 512;
    arch.num_layers = 1;
    arch.bidirectional = false;
    arch.peephole = true;
    arch.projection = true;
  } else if (name == "small") {
    arch.input_dim = 39;
    arch.hidden_dim = 512;
    arch.num_layers = 2;
    arch.bidirectional = true;
    arch.peephole = false;
    arch.projection = false;
  } else {
    throw std::invalid_argument("unknown architecture preset '" + name + "'");
  }
  return arch;
}

std::vector<MatrixShape> weight_shapes(const LstmArchSpec& arch) {
  arch.validate();
  static const char* kGateNames[4] = {"gate_i", "gate_f", "gate_c", "gate_o"};
  std::vector<MatrixShape> shapes;
  for (std::size_t layer = 0; layer < arch.num_layers; ++layer) {
    for (std::size_t dir = 0; dir < arch.num_directions(); ++dir) {
      const std::string prefix = "layer" + std::to_string(layer) +
                                 (dir == 0 ? ".fwd." : ".bwd.");
      const std::size_t fused = arch.fused_input_dim(layer);
      for (const char* g : kGateNames) {
        shapes.push_back({prefix + g + ".w", arch.hidden_dim, fused, true});
        shapes.push_back({prefix + g + ".bias", arch.hidden_dim, 1, false});
      }
      if (arch.peephole) {
        shapes.push_back({prefix + "peep_i", arch.hidden_dim, 1, false});
        shapes.push_back({prefix + "peep_f", arch.hidden_dim, 1, false});
        shapes.push_back({prefix + "peep_o", arch.hidden_dim, 1, false});
      }
      if (arch.projection) {
        shapes.push_back(
            {prefix + "projection", arch.projection_dim, arch.hidden_dim, true});
      }
    }
  }
  return shapes;
}

CompressionStats compression_stats(const LstmArchSpec& arch, std::size_t k) {
  const auto shapes = weight_shapes(arch);
  return compression_stats(std::span<const MatrixShape>(shapes), k);
}

// ---------------------------------------------------------------------------
// Weight initialization

namespace {

// Fixed 53-bit mapping; std::uniform_real_distribution is implementation
// defined and would break bundle reproducibility across toolchains.
double next_unit(std::mt19937_64& gen) {
  return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

double next_uniform(std::mt19937_64& gen, double bound) {
  return (2.0 * next_unit(gen) - 1.0) * bound;
}

void fill_uniform(std::mt19937_64& gen, std::vector<double>& v, double bound) {
  for (double& x : v) x = next_uniform(gen, bound);
}

}  // namespace

LstmWeights random_weights(const LstmArchSpec& arch, std::uint64_t seed) {
  arch.validate();
  std::mt19937_64 gen(seed);
  LstmWeights w;
  w.arch = arch;
  w.layers.resize(arch.num_layers);
  for (std::size_t layer = 0; layer < arch.num_layers; ++layer) {
    auto& dirs = w.layers[layer];
    dirs.resize(arch.num_directions());
    for (auto& dw : dirs) {
      const std::size_t fused = arch.fused_input_dim(layer);
      const double bound = 1.0 / std::sqrt(static_cast<double>(fused));
      for (auto& gate : dw.gates) {
        gate.w = BlockCirculantMatrix(arch.hidden_dim, fused, arch.block_size);
        fill_uniform(gen, gate.w.data(), bound);
        gate.bias.resize(arch.hidden_dim);
        fill_uniform(gen, gate.bias, bound);
      }
      if (arch.peephole) {
        const double hb = 1.0 / std::sqrt(static_cast<double>(arch.hidden_dim));
        dw.peep_i.resize(arch.hidden_dim);
        dw.peep_f.resize(arch.hidden_dim);
        dw.peep_o.resize(arch.hidden_dim);
        fill_uniform(gen, dw.peep_i, hb);
        fill_uniform(gen, dw.peep_f, hb);
        fill_uniform(gen, dw.peep_o, hb);
      }
      if (arch.projection) {
        const double pb = 1.0 / std::sqrt(static_cast<double>(arch.hidden_dim));
        dw.projection =
            BlockCirculantMatrix(arch.projection_dim, arch.hidden_dim,
                                 arch.block_size);
        fill_uniform(gen, dw.projection->data(), pb);
      }
    }
  }
  return w;
}

// ---------------------------------------------------------------------------
// Piece-wise linear activations

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double exact_fn(PwlFunction f, double x) {
  return f == PwlFunction::Sigmoid ? sigmoid(x) : std::tanh(x);
}

struct Line {
  double slope;
  double intercept;
};

Line secant(PwlFunction f, double l, double r) {
  const double fl = exact_fn(f, l);
  const double fr = exact_fn(f, r);
  const double slope = (fr - fl) / (r - l);
  return Line{slope, fl - slope * l};
}

double secant_error(PwlFunction f, double l, double r) {
  const Line line = secant(f, l, r);
  double err = 0.0;
  constexpr int kSamples = 256;
  for (int i = 1; i < kSamples; ++i) {
    const double x = l + (r - l) * static_cast<double>(i) / kSamples;
    err = std::max(err, std::abs(exact_fn(f, x) - (line.slope * x + line.intercept)));
  }
  return err;
}

// Greedy cover of [0, hi]: extend each segment as far as the error budget
// allows. Returns interior+end boundaries (excluding the leading 0).
std::vector<double> greedy_boundaries(PwlFunction f, double hi, double eps) {
  std::vector<double> bounds;
  double l = 0.0;
  while (l < hi) {
    if (secant_error(f, l, hi) <= eps) {
      bounds.push_back(hi);
      break;
    }
    double lo = l, r = hi;
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + r);
      if (secant_error(f, l, mid) <= eps) {
        lo = mid;
      } else {
        r = mid;
      }
    }
    const double next = std::max(lo, l + 1e-6);
    bounds.push_back(next);
    l = next;
  }
  return bounds;
}

}  // namespace

PwlTable build_pwl(PwlFunction f) {
  constexpr double kHi = 8.0;
  constexpr std::size_t kHalfSegments = 11;

  // Equalize: smallest error budget that covers [0, 8] in 11 segments.
  double eps_lo = 1e-7, eps_hi = 0.02;
  for (int it = 0; it < 60; ++it) {
    const double eps = 0.5 * (eps_lo + eps_hi);
    if (greedy_boundaries(f, kHi, eps).size() <= kHalfSegments) {
      eps_hi = eps;
    } else {
      eps_lo = eps;
    }
  }
  std::vector<double> bounds = greedy_boundaries(f, kHi, eps_hi);

  // The greedy cover may come in under budget; split the widest segments
  // until the half-table has exactly 11 pieces.
  while (bounds.size() < kHalfSegments) {
    double prev = 0.0;
    std::size_t widest = 0;
    double width = 0.0;
    for (std::size_t i = 0; i < bounds.size(); ++i) {
      if (bounds[i] - prev > width) {
        width = bounds[i] - prev;
        widest = i;
      }
      prev = bounds[i];
    }
    const double left = widest == 0 ? 0.0 : bounds[widest - 1];
    bounds.insert(bounds.begin() + static_cast<std::ptrdiff_t>(widest),
                  0.5 * (left + bounds[widest]));
  }

  PwlTable t;
  t.function = f;
  t.domain_min = -kHi;
  t.domain_max = kHi;
  t.clamp_lo = f == PwlFunction::Sigmoid ? 0.0 : -1.0;
  t.clamp_hi = 1.0;

  // Positive-half lines, then the mirror image: sigmoid reflects through
  // (0, 0.5), tanh through the origin, so both halves share slopes.
  std::vector<PwlSegment> pos;
  double left = 0.0;
  for (double right : bounds) {
    const Line line = secant(f, left, right);
    pos.push_back(PwlSegment{left, line.slope, line.intercept});
    left = right;
  }
  for (std::size_t i = pos.size(); i-- > 0;) {
    const double seg_right = i + 1 < pos.size() ? pos[i + 1].left : kHi;
    const double mirrored_intercept = f == PwlFunction::Sigmoid
                                          ? 1.0 - pos[i].intercept
                                          : -pos[i].intercept;
    t.segments.push_back(
        PwlSegment{-seg_right, pos[i].slope, mirrored_intercept});
  }
  t.segments.insert(t.segments.end(), pos.begin(), pos.end());

  double err = 0.0;
  constexpr int kCheck = 50000;
  for (int i = 0; i <= kCheck; ++i) {
    const double x = -kHi + 2.0 * kHi * static_cast<double>(i) / kCheck;
    err = std::max(err, std::abs(pwl_eval_real(t, x) - exact_fn(f, x)));
  }
  t.max_error = err;
  if (t.max_error >= 0.01) {
    throw std::logic_error("pwl table exceeds the 1% error budget");
  }
  return t;
}

namespace {

const PwlSegment& locate_segment(const PwlTable& t, double x) {
  // Left-closed intervals: the last segment whose left bound is <= x.
  std::size_t lo = 0, hi = t.segments.size();
  while (hi - lo > 1) {
    const std::size_t mid = (lo + hi) / 2;
    if (t.segments[mid].left <= x) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return t.segments[lo];
}

}  // namespace

double pwl_eval_real(const PwlTable& t, double x) {
  if (x < t.domain_min) return t.clamp_lo;
  if (x > t.domain_max) return t.clamp_hi;
  const PwlSegment& s = locate_segment(t, x);
  return s.slope * x + s.intercept;
}

FxpScalar pwl_eval(const PwlTable& t, FxpScalar x, FxpOpStats* stats) {
  const double xv = x.to_double();
  if (xv < t.domain_min) return quantize(t.clamp_lo, x.fmt);
  if (xv > t.domain_max) return quantize(t.clamp_hi, x.fmt);
  const PwlSegment& s = locate_segment(t, xv);
  const FxpScalar slope = quantize(s.slope, x.fmt);
  const FxpScalar intercept = quantize(s.intercept, x.fmt);
  const FxpScalar prod = fxp_mul(slope, x);
  const FxpScalar result = fxp_add(prod, intercept);
  if (stats) {
    ++stats->muls;
    ++stats->adds;
  }
  return result;
}

// ---------------------------------------------------------------------------
// Runtime

LstmRuntime::LstmRuntime(LstmWeights weights, FxpFormat datapath,
                         ShiftPolicy policy)
    : weights_(std::move(weights)),
      datapath_(datapath),
      policy_(policy),
      sigmoid_(build_pwl(PwlFunction::Sigmoid)),
      tanh_(build_pwl(PwlFunction::Tanh)) {
  weights_.arch.validate();
  // Block size 1 is the uncompressed reference: no transforms exist, the
  // dense path serves every float mat-vec.
  const bool spectral = weights_.arch.block_size > 1;
  runtime_.resize(weights_.layers.size());
  for (std::size_t layer = 0; layer < weights_.layers.size(); ++layer) {
    runtime_[layer].resize(weights_.layers[layer].size());
    for (std::size_t d = 0; d < weights_.layers[layer].size(); ++d) {
      const DirectionWeights& dw = weights_.layers[layer][d];
      DirRuntime& rt = runtime_[layer][d];
      for (std::size_t g = 0; g < 4; ++g) {
        if (spectral) {
          rt.gate_spectra[g] = SpectralWeights::from(dw.gates[g].w);
          rt.gate_spectra_fxp[g] = FxpSpectralWeights::from(
              rt.gate_spectra[g],
              format_for_range(max_abs_bin(rt.gate_spectra[g])));
        }
        rt.bias_fxp[g] = quantize_vector(dw.gates[g].bias, datapath_);
      }
      if (weights_.arch.peephole) {
        rt.peep_i_fxp = quantize_vector(dw.peep_i, datapath_);
        rt.peep_f_fxp = quantize_vector(dw.peep_f, datapath_);
        rt.peep_o_fxp = quantize_vector(dw.peep_o, datapath_);
      }
      if (dw.projection && spectral) {
        rt.proj_spectra = SpectralWeights::from(*dw.projection);
        rt.proj_spectra_fxp = FxpSpectralWeights::from(
            *rt.proj_spectra, format_for_range(max_abs_bin(*rt.proj_spectra)));
      }
    }
  }
}

void LstmRuntime::ensure_dense(std::size_t layer, std::size_t dir) const {
  DirRuntime& rt = runtime_[layer][dir];
  const DirectionWeights& dw = weights_.layers[layer][dir];
  if (rt.gate_dense[0].empty()) {
    for (std::size_t g = 0; g < 4; ++g) {
      rt.gate_dense[g] = expand_to_dense(dw.gates[g].w);
    }
    if (dw.projection) rt.proj_dense = expand_to_dense(*dw.projection);
  }
}

double LstmRuntime::max_abs_weight_spectrum() const {
  double max_abs = 0.0;
  for (const auto& layer : runtime_) {
    for (const auto& rt : layer) {
      for (const auto& sp : rt.gate_spectra) {
        max_abs = std::max(max_abs, max_abs_bin(sp));
      }
      if (rt.proj_spectra) {
        max_abs = std::max(max_abs, max_abs_bin(*rt.proj_spectra));
      }
    }
  }
  return max_abs;
}

namespace {

std::vector<double> concat(std::span<const double> a, std::span<const double> b) {
  std::vector<double> out;
  out.reserve(a.size() + b.size());
  out.insert(out.end(), a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

void add_inplace(std::vector<double>& a, std::span<const double> b) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

double gate_sigma(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

CellState LstmRuntime::step_float(std::size_t layer, std::size_t dir,
                                  std::span<const double> x,
                                  const CellState& prev,
                                  bool use_dense) const {
  const LstmArchSpec& arch = weights_.arch;
  const DirectionWeights& dw = weights_.layers[layer][dir];
  const DirRuntime& rt = runtime_[layer][dir];
  const std::size_t hidden = arch.hidden_dim;
  const std::size_t out_dim = arch.output_dim();
  if (x.size() != arch.layer_input_dim(layer)) {
    throw std::invalid_argument("lstm step: input width mismatch");
  }
  if (arch.block_size == 1) use_dense = true;
  if (use_dense) ensure_dense(layer, dir);

  const std::vector<double> y_prev =
      prev.y.empty() ? std::vector<double>(out_dim, 0.0) : prev.y;
  const std::vector<double> c_prev =
      prev.c.empty() ? std::vector<double>(hidden, 0.0) : prev.c;
  const std::vector<double> fused = concat(x, y_prev);

  auto gate_matvec = [&](std::size_t g) {
    if (use_dense) {
      return dense_matvec(rt.gate_dense[g], hidden, fused.size(), fused);
    }
    return matvec_fft(rt.gate_spectra[g], fused, &counters_);
  };

  std::vector<double> pre_i = gate_matvec(0);
  std::vector<double> pre_f = gate_matvec(1);
  std::vector<double> pre_c = gate_matvec(2);
  std::vector<double> pre_o = gate_matvec(3);
  add_inplace(pre_i, dw.gates[0].bias);
  add_inplace(pre_f, dw.gates[1].bias);
  add_inplace(pre_c, dw.gates[2].bias);
  add_inplace(pre_o, dw.gates[3].bias);

  if (arch.peephole) {
    for (std::size_t i = 0; i < hidden; ++i) {
      pre_i[i] += dw.peep_i[i] * c_prev[i];
      pre_f[i] += dw.peep_f[i] * c_prev[i];
    }
  }

  CellState next;
  next.c.resize(hidden);
  std::vector<double> m(hidden);
  for (std::size_t i = 0; i < hidden; ++i) {
    const double gi = gate_sigma(pre_i[i]);
    const double gf = gate_sigma(pre_f[i]);
    const double gc = arch.gate_activation == GateActivation::Sigmoid
                          ? gate_sigma(pre_c[i])
                          : std::tanh(pre_c[i]);
    next.c[i] = gf * c_prev[i] + gc * gi;
  }
  if (arch.peephole) {
    for (std::size_t i = 0; i < hidden; ++i) pre_o[i] += dw.peep_o[i] * next.c[i];
  }
  for (std::size_t i = 0; i < hidden; ++i) {
    m[i] = gate_sigma(pre_o[i]) * std::tanh(next.c[i]);
  }

  if (dw.projection) {
    next.y = use_dense ? dense_matvec(rt.proj_dense, arch.projection_dim,
                                      hidden, m)
                       : matvec_fft(*rt.proj_spectra, m, &counters_);
  } else {
    next.y = std::move(m);
  }
  return next;
}

namespace {

FxpVector fxp_ewise_mul(const FxpVector& a, const FxpVector& b) {
  FxpVector out;
  out.fmt = a.fmt;
  out.raw.resize(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    out.raw[i] = fxp_mul(a.at(i), b.at(i)).raw;
  }
  return out;
}

void fxp_ewise_add_inplace(FxpVector& a, const FxpVector& b) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    a.raw[i] = fxp_add(a.at(i), b.at(i)).raw;
  }
}

}  // namespace

FxpCellState LstmRuntime::step_fxp(std::size_t layer, std::size_t dir,
                                   const FxpVector& x,
                                   const FxpCellState& prev) const {
  const LstmArchSpec& arch = weights_.arch;
  const DirRuntime& rt = runtime_[layer][dir];
  const std::size_t hidden = arch.hidden_dim;
  const std::size_t out_dim = arch.output_dim();
  if (x.size() != arch.layer_input_dim(layer)) {
    throw std::invalid_argument("lstm step: input width mismatch");
  }
  if (arch.block_size == 1) {
    throw std::invalid_argument(
        "fxp mode needs a spectral datapath; block size 1 is the dense "
        "reference model");
  }

  FxpVector y_prev = prev.y;
  if (y_prev.raw.empty()) {
    y_prev.fmt = datapath_;
    y_prev.raw.assign(out_dim, 0);
  }
  FxpVector c_prev = prev.c;
  if (c_prev.raw.empty()) {
    c_prev.fmt = datapath_;
    c_prev.raw.assign(hidden, 0);
  }

  FxpVector fused;
  fused.fmt = datapath_;
  fused.raw.reserve(x.size() + y_prev.size());
  fused.raw.insert(fused.raw.end(), x.raw.begin(), x.raw.end());
  fused.raw.insert(fused.raw.end(), y_prev.raw.begin(), y_prev.raw.end());

  std::array<FxpVector, 4> pre;
  for (std::size_t g = 0; g < 4; ++g) {
    pre[g] = matvec_fft_fxp(rt.gate_spectra_fxp[g], fused, policy_, &counters_);
    fxp_ewise_add_inplace(pre[g], rt.bias_fxp[g]);
  }
  if (arch.peephole) {
    fxp_ewise_add_inplace(pre[0], fxp_ewise_mul(rt.peep_i_fxp, c_prev));
    fxp_ewise_add_inplace(pre[1], fxp_ewise_mul(rt.peep_f_fxp, c_prev));
  }

  FxpCellState next;
  next.c.fmt = datapath_;
  next.c.raw.resize(hidden);
  for (std::size_t i = 0; i < hidden; ++i) {
    const FxpScalar gi = pwl_eval(sigmoid_, pre[0].at(i));
    const FxpScalar gf = pwl_eval(sigmoid_, pre[1].at(i));
    const FxpScalar gc =
        arch.gate_activation == GateActivation::Sigmoid
            ? pwl_eval(sigmoid_, pre[2].at(i))
            : pwl_eval(tanh_, pre[2].at(i));
    const FxpScalar keep = fxp_mul(gf, c_prev.at(i));
    const FxpScalar write = fxp_mul(gc, gi);
    next.c.raw[i] = fxp_add(keep, write).raw;
  }
  if (arch.peephole) {
    fxp_ewise_add_inplace(pre[3], fxp_ewise_mul(rt.peep_o_fxp, next.c));
  }
  FxpVector m;
  m.fmt = datapath_;
  m.raw.resize(hidden);
  for (std::size_t i = 0; i < hidden; ++i) {
    const FxpScalar go = pwl_eval(sigmoid_, pre[3].at(i));
    const FxpScalar hc = pwl_eval(tanh_, next.c.at(i));
    m.raw[i] = fxp_mul(go, hc).raw;
  }

  if (rt.proj_spectra_fxp) {
    next.y = matvec_fft_fxp(*rt.proj_spectra_fxp, m, policy_, &counters_);
  } else {
    next.y = std::move(m);
  }
  return next;
}

std::vector<std::vector<double>> LstmRuntime::run_sequence(
    const std::vector<std::vector<double>>& inputs, RunMode mode,
    bool use_dense) const {
  const LstmArchSpec& arch = weights_.arch;
  if (inputs.empty()) {
    throw std::invalid_argument("run_sequence: empty input sequence");
  }
  for (const auto& frame : inputs) {
    if (frame.size() != arch.input_dim) {
      throw std::invalid_argument("run_sequence: frame width mismatch");
    }
  }
  const std::size_t steps = inputs.size();

  std::vector<std::vector<double>> layer_in = inputs;
  for (std::size_t layer = 0; layer < arch.num_layers; ++layer) {
    std::vector<std::vector<double>> layer_out(steps);
    for (std::size_t dir = 0; dir < arch.num_directions(); ++dir) {
      std::vector<std::vector<double>> dir_out(steps);
      if (mode == RunMode::Float) {
        CellState state;
        for (std::size_t t = 0; t < steps; ++t) {
          const std::size_t idx = dir == 0 ? t : steps - 1 - t;
          state = step_float(layer, dir, layer_in[idx], state, use_dense);
          dir_out[idx] = state.y;
        }
      } else {
        FxpCellState state;
        for (std::size_t t = 0; t < steps; ++t) {
          const std::size_t idx = dir == 0 ? t : steps - 1 - t;
          const FxpVector xq = quantize_vector(layer_in[idx], datapath_);
          state = step_fxp(layer, dir, xq, state);
          dir_out[idx] = dequantize_vector(state.y);
        }
      }
      // Forward half first, then backward, fixed concatenation order.
      for (std::size_t t = 0; t < steps; ++t) {
        if (dir == 0) {
          layer_out[t] = std::move(dir_out[t]);
        } else {
          layer_out[t].insert(layer_out[t].end(), dir_out[t].begin(),
                              dir_out[t].end());
        }
      }
    }
    layer_in = std::move(layer_out);
  }
  return layer_in;
}

}  // namespace bclstm

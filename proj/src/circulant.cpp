#include "bclstm/circulant.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bclstm {

namespace {

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

void require_block_size(std::size_t k) {
  if (!is_power_of_two(k)) {
    throw std::invalid_argument("block size " + std::to_string(k) +
                                " is not a power of two");
  }
}

void require_input_len(std::size_t n, std::size_t got) {
  if (n != got) {
    throw std::invalid_argument("mat-vec dimension mismatch: expected " +
                                std::to_string(n) + ", got " +
                                std::to_string(got));
  }
}

}  // namespace

BlockCirculantMatrix::BlockCirculantMatrix(std::size_t m, std::size_t n,
                                           std::size_t k)
    : m_(m), n_(n), k_(k) {
  require_block_size(k);
  if (m == 0 || n == 0) {
    throw std::invalid_argument("matrix dimensions must be positive");
  }
  p_ = ceil_div(m, k);
  q_ = ceil_div(n, k);
  data_.assign(p_ * q_ * k_, 0.0);
}

std::span<const double> BlockCirculantMatrix::block(std::size_t i,
                                                    std::size_t j) const {
  return {data_.data() + (i * q_ + j) * k_, k_};
}

std::span<double> BlockCirculantMatrix::block(std::size_t i, std::size_t j) {
  return {data_.data() + (i * q_ + j) * k_, k_};
}

std::vector<double> expand_to_dense(const BlockCirculantMatrix& b) {
  const std::size_t m = b.rows(), n = b.cols(), k = b.block_size();
  std::vector<double> dense(m * n, 0.0);
  for (std::size_t i = 0; i < b.block_rows(); ++i) {
    for (std::size_t j = 0; j < b.block_cols(); ++j) {
      const auto w = b.block(i, j);
      const std::size_t row_end = std::min(m, (i + 1) * k);
      const std::size_t col_end = std::min(n, (j + 1) * k);
      for (std::size_t r = i * k; r < row_end; ++r) {
        for (std::size_t c = j * k; c < col_end; ++c) {
          const std::size_t br = r - i * k;
          const std::size_t bc = c - j * k;
          dense[r * n + c] = w[(br + k - bc) % k];
        }
      }
    }
  }
  return dense;
}

std::vector<double> dense_matvec(std::span<const double> dense, std::size_t m,
                                 std::size_t n, std::span<const double> x) {
  require_input_len(n, x.size());
  std::vector<double> out(m, 0.0);
  for (std::size_t r = 0; r < m; ++r) {
    double acc = 0.0;
    const double* row = dense.data() + r * n;
    for (std::size_t c = 0; c < n; ++c) acc += row[c] * x[c];
    out[r] = acc;
  }
  return out;
}

std::vector<double> matvec_naive(const BlockCirculantMatrix& b,
                                 std::span<const double> x) {
  require_input_len(b.cols(), x.size());
  const auto dense = expand_to_dense(b);
  return dense_matvec(dense, b.rows(), b.cols(), x);
}

SpectralWeights SpectralWeights::from(const BlockCirculantMatrix& b) {
  SpectralWeights w;
  w.m = b.rows();
  w.n = b.cols();
  w.k = b.block_size();
  w.p = b.block_rows();
  w.q = b.block_cols();
  w.spectra.reserve(w.p * w.q);
  for (std::size_t i = 0; i < w.p; ++i) {
    for (std::size_t j = 0; j < w.q; ++j) {
      w.spectra.push_back(dft(b.block(i, j)));
    }
  }
  return w;
}

FxpSpectralWeights FxpSpectralWeights::from(const SpectralWeights& w,
                                            FxpFormat fmt) {
  FxpSpectralWeights out;
  out.m = w.m;
  out.n = w.n;
  out.k = w.k;
  out.p = w.p;
  out.q = w.q;
  out.fmt = fmt;
  out.spectra.reserve(w.spectra.size());
  for (const auto& s : w.spectra) out.spectra.push_back(quantize_spectrum(s, fmt));
  return out;
}

FxpFormat format_for_range(double max_abs) {
  int int_bits = 0;
  while (int_bits < 15 && std::ldexp(1.0, int_bits) < max_abs) ++int_bits;
  return make_format(15 - int_bits);
}

double max_abs_bin(const SpectralWeights& w) {
  double max_abs = 0.0;
  for (const auto& s : w.spectra) {
    for (const auto& bin : s.bins) {
      max_abs = std::max({max_abs, std::abs(bin.real()), std::abs(bin.imag())});
    }
  }
  return max_abs;
}

void CallCounters::reset() {
  dft_calls.store(0);
  idft_calls.store(0);
  pointwise_calls.store(0);
}

namespace {

// Pads block j of x (length <= k at the tail) to a full k slot.
std::vector<double> input_block(std::span<const double> x, std::size_t j,
                                std::size_t k) {
  std::vector<double> blk(k, 0.0);
  const std::size_t begin = j * k;
  const std::size_t end = std::min(x.size(), begin + k);
  for (std::size_t c = begin; c < end; ++c) blk[c - begin] = x[c];
  return blk;
}

}  // namespace

std::vector<double> matvec_fft(const SpectralWeights& w,
                               std::span<const double> x,
                               CallCounters* counters) {
  require_input_len(w.n, x.size());
  const std::size_t k = w.k;

  std::vector<PackedSpectrum> xs;
  xs.reserve(w.q);
  for (std::size_t j = 0; j < w.q; ++j) {
    xs.push_back(dft(input_block(x, j, k)));
    if (counters) counters->dft_calls.fetch_add(1, std::memory_order_relaxed);
  }

  std::vector<double> out(w.m, 0.0);
  for (std::size_t i = 0; i < w.p; ++i) {
    PackedSpectrum acc;
    acc.k = k;
    acc.bins.assign(k / 2 + 1, Complex{0.0, 0.0});
    for (std::size_t j = 0; j < w.q; ++j) {
      const PackedSpectrum prod = spectrum_pointwise_mul(w.at(i, j), xs[j]);
      if (counters) {
        counters->pointwise_calls.fetch_add(1, std::memory_order_relaxed);
      }
      for (std::size_t bin = 0; bin < acc.bins.size(); ++bin) {
        acc.bins[bin] += prod.bins[bin];
      }
    }
    const std::vector<double> a = idft(acc);
    if (counters) counters->idft_calls.fetch_add(1, std::memory_order_relaxed);
    const std::size_t row_end = std::min(w.m, (i + 1) * k);
    for (std::size_t r = i * k; r < row_end; ++r) out[r] = a[r - i * k];
  }
  return out;
}

std::vector<double> matvec_fft(const BlockCirculantMatrix& b,
                               std::span<const double> x,
                               CallCounters* counters) {
  if (counters) {
    // Weight spectra computed on the fly cost one DFT per block.
    counters->dft_calls.fetch_add(b.block_rows() * b.block_cols(),
                                  std::memory_order_relaxed);
  }
  return matvec_fft(SpectralWeights::from(b), x, counters);
}

FxpVector matvec_fft_fxp(const FxpSpectralWeights& w, const FxpVector& x,
                         ShiftPolicy policy, CallCounters* counters) {
  require_input_len(w.n, x.size());
  const std::size_t k = w.k;
  const FxpFormat fmt = x.fmt;

  std::vector<FxpPackedSpectrum> xs;
  xs.reserve(w.q);
  for (std::size_t j = 0; j < w.q; ++j) {
    FxpVector blk;
    blk.fmt = fmt;
    blk.raw.assign(k, 0);
    const std::size_t begin = j * k;
    const std::size_t end = std::min(x.size(), begin + k);
    for (std::size_t c = begin; c < end; ++c) blk.raw[c - begin] = x.raw[c];
    xs.push_back(dft_fxp(blk, policy));
    if (counters) counters->dft_calls.fetch_add(1, std::memory_order_relaxed);
  }

  FxpVector out;
  out.fmt = fmt;
  out.raw.assign(w.m, 0);
  std::vector<std::int32_t> acc_re(k / 2 + 1), acc_im(k / 2 + 1);
  for (std::size_t i = 0; i < w.p; ++i) {
    std::fill(acc_re.begin(), acc_re.end(), 0);
    std::fill(acc_im.begin(), acc_im.end(), 0);
    for (std::size_t j = 0; j < w.q; ++j) {
      const FxpPackedSpectrum prod =
          spectrum_pointwise_mul_fxp(w.at(i, j), xs[j], fmt);
      if (counters) {
        counters->pointwise_calls.fetch_add(1, std::memory_order_relaxed);
      }
      for (std::size_t bin = 0; bin < prod.bins.size(); ++bin) {
        acc_re[bin] = saturate32(static_cast<std::int64_t>(acc_re[bin]) +
                                 prod.bins[bin].re);
        acc_im[bin] = saturate32(static_cast<std::int64_t>(acc_im[bin]) +
                                 prod.bins[bin].im);
      }
    }
    FxpPackedSpectrum acc;
    acc.k = k;
    acc.fmt = fmt;
    acc.bins.resize(k / 2 + 1);
    for (std::size_t bin = 0; bin < acc.bins.size(); ++bin) {
      acc.bins[bin].re = saturate16(acc_re[bin]);
      acc.bins[bin].im = saturate16(acc_im[bin]);
    }
    const FxpVector a = idft_fxp(acc, policy);
    if (counters) counters->idft_calls.fetch_add(1, std::memory_order_relaxed);
    const std::size_t row_end = std::min(w.m, (i + 1) * k);
    for (std::size_t r = i * k; r < row_end; ++r) out.raw[r] = a.raw[r - i * k];
  }
  return out;
}

CirculantGrad grad(const BlockCirculantMatrix& b, std::span<const double> x,
                   std::span<const double> upstream) {
  require_input_len(b.cols(), x.size());
  if (upstream.size() != b.rows()) {
    throw std::invalid_argument("grad: upstream length mismatch");
  }
  const std::size_t k = b.block_size();
  const std::size_t p = b.block_rows(), q = b.block_cols();

  // Upstream and input block spectra are shared across all p*q blocks; the
  // two gradients are correlations, which in the spectral domain pick up a
  // conjugate on the non-upstream factor.
  std::vector<PackedSpectrum> ds, xsp;
  ds.reserve(p);
  for (std::size_t i = 0; i < p; ++i) {
    std::vector<double> blk(k, 0.0);
    const std::size_t begin = i * k;
    const std::size_t end = std::min(upstream.size(), begin + k);
    for (std::size_t r = begin; r < end; ++r) blk[r - begin] = upstream[r];
    ds.push_back(dft(blk));
  }
  xsp.reserve(q);
  for (std::size_t j = 0; j < q; ++j) xsp.push_back(dft(input_block(x, j, k)));

  CirculantGrad g;
  g.d_weights = BlockCirculantMatrix(b.rows(), b.cols(), k);
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < q; ++j) {
      PackedSpectrum prod;
      prod.k = k;
      prod.bins.resize(k / 2 + 1);
      for (std::size_t bin = 0; bin < prod.bins.size(); ++bin) {
        prod.bins[bin] = std::conj(xsp[j].bins[bin]) * ds[i].bins[bin];
      }
      const std::vector<double> dw = idft(prod);
      auto dst = g.d_weights.block(i, j);
      std::copy(dw.begin(), dw.end(), dst.begin());
    }
  }

  const SpectralWeights ws = SpectralWeights::from(b);
  g.d_input.assign(b.cols(), 0.0);
  for (std::size_t j = 0; j < q; ++j) {
    PackedSpectrum acc;
    acc.k = k;
    acc.bins.assign(k / 2 + 1, Complex{0.0, 0.0});
    for (std::size_t i = 0; i < p; ++i) {
      for (std::size_t bin = 0; bin < acc.bins.size(); ++bin) {
        acc.bins[bin] += std::conj(ws.at(i, j).bins[bin]) * ds[i].bins[bin];
      }
    }
    const std::vector<double> dx = idft(acc);
    const std::size_t col_end = std::min(b.cols(), (j + 1) * k);
    for (std::size_t c = j * k; c < col_end; ++c) g.d_input[c] = dx[c - j * k];
  }
  return g;
}

BlockCirculantMatrix project_dense(std::span<const double> dense,
                                   std::size_t m, std::size_t n,
                                   std::size_t k) {
  if (dense.size() != m * n) {
    throw std::invalid_argument("project_dense: buffer size mismatch");
  }
  BlockCirculantMatrix b(m, n, k);
  std::vector<double> sums(k), counts(k);
  for (std::size_t i = 0; i < b.block_rows(); ++i) {
    for (std::size_t j = 0; j < b.block_cols(); ++j) {
      std::fill(sums.begin(), sums.end(), 0.0);
      std::fill(counts.begin(), counts.end(), 0.0);
      const std::size_t row_end = std::min(m, (i + 1) * k);
      const std::size_t col_end = std::min(n, (j + 1) * k);
      for (std::size_t r = i * k; r < row_end; ++r) {
        for (std::size_t c = j * k; c < col_end; ++c) {
          const std::size_t d = ((r - i * k) + k - (c - j * k)) % k;
          sums[d] += dense[r * n + c];
          counts[d] += 1.0;
        }
      }
      auto w = b.block(i, j);
      for (std::size_t d = 0; d < k; ++d) {
        w[d] = counts[d] > 0.0 ? sums[d] / counts[d] : 0.0;
      }
    }
  }
  return b;
}

double fft_matvec_real_ops(std::size_t m, std::size_t n, std::size_t k) {
  const std::size_t p = ceil_div(m, k);
  const std::size_t q = ceil_div(n, k);
  const double dfts = static_cast<double>(q) * fft_real_ops(k);
  const double products =
      static_cast<double>(p) * static_cast<double>(q) * pointwise_real_ops(k);
  const double accum = static_cast<double>(p) * static_cast<double>(q - 1) *
                       spectral_accum_real_ops(k);
  const double idfts = static_cast<double>(p) * fft_real_ops(k);
  return dfts + products + accum + idfts;
}

double dense_matvec_real_ops(std::size_t m, std::size_t n) {
  return 2.0 * static_cast<double>(m) * static_cast<double>(n);
}

CompressionStats compression_stats(std::span<const MatrixShape> shapes,
                                   std::size_t k) {
  require_block_size(k);
  CompressionStats st;
  st.block_size = k;
  double fft_ops = 0.0, dense_ops = 0.0;
  for (const auto& s : shapes) {
    const std::size_t dense = s.rows * s.cols;
    st.dense_params += dense;
    if (s.compressed) {
      const std::size_t stored = ceil_div(s.rows, k) * ceil_div(s.cols, k) * k;
      st.compressed_params += stored;
      st.dense_matrix_params += dense;
      st.compressed_matrix_params += stored;
      fft_ops += k == 1 ? dense_matvec_real_ops(s.rows, s.cols)
                        : fft_matvec_real_ops(s.rows, s.cols, k);
      dense_ops += dense_matvec_real_ops(s.rows, s.cols);
    } else {
      st.compressed_params += dense;
    }
  }
  st.compression_ratio = st.compressed_params
                             ? static_cast<double>(st.dense_params) /
                                   static_cast<double>(st.compressed_params)
                             : 1.0;
  st.matrix_compression_ratio =
      st.compressed_matrix_params
          ? static_cast<double>(st.dense_matrix_params) /
                static_cast<double>(st.compressed_matrix_params)
          : 1.0;
  st.complexity_ratio = dense_ops > 0.0 ? fft_ops / dense_ops : 1.0;
  return st;
}

}  // namespace bclstm

#ifndef BCLSTM_CIRCULANT_HPP_
#define BCLSTM_CIRCULANT_HPP_

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bclstm/spectral.hpp"

namespace bclstm {

// An m x n matrix partitioned into p x q circulant blocks of size k x k
// (zero-padded when k does not divide m or n). Each block is defined by a
// single length-k vector: the block's first column, so that rows are
// successive cyclic right-rotations and the block mat-vec is the circular
// convolution of the defining vector with the input block. Storage is
// p*q*k values instead of m*n.
class BlockCirculantMatrix {
 public:
  BlockCirculantMatrix() = default;
  BlockCirculantMatrix(std::size_t m, std::size_t n, std::size_t k);

  std::size_t rows() const { return m_; }
  std::size_t cols() const { return n_; }
  std::size_t block_size() const { return k_; }
  std::size_t block_rows() const { return p_; }
  std::size_t block_cols() const { return q_; }
  std::size_t param_count() const { return data_.size(); }

  std::span<const double> block(std::size_t i, std::size_t j) const;
  std::span<double> block(std::size_t i, std::size_t j);

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

 private:
  std::size_t m_ = 0, n_ = 0, k_ = 1, p_ = 0, q_ = 0;
  std::vector<double> data_;  // (i*q + j)*k + r
};

// Dense m x n row-major expansion; entry (r, c) of block (i, j) is
// w_ij[(r - c) mod k], cropped to the true dimensions.
std::vector<double> expand_to_dense(const BlockCirculantMatrix& b);

// Reference path: expand the blocks and multiply densely.
std::vector<double> matvec_naive(const BlockCirculantMatrix& b,
                                 std::span<const double> x);

// Dense mat-vec helper for pre-expanded matrices (oracle + bench path).
std::vector<double> dense_matvec(std::span<const double> dense, std::size_t m,
                                 std::size_t n, std::span<const double> x);

// Precomputed weight spectra: one packed DFT per block-defining vector.
struct SpectralWeights {
  std::size_t m = 0, n = 0, k = 0, p = 0, q = 0;
  std::vector<PackedSpectrum> spectra;  // (i*q + j)

  static SpectralWeights from(const BlockCirculantMatrix& b);
  const PackedSpectrum& at(std::size_t i, std::size_t j) const {
    return spectra[i * q + j];
  }
};

// 16-bit copies of the weight spectra for the quantized pipeline.
struct FxpSpectralWeights {
  std::size_t m = 0, n = 0, k = 0, p = 0, q = 0;
  FxpFormat fmt;
  std::vector<FxpPackedSpectrum> spectra;

  static FxpSpectralWeights from(const SpectralWeights& w, FxpFormat fmt);
  const FxpPackedSpectrum& at(std::size_t i, std::size_t j) const {
    return spectra[i * q + j];
  }
};

// Smallest 16-bit format whose range covers max_abs (used to pick per-tensor
// spectrum formats; weight spectra can exceed the datapath range by up to k).
FxpFormat format_for_range(double max_abs);
double max_abs_bin(const SpectralWeights& w);

// Exact operator-call counters. Increments are atomic so concurrent mat-vecs
// can share one instance.
struct CallCounters {
  std::atomic<std::uint64_t> dft_calls{0};
  std::atomic<std::uint64_t> idft_calls{0};
  std::atomic<std::uint64_t> pointwise_calls{0};

  void reset();
  std::uint64_t dft() const { return dft_calls.load(); }
  std::uint64_t idft() const { return idft_calls.load(); }
  std::uint64_t pointwise() const { return pointwise_calls.load(); }
};

// FFT path with the inverse transform outside the block-column accumulation:
// a_i = IDFT( sum_j F(w_ij) o F(x_j) ). With precomputed spectra each
// mat-vec costs q DFT calls, p IDFT calls and p*q pointwise products.
std::vector<double> matvec_fft(const SpectralWeights& w,
                               std::span<const double> x,
                               CallCounters* counters = nullptr);

// Convenience overload without precomputation; additionally spends p*q DFT
// calls on the weight vectors.
std::vector<double> matvec_fft(const BlockCirculantMatrix& b,
                               std::span<const double> x,
                               CallCounters* counters = nullptr);

// Quantized pipeline: staged 16-bit transforms, pointwise products into the
// datapath format, 32-bit saturating spectral accumulation, one inverse
// transform per block row. Shift placement follows the policy.
FxpVector matvec_fft_fxp(const FxpSpectralWeights& w, const FxpVector& x,
                         ShiftPolicy policy, CallCounters* counters = nullptr);

// Backward pass: gradients of a scalar loss with upstream dL/da.
// d_weights has the same p x q x k layout as the matrix parameters.
struct CirculantGrad {
  BlockCirculantMatrix d_weights;
  std::vector<double> d_input;
};

CirculantGrad grad(const BlockCirculantMatrix& b, std::span<const double> x,
                   std::span<const double> upstream);

// Frobenius-optimal block-circulant approximation of a dense matrix: each
// defining entry is the mean of its wrapped diagonal within the block.
BlockCirculantMatrix project_dense(std::span<const double> dense,
                                   std::size_t m, std::size_t n,
                                   std::size_t k);

// Analytic cost of one FFT-path mat-vec (real multiplies + additions).
double fft_matvec_real_ops(std::size_t m, std::size_t n, std::size_t k);
double dense_matvec_real_ops(std::size_t m, std::size_t n);

// Parameter and complexity accounting for a set of weight matrices; shapes
// flagged compressed contribute p*q*k parameters, the rest (biases,
// peepholes) are stored dense.
struct MatrixShape {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 1;
  bool compressed = true;
};

struct CompressionStats {
  std::size_t block_size = 1;
  std::size_t dense_params = 0;       // all parameters, uncompressed model
  std::size_t compressed_params = 0;  // same model at block size k
  std::size_t dense_matrix_params = 0;
  std::size_t compressed_matrix_params = 0;
  double compression_ratio = 1.0;         // dense/compressed, all params
  double matrix_compression_ratio = 1.0;  // matrices only
  double complexity_ratio = 1.0;          // FFT-path ops / dense-path ops
};

CompressionStats compression_stats(std::span<const MatrixShape> shapes,
                                   std::size_t k);

}  // namespace bclstm

#endif  // BCLSTM_CIRCULANT_HPP_

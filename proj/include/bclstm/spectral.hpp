#ifndef BCLSTM_SPECTRAL_HPP_
#define BCLSTM_SPECTRAL_HPP_

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "bclstm/fxp.hpp"

namespace bclstm {

using Complex = std::complex<double>;

// DFT of a real length-k vector, stored as the k/2+1 non-redundant bins.
// The remaining bins follow from conjugate symmetry: bin[k-i] = conj(bin[i]).
struct PackedSpectrum {
  std::size_t k = 0;
  std::vector<Complex> bins;  // size k/2 + 1

  std::size_t bin_count() const { return bins.size(); }
};

// Forward transform, radix-2 decimation in time with precomputed twiddles.
// Throws std::invalid_argument unless k is a power of two >= 2.
PackedSpectrum dft(std::span<const double> x);

// Inverse transform including the 1/k normalization.
std::vector<double> idft(const PackedSpectrum& s);

// bins[j] = a.bins[j] * b.bins[j]; throws on size mismatch.
PackedSpectrum spectrum_pointwise_mul(const PackedSpectrum& a,
                                      const PackedSpectrum& b);

// Expand the packed form to all k bins / re-pack a conjugate-symmetric
// spectrum. pack() trusts its input; symmetry is a caller invariant.
std::vector<Complex> unpack(const PackedSpectrum& s);
PackedSpectrum pack(std::span<const Complex> full);

// ---------------------------------------------------------------------------
// Fixed-point pipelines. Values are 16-bit two's complement; each butterfly
// stage applies the shift amount dictated by shift_schedule(policy, k), so
// the forward/inverse pair always carries exactly one 1/k normalization.

struct FxpComplex {
  std::int16_t re = 0;
  std::int16_t im = 0;
};

struct FxpPackedSpectrum {
  std::size_t k = 0;
  FxpFormat fmt;
  std::vector<FxpComplex> bins;  // size k/2 + 1
};

FxpPackedSpectrum dft_fxp(const FxpVector& x, ShiftPolicy policy);
FxpVector idft_fxp(const FxpPackedSpectrum& s, ShiftPolicy policy);

// Complex pointwise product; output uses out_fmt (usually the input-spectrum
// format so the accumulator stays in the datapath width).
FxpPackedSpectrum spectrum_pointwise_mul_fxp(const FxpPackedSpectrum& a,
                                             const FxpPackedSpectrum& b,
                                             FxpFormat out_fmt);

// Quantize an exact spectrum into the 16-bit representation.
FxpPackedSpectrum quantize_spectrum(const PackedSpectrum& s, FxpFormat fmt);

// ---------------------------------------------------------------------------
// Analytic real-operation counts (multiplies + additions) used by the
// compression statistics and the operator weights. One complex multiply is
// counted as 4 mul + 2 add; one complex add as 2 adds.

double fft_real_ops(std::size_t k);            // one k-point transform
double pointwise_real_ops(std::size_t k);      // packed product, k/2+1 bins
double spectral_accum_real_ops(std::size_t k); // adding one packed spectrum

}  // namespace bclstm

#endif  // BCLSTM_SPECTRAL_HPP_

#include "bclstm/spectral.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <stdexcept>

namespace bclstm {

namespace {

void require_pow2(std::size_t k) {
  if (!is_power_of_two(k) || k < 2) {
    throw std::invalid_argument("transform size " + std::to_string(k) +
                                " is not a power of two >= 2");
  }
}

// Twiddles for the forward transform: w[j] = exp(-2*pi*i*j/k), j in [0, k/2).
// Tables are built once per size and shared read-only afterwards.
const std::vector<Complex>& twiddle_table(std::size_t k) {
  static std::mutex mu;
  static std::map<std::size_t, std::unique_ptr<std::vector<Complex>>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(k);
  if (it == cache.end()) {
    auto table = std::make_unique<std::vector<Complex>>();
    table->reserve(k / 2);
    for (std::size_t j = 0; j < k / 2; ++j) {
      const double angle = -2.0 * std::numbers::pi * static_cast<double>(j) /
                           static_cast<double>(k);
      table->push_back(Complex{std::cos(angle), std::sin(angle)});
    }
    it = cache.emplace(k, std::move(table)).first;
  }
  return *it->second;
}

void bit_reverse_permute(std::vector<Complex>& a) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
}

// In-place radix-2 DIT transform; inverse uses conjugated twiddles and does
// not normalize (callers own the 1/k).
void fft_inplace(std::vector<Complex>& a, bool inverse) {
  const std::size_t n = a.size();
  const auto& tw = twiddle_table(n);
  bit_reverse_permute(a);
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t step = n / len;
    for (std::size_t start = 0; start < n; start += len) {
      for (std::size_t j = 0; j < len / 2; ++j) {
        Complex w = tw[j * step];
        if (inverse) w = std::conj(w);
        Complex& lo = a[start + j];
        Complex& hi = a[start + j + len / 2];
        const Complex t = hi * w;
        hi = lo - t;
        lo = lo + t;
      }
    }
  }
}

}  // namespace

PackedSpectrum dft(std::span<const double> x) {
  const std::size_t k = x.size();
  require_pow2(k);
  std::vector<Complex> a(k);
  for (std::size_t i = 0; i < k; ++i) a[i] = Complex{x[i], 0.0};
  fft_inplace(a, /*inverse=*/false);
  PackedSpectrum s;
  s.k = k;
  s.bins.assign(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(k / 2 + 1));
  return s;
}

std::vector<double> idft(const PackedSpectrum& s) {
  require_pow2(s.k);
  if (s.bins.size() != s.k / 2 + 1) {
    throw std::invalid_argument("packed spectrum has wrong bin count");
  }
  std::vector<Complex> a = unpack(s);
  fft_inplace(a, /*inverse=*/true);
  std::vector<double> out(s.k);
  const double scale = 1.0 / static_cast<double>(s.k);
  for (std::size_t i = 0; i < s.k; ++i) out[i] = a[i].real() * scale;
  return out;
}

PackedSpectrum spectrum_pointwise_mul(const PackedSpectrum& a,
                                      const PackedSpectrum& b) {
  if (a.k != b.k) {
    throw std::invalid_argument("spectrum_pointwise_mul: size mismatch " +
                                std::to_string(a.k) + " vs " +
                                std::to_string(b.k));
  }
  PackedSpectrum out;
  out.k = a.k;
  out.bins.resize(a.bins.size());
  for (std::size_t j = 0; j < a.bins.size(); ++j) {
    out.bins[j] = a.bins[j] * b.bins[j];
  }
  return out;
}

std::vector<Complex> unpack(const PackedSpectrum& s) {
  std::vector<Complex> full(s.k);
  for (std::size_t j = 0; j <= s.k / 2; ++j) full[j] = s.bins[j];
  for (std::size_t j = s.k / 2 + 1; j < s.k; ++j) {
    full[j] = std::conj(s.bins[s.k - j]);
  }
  return full;
}

PackedSpectrum pack(std::span<const Complex> full) {
  const std::size_t k = full.size();
  require_pow2(k);
  PackedSpectrum s;
  s.k = k;
  s.bins.assign(full.begin(), full.begin() + static_cast<std::ptrdiff_t>(k / 2 + 1));
  return s;
}

// ---------------------------------------------------------------------------
// Fixed-point kernels.

namespace {

struct FxpComplex32 {
  std::int32_t re = 0;
  std::int32_t im = 0;
};

// w * b where w is a quantized twiddle (frac tw_frac) and b carries the data
// format. The product is shifted back to the data format before the
// add/subtract, so the pass-through operand aligns.
FxpComplex32 cmul_twiddle(FxpComplex w, FxpComplex32 b, int tw_frac) {
  const std::int64_t re = static_cast<std::int64_t>(w.re) * b.re -
                          static_cast<std::int64_t>(w.im) * b.im;
  const std::int64_t im = static_cast<std::int64_t>(w.re) * b.im +
                          static_cast<std::int64_t>(w.im) * b.re;
  FxpComplex32 out;
  out.re = saturate32(rne_shift_right(re, tw_frac));
  out.im = saturate32(rne_shift_right(im, tw_frac));
  return out;
}

std::vector<FxpComplex> quantized_twiddles(std::size_t k, FxpFormat fmt,
                                           bool inverse) {
  std::vector<FxpComplex> tw(k / 2);
  for (std::size_t j = 0; j < k / 2; ++j) {
    const double sign = inverse ? 1.0 : -1.0;
    const double angle = sign * 2.0 * std::numbers::pi *
                         static_cast<double>(j) / static_cast<double>(k);
    tw[j].re = quantize(std::cos(angle), fmt).raw;
    tw[j].im = quantize(std::sin(angle), fmt).raw;
  }
  return tw;
}

void bit_reverse_permute_fxp(std::vector<FxpComplex>& a) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
}

// Staged 16-bit transform. After every butterfly stage the 32-bit results are
// right-shifted by the scheduled amount (RNE) and saturated back to 16 bits.
void fft_inplace_fxp(std::vector<FxpComplex>& a, FxpFormat fmt, bool inverse,
                     const std::vector<int>& stage_shifts) {
  const std::size_t n = a.size();
  const auto tw = quantized_twiddles(n, fmt, inverse);
  bit_reverse_permute_fxp(a);
  std::size_t stage = 0;
  for (std::size_t len = 2; len <= n; len <<= 1, ++stage) {
    const std::size_t step = n / len;
    const int shift = stage_shifts[stage];
    for (std::size_t start = 0; start < n; start += len) {
      for (std::size_t j = 0; j < len / 2; ++j) {
        const FxpComplex w = tw[j * step];
        FxpComplex& lo = a[start + j];
        FxpComplex& hi = a[start + j + len / 2];
        const FxpComplex32 b{hi.re, hi.im};
        const FxpComplex32 t = cmul_twiddle(w, b, fmt.frac_bits);
        const std::int64_t lo_re = static_cast<std::int64_t>(lo.re) + t.re;
        const std::int64_t lo_im = static_cast<std::int64_t>(lo.im) + t.im;
        const std::int64_t hi_re = static_cast<std::int64_t>(lo.re) - t.re;
        const std::int64_t hi_im = static_cast<std::int64_t>(lo.im) - t.im;
        lo.re = saturate16(rne_shift_right(lo_re, shift));
        lo.im = saturate16(rne_shift_right(lo_im, shift));
        hi.re = saturate16(rne_shift_right(hi_re, shift));
        hi.im = saturate16(rne_shift_right(hi_im, shift));
      }
    }
  }
}

}  // namespace

FxpPackedSpectrum dft_fxp(const FxpVector& x, ShiftPolicy policy) {
  const std::size_t k = x.size();
  require_pow2(k);
  const ShiftSchedule sched = shift_schedule(policy, k);
  std::vector<FxpComplex> a(k);
  for (std::size_t i = 0; i < k; ++i) a[i] = FxpComplex{x.raw[i], 0};
  fft_inplace_fxp(a, x.fmt, /*inverse=*/false, sched.dft_stages);
  FxpPackedSpectrum s;
  s.k = k;
  s.fmt = x.fmt;
  s.bins.assign(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(k / 2 + 1));
  return s;
}

FxpVector idft_fxp(const FxpPackedSpectrum& s, ShiftPolicy policy) {
  require_pow2(s.k);
  if (s.bins.size() != s.k / 2 + 1) {
    throw std::invalid_argument("packed spectrum has wrong bin count");
  }
  const ShiftSchedule sched = shift_schedule(policy, s.k);
  std::vector<FxpComplex> a(s.k);
  for (std::size_t j = 0; j <= s.k / 2; ++j) a[j] = s.bins[j];
  for (std::size_t j = s.k / 2 + 1; j < s.k; ++j) {
    const FxpComplex src = s.bins[s.k - j];
    a[j] = FxpComplex{src.re, static_cast<std::int16_t>(
                                  src.im == -32768 ? 32767 : -src.im)};
  }
  fft_inplace_fxp(a, s.fmt, /*inverse=*/true, sched.idft_stages);
  FxpVector out;
  out.fmt = s.fmt;
  out.raw.resize(s.k);
  for (std::size_t i = 0; i < s.k; ++i) out.raw[i] = a[i].re;
  return out;
}

FxpPackedSpectrum spectrum_pointwise_mul_fxp(const FxpPackedSpectrum& a,
                                             const FxpPackedSpectrum& b,
                                             FxpFormat out_fmt) {
  if (a.k != b.k) {
    throw std::invalid_argument("spectrum_pointwise_mul_fxp: size mismatch");
  }
  const int shift = a.fmt.frac_bits + b.fmt.frac_bits - out_fmt.frac_bits;
  FxpPackedSpectrum out;
  out.k = a.k;
  out.fmt = out_fmt;
  out.bins.resize(a.bins.size());
  for (std::size_t j = 0; j < a.bins.size(); ++j) {
    const std::int64_t re =
        static_cast<std::int64_t>(a.bins[j].re) * b.bins[j].re -
        static_cast<std::int64_t>(a.bins[j].im) * b.bins[j].im;
    const std::int64_t im =
        static_cast<std::int64_t>(a.bins[j].re) * b.bins[j].im +
        static_cast<std::int64_t>(a.bins[j].im) * b.bins[j].re;
    out.bins[j].re = saturate16(rne_shift_right(re, shift));
    out.bins[j].im = saturate16(rne_shift_right(im, shift));
  }
  return out;
}

FxpPackedSpectrum quantize_spectrum(const PackedSpectrum& s, FxpFormat fmt) {
  FxpPackedSpectrum out;
  out.k = s.k;
  out.fmt = fmt;
  out.bins.resize(s.bins.size());
  for (std::size_t j = 0; j < s.bins.size(); ++j) {
    out.bins[j].re = quantize(s.bins[j].real(), fmt).raw;
    out.bins[j].im = quantize(s.bins[j].imag(), fmt).raw;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Operation counts. Convention: one complex multiply = 4 real multiplies +
// 2 real additions; one complex addition = 2 real additions; counts cover
// the packed (k/2+1 bin) representation.

double fft_real_ops(std::size_t k) {
  const double butterflies =
      static_cast<double>(k) / 2.0 * static_cast<double>(log2_exact(k));
  return butterflies * 10.0;  // complex mul (6) + two complex adds (4)
}

double pointwise_real_ops(std::size_t k) {
  return static_cast<double>(k / 2 + 1) * 6.0;
}

double spectral_accum_real_ops(std::size_t k) {
  return static_cast<double>(k / 2 + 1) * 2.0;
}

}  // namespace bclstm

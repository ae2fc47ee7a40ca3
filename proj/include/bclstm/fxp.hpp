#ifndef BCLSTM_FXP_HPP_
#define BCLSTM_FXP_HPP_

#include <cstdint>
#include <string>
#include <vector>

namespace bclstm {

// Signed 16-bit fixed-point format: 1 sign bit, (15 - frac_bits) integer
// bits, frac_bits fractional bits. Written "q<int>.<frac>", e.g. "q3.12".
struct FxpFormat {
  int frac_bits = 12;

  static constexpr int kTotalBits = 16;
  static constexpr std::int32_t kRawMax = 32767;
  static constexpr std::int32_t kRawMin = -32768;

  int integer_bits() const { return kTotalBits - 1 - frac_bits; }
  double resolution() const;
  double max_value() const;
  double min_value() const;
  std::string to_string() const;

  bool operator==(const FxpFormat&) const = default;
};

// Throws std::invalid_argument unless 0 <= frac_bits < 16.
FxpFormat make_format(int frac_bits);

// Parses "q3.12" style strings; integer + fractional bits must sum to 15.
FxpFormat parse_format(const std::string& text);

struct FxpScalar {
  std::int16_t raw = 0;
  FxpFormat fmt;

  double to_double() const;
};

struct FxpVector {
  std::vector<std::int16_t> raw;
  FxpFormat fmt;

  std::size_t size() const { return raw.size(); }
  FxpScalar at(std::size_t i) const { return FxpScalar{raw[i], fmt}; }
};

// Round-to-nearest-even quantization with saturation at the format bounds.
// NaN maps to zero.
FxpScalar quantize(double x, FxpFormat fmt);
double dequantize(FxpScalar v);

FxpVector quantize_vector(const std::vector<double>& x, FxpFormat fmt);
std::vector<double> dequantize_vector(const FxpVector& v);

// Saturating add; both operands must share a format.
FxpScalar fxp_add(FxpScalar a, FxpScalar b);

// Full-precision 32-bit product, RNE-shifted into out_fmt, saturated.
FxpScalar fxp_mul(FxpScalar a, FxpScalar b, FxpFormat out_fmt);
// Result keeps a's format.
FxpScalar fxp_mul(FxpScalar a, FxpScalar b);

// Shift a raw integer value right by `bits` with round-to-nearest-even.
// Negative `bits` shifts left. Exposed for the staged transform kernels.
std::int64_t rne_shift_right(std::int64_t value, int bits);
std::int16_t saturate16(std::int64_t value);
std::int32_t saturate32(std::int64_t value);

// Placement of the 1/k normalization shifts across transform stages.
enum class ShiftPolicy {
  AllAtIdftEnd,       // single log2(k)-bit shift in the last inverse stage
  DistributedInIdft,  // one bit after each inverse stage
  DistributedInDft,   // one bit after each forward stage (pre-scales the
                      // spectrum so the accumulator sees smaller values)
};

ShiftPolicy parse_shift_policy(const std::string& text);
std::string to_string(ShiftPolicy policy);

// Per-stage shift amounts for a k-point forward/inverse transform pair.
// The entries always sum to log2(k).
struct ShiftSchedule {
  std::vector<int> dft_stages;
  std::vector<int> idft_stages;

  int total() const;
};

// Throws std::invalid_argument if k is not a power of two >= 2.
ShiftSchedule shift_schedule(ShiftPolicy policy, std::size_t k);

bool is_power_of_two(std::size_t k);
int log2_exact(std::size_t k);

}  // namespace bclstm

#endif  // BCLSTM_FXP_HPP_

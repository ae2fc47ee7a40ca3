#include "bclstm/fxp.hpp"

#include <cmath>
#include <stdexcept>

namespace bclstm {

double FxpFormat::resolution() const { return std::ldexp(1.0, -frac_bits); }

double FxpFormat::max_value() const {
  return std::ldexp(static_cast<double>(kRawMax), -frac_bits);
}

double FxpFormat::min_value() const {
  return std::ldexp(static_cast<double>(kRawMin), -frac_bits);
}

std::string FxpFormat::to_string() const {
  return "q" + std::to_string(integer_bits()) + "." + std::to_string(frac_bits);
}

FxpFormat make_format(int frac_bits) {
  if (frac_bits < 0 || frac_bits >= FxpFormat::kTotalBits) {
    throw std::invalid_argument("fxp: frac_bits out of range [0,16): " +
                                std::to_string(frac_bits));
  }
  return FxpFormat{frac_bits};
}

FxpFormat parse_format(const std::string& text) {
  if (text.size() < 4 || (text[0] != 'q' && text[0] != 'Q')) {
    throw std::invalid_argument("fxp: bad format string '" + text +
                                "', expected q<int>.<frac>");
  }
  const auto dot = text.find('.');
  if (dot == std::string::npos) {
    throw std::invalid_argument("fxp: bad format string '" + text + "'");
  }
  int int_bits = 0;
  int frac_bits = 0;
  try {
    int_bits = std::stoi(text.substr(1, dot - 1));
    frac_bits = std::stoi(text.substr(dot + 1));
  } catch (const std::exception&) {
    throw std::invalid_argument("fxp: bad format string '" + text + "'");
  }
  if (int_bits + frac_bits != FxpFormat::kTotalBits - 1) {
    throw std::invalid_argument("fxp: q" + std::to_string(int_bits) + "." +
                                std::to_string(frac_bits) +
                                " does not fill a 16-bit word");
  }
  return make_format(frac_bits);
}

double FxpScalar::to_double() const {
  return std::ldexp(static_cast<double>(raw), -fmt.frac_bits);
}

std::int16_t saturate16(std::int64_t value) {
  if (value > FxpFormat::kRawMax) return static_cast<std::int16_t>(FxpFormat::kRawMax);
  if (value < FxpFormat::kRawMin) return static_cast<std::int16_t>(FxpFormat::kRawMin);
  return static_cast<std::int16_t>(value);
}

std::int32_t saturate32(std::int64_t value) {
  constexpr std::int64_t kMax = 2147483647;
  constexpr std::int64_t kMin = -2147483648LL;
  if (value > kMax) return static_cast<std::int32_t>(kMax);
  if (value < kMin) return static_cast<std::int32_t>(kMin);
  return static_cast<std::int32_t>(value);
}

FxpScalar quantize(double x, FxpFormat fmt) {
  if (std::isnan(x)) return FxpScalar{0, fmt};
  // Scaling by 2^frac is exact; nearbyint rounds half-to-even in the
  // default FP environment.
  const double scaled = std::ldexp(x, fmt.frac_bits);
  if (scaled >= static_cast<double>(FxpFormat::kRawMax)) {
    return FxpScalar{static_cast<std::int16_t>(FxpFormat::kRawMax), fmt};
  }
  if (scaled <= static_cast<double>(FxpFormat::kRawMin)) {
    return FxpScalar{static_cast<std::int16_t>(FxpFormat::kRawMin), fmt};
  }
  return FxpScalar{static_cast<std::int16_t>(std::nearbyint(scaled)), fmt};
}

double dequantize(FxpScalar v) { return v.to_double(); }

FxpVector quantize_vector(const std::vector<double>& x, FxpFormat fmt) {
  FxpVector out;
  out.fmt = fmt;
  out.raw.reserve(x.size());
  for (double v : x) out.raw.push_back(quantize(v, fmt).raw);
  return out;
}

std::vector<double> dequantize_vector(const FxpVector& v) {
  std::vector<double> out;
  out.reserve(v.raw.size());
  for (std::int16_t r : v.raw) {
    out.push_back(std::ldexp(static_cast<double>(r), -v.fmt.frac_bits));
  }
  return out;
}

FxpScalar fxp_add(FxpScalar a, FxpScalar b) {
  if (a.fmt != b.fmt) {
    throw std::invalid_argument("fxp_add: format mismatch " +
                                a.fmt.to_string() + " vs " + b.fmt.to_string());
  }
  const std::int64_t sum =
      static_cast<std::int64_t>(a.raw) + static_cast<std::int64_t>(b.raw);
  return FxpScalar{saturate16(sum), a.fmt};
}

std::int64_t rne_shift_right(std::int64_t value, int bits) {
  if (bits <= 0) return value << (-bits);
  if (bits >= 63) return 0;
  const std::int64_t floor = value >> bits;  // arithmetic, rounds toward -inf
  const std::int64_t rem = value - (floor << bits);
  const std::int64_t half = std::int64_t{1} << (bits - 1);
  if (rem > half || (rem == half && (floor & 1))) return floor + 1;
  return floor;
}

FxpScalar fxp_mul(FxpScalar a, FxpScalar b, FxpFormat out_fmt) {
  const std::int64_t prod =
      static_cast<std::int64_t>(a.raw) * static_cast<std::int64_t>(b.raw);
  const int shift = a.fmt.frac_bits + b.fmt.frac_bits - out_fmt.frac_bits;
  return FxpScalar{saturate16(rne_shift_right(prod, shift)), out_fmt};
}

FxpScalar fxp_mul(FxpScalar a, FxpScalar b) { return fxp_mul(a, b, a.fmt); }

ShiftPolicy parse_shift_policy(const std::string& text) {
  if (text == "all-at-idft-end" || text == "all_at_idft_end") {
    return ShiftPolicy::AllAtIdftEnd;
  }
  if (text == "distributed-in-idft" || text == "distributed_in_idft") {
    return ShiftPolicy::DistributedInIdft;
  }
  if (text == "distributed-in-dft" || text == "distributed_in_dft") {
    return ShiftPolicy::DistributedInDft;
  }
  throw std::invalid_argument("unknown shift policy '" + text + "'");
}

std::string to_string(ShiftPolicy policy) {
  switch (policy) {
    case ShiftPolicy::AllAtIdftEnd: return "all-at-idft-end";
    case ShiftPolicy::DistributedInIdft: return "distributed-in-idft";
    case ShiftPolicy::DistributedInDft: return "distributed-in-dft";
  }
  return "?";
}

int ShiftSchedule::total() const {
  int sum = 0;
  for (int s : dft_stages) sum += s;
  for (int s : idft_stages) sum += s;
  return sum;
}

bool is_power_of_two(std::size_t k) { return k != 0 && (k & (k - 1)) == 0; }

int log2_exact(std::size_t k) {
  int l = 0;
  while ((std::size_t{1} << l) < k) ++l;
  return l;
}

ShiftSchedule shift_schedule(ShiftPolicy policy, std::size_t k) {
  if (!is_power_of_two(k) || k < 2) {
    throw std::invalid_argument("shift_schedule: block size " +
                                std::to_string(k) + " is not a power of two >= 2");
  }
  const int stages = log2_exact(k);
  ShiftSchedule sched;
  sched.dft_stages.assign(stages, 0);
  sched.idft_stages.assign(stages, 0);
  switch (policy) {
    case ShiftPolicy::AllAtIdftEnd:
      sched.idft_stages.back() = stages;
      break;
    case ShiftPolicy::DistributedInIdft:
      sched.idft_stages.assign(stages, 1);
      break;
    case ShiftPolicy::DistributedInDft:
      sched.dft_stages.assign(stages, 1);
      break;
  }
  return sched;
}

}  // namespace bclstm

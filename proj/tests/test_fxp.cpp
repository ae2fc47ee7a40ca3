#include "doctest.h"

#include <random>
#include <stdexcept>

#include "bclstm/fxp.hpp"
#include "oracles.hpp"

using namespace bclstm;

namespace {
const FxpFormat q3_12 = make_format(12);
}

TEST_CASE("format parsing and ranges") {
  CHECK(parse_format("q3.12") == q3_12);
  CHECK(parse_format("q3.12").integer_bits() == 3);
  CHECK(parse_format("q1.14").frac_bits == 14);
  CHECK_THROWS_AS(parse_format("q3.13"), std::invalid_argument);
  CHECK_THROWS_AS(parse_format("x3.12"), std::invalid_argument);
  CHECK_THROWS_AS(parse_format("q15"), std::invalid_argument);
  CHECK(q3_12.max_value() == doctest::Approx(7.999755859375));
  CHECK(q3_12.min_value() == -8.0);
  CHECK(q3_12.to_string() == "q3.12");
}

TEST_CASE("quantize examples") {
  CHECK(quantize(0.0, q3_12).raw == 0);
  CHECK(quantize(0.5, q3_12).raw == 2048);
  CHECK(quantize(9.7, q3_12).raw == 32767);   // positive saturation
  CHECK(quantize(-9.7, q3_12).raw == -32768); // negative saturation
  CHECK(quantize(1.0, q3_12).raw == 4096);
}

TEST_CASE("quantize matches the exact rounding oracle") {
  std::mt19937_64 gen(101);
  for (int frac : {4, 8, 12, 15}) {
    const FxpFormat fmt = make_format(frac);
    const double range = fmt.max_value() * 1.5;
    for (int i = 0; i < 5000; ++i) {
      const double x = oracles::random_vector(gen, 1, -range, range)[0];
      CAPTURE(x);
      CAPTURE(frac);
      CHECK(quantize(x, fmt).raw == oracles::quantize_raw(x, frac));
    }
  }
}

TEST_CASE("quantize round trip and monotonicity") {
  std::mt19937_64 gen(102);
  const double eps = q3_12.resolution() / 2.0;
  double prev_x = -1e9;
  std::int16_t prev_raw = -32768;
  auto xs = oracles::random_vector(gen, 2000, q3_12.min_value(), q3_12.max_value());
  std::sort(xs.begin(), xs.end());
  for (double x : xs) {
    const FxpScalar v = quantize(x, q3_12);
    CHECK(std::abs(v.to_double() - x) <= eps + 1e-15);
    // monotone non-decreasing
    CHECK(v.raw >= prev_raw);
    prev_raw = v.raw;
    prev_x = x;
  }
  (void)prev_x;
}

TEST_CASE("fxp_mul identity and exact cases") {
  std::mt19937_64 gen(103);
  const FxpScalar one = quantize(1.0, q3_12);
  for (int i = 0; i < 200; ++i) {
    const double x = oracles::random_vector(gen, 1, -7.9, 7.9)[0];
    const FxpScalar v = quantize(x, q3_12);
    CHECK(fxp_mul(one, v).raw == v.raw);
  }
  const FxpScalar half = quantize(0.5, q3_12);
  CHECK(fxp_mul(half, half).raw == 1024);  // 0.25
}

TEST_CASE("fxp_mul matches the big-integer oracle") {
  std::mt19937_64 gen(104);
  std::uniform_int_distribution<int> raw_dist(-32768, 32767);
  std::uniform_int_distribution<int> frac_dist(6, 15);
  for (int i = 0; i < 1000; ++i) {
    const int fa = frac_dist(gen), fb = frac_dist(gen), fo = frac_dist(gen);
    const FxpScalar a{static_cast<std::int16_t>(raw_dist(gen)), make_format(fa)};
    const FxpScalar b{static_cast<std::int16_t>(raw_dist(gen)), make_format(fb)};
    const FxpScalar r = fxp_mul(a, b, make_format(fo));
    CHECK(r.raw == oracles::mul_raw(a.raw, fa, b.raw, fb, fo));
  }
}

TEST_CASE("fxp_add identities, saturation, oracle") {
  std::mt19937_64 gen(105);
  std::uniform_int_distribution<int> raw_dist(-32768, 32767);
  const FxpScalar zero{0, q3_12};
  const FxpScalar max{32767, q3_12};
  const FxpScalar min{-32768, q3_12};
  CHECK(fxp_add(max, max).raw == 32767);
  CHECK(fxp_add(min, min).raw == -32768);
  for (int i = 0; i < 1000; ++i) {
    const FxpScalar a{static_cast<std::int16_t>(raw_dist(gen)), q3_12};
    const FxpScalar b{static_cast<std::int16_t>(raw_dist(gen)), q3_12};
    CHECK(fxp_add(a, zero).raw == a.raw);
    CHECK(fxp_add(a, b).raw == oracles::add_raw(a.raw, b.raw));
  }
  CHECK_THROWS_AS(fxp_add(FxpScalar{1, q3_12}, FxpScalar{1, make_format(11)}),
                  std::invalid_argument);
}

TEST_CASE("rne shift rounds half to even") {
  CHECK(rne_shift_right(5, 1) == 2);    // 2.5 -> 2
  CHECK(rne_shift_right(7, 1) == 4);    // 3.5 -> 4
  CHECK(rne_shift_right(-5, 1) == -2);  // -2.5 -> -2
  CHECK(rne_shift_right(-7, 1) == -4);  // -3.5 -> -4
  CHECK(rne_shift_right(12, 2) == 3);
  CHECK(rne_shift_right(3, -2) == 12);
}

TEST_CASE("shift schedules per policy") {
  const ShiftSchedule all = shift_schedule(ShiftPolicy::AllAtIdftEnd, 8);
  CHECK(all.dft_stages == std::vector<int>{0, 0, 0});
  CHECK(all.idft_stages == std::vector<int>{0, 0, 3});

  const ShiftSchedule idft = shift_schedule(ShiftPolicy::DistributedInIdft, 8);
  CHECK(idft.dft_stages == std::vector<int>{0, 0, 0});
  CHECK(idft.idft_stages == std::vector<int>{1, 1, 1});

  const ShiftSchedule dft = shift_schedule(ShiftPolicy::DistributedInDft, 8);
  CHECK(dft.dft_stages == std::vector<int>{1, 1, 1});
  CHECK(dft.idft_stages == std::vector<int>{0, 0, 0});

  for (ShiftPolicy p : {ShiftPolicy::AllAtIdftEnd, ShiftPolicy::DistributedInIdft,
                        ShiftPolicy::DistributedInDft}) {
    CHECK(shift_schedule(p, 2).total() == 1);
    for (std::size_t k = 2; k <= 1024; k *= 2) {
      CHECK(shift_schedule(p, k).total() == log2_exact(k));
    }
  }
  CHECK_THROWS_AS(shift_schedule(ShiftPolicy::AllAtIdftEnd, 3),
                  std::invalid_argument);
  CHECK_THROWS_AS(shift_schedule(ShiftPolicy::AllAtIdftEnd, 0),
                  std::invalid_argument);
}

TEST_CASE("policy names round trip") {
  for (ShiftPolicy p : {ShiftPolicy::AllAtIdftEnd, ShiftPolicy::DistributedInIdft,
                        ShiftPolicy::DistributedInDft}) {
    CHECK(parse_shift_policy(to_string(p)) == p);
  }
  CHECK_THROWS_AS(parse_shift_policy("nope"), std::invalid_argument);
}

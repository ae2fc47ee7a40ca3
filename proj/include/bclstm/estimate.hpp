#ifndef BCLSTM_ESTIMATE_HPP_
#define BCLSTM_ESTIMATE_HPP_

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace bclstm {

enum class OpKind { CirculantConv, EwiseMul, EwiseAdd, Sigmoid, Tanh };
constexpr std::size_t kOpKindCount = 5;

std::string to_string(OpKind kind);

struct PlatformProfile {
  std::string name;
  double dsp = 0, bram = 0, lut = 0, ff = 0;
  double frequency_hz = 200e6;
};

// Budgets of the two supported boards.
PlatformProfile platform_ku060();
PlatformProfile platform_7v3();
PlatformProfile platform_unlimited();
PlatformProfile platform_preset(const std::string& name);

struct ResourceTotals {
  double dsp = 0, bram = 0, lut = 0, ff = 0;
};

// Per-unit-parallelism resource increments for each operator kind, plus the
// affine stage-depth model D_k = depth_base + depth_per_op * critical-path
// length. The defaults are synthetic placeholders, not profiled silicon;
// only the model algebra is load-bearing.
struct OpCostProfile {
  std::array<ResourceTotals, kOpKindCount> unit;
  double depth_base = 0.0;
  double depth_per_op = 5.0;

  const ResourceTotals& cost(OpKind kind) const {
    return unit[static_cast<std::size_t>(kind)];
  }
  static OpCostProfile defaults();
};

// Stage timing: T = ceil(max_i(Q_i/N_i) / R) + D. Inputs are parallel
// spans over the stage's operators.
double stage_cycles(std::span<const double> workloads,
                    std::span<const int> parallelism, int replication,
                    double depth);

// FPS = frequency / max stage cycles.
double fps(std::span<const double> cycles, double frequency_hz);

struct FitReport {
  bool feasible = false;
  double util_dsp = 0, util_bram = 0, util_lut = 0, util_ff = 0;
};

FitReport check_fit(const ResourceTotals& totals, const PlatformProfile& p);

// Linear totals for one stage at replication 1: sum of unit costs times
// parallelism over the stage members.
ResourceTotals stage_resources(std::span<const OpKind> kinds,
                               std::span<const int> parallelism,
                               const OpCostProfile& costs);

ResourceTotals scale(const ResourceTotals& r, double factor);
ResourceTotals add(const ResourceTotals& a, const ResourceTotals& b);

}  // namespace bclstm

#endif  // BCLSTM_ESTIMATE_HPP_

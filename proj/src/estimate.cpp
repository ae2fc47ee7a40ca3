#include "bclstm/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace bclstm {

std::string to_string(OpKind kind) {
  switch (kind) {
    case OpKind::CirculantConv: return "circulant-conv";
    case OpKind::EwiseMul: return "ewise-mul";
    case OpKind::EwiseAdd: return "ewise-add";
    case OpKind::Sigmoid: return "sigmoid";
    case OpKind::Tanh: return "tanh";
  }
  return "?";
}

PlatformProfile platform_ku060() {
  return PlatformProfile{"ku060", 2760, 1080, 331680, 663360, 200e6};
}

PlatformProfile platform_7v3() {
  return PlatformProfile{"7v3", 3600, 1470, 859200, 429600, 200e6};
}

PlatformProfile platform_unlimited() {
  const double inf = std::numeric_limits<double>::infinity();
  return PlatformProfile{"unlimited", inf, inf, inf, inf, 200e6};
}

PlatformProfile platform_preset(const std::string& name) {
  if (name == "ku060") return platform_ku060();
  if (name == "7v3") return platform_7v3();
  if (name == "unlimited") return platform_unlimited();
  throw std::invalid_argument("unknown platform preset '" + name + "'");
}

OpCostProfile OpCostProfile::defaults() {
  OpCostProfile p;
  auto set = [&p](OpKind k, double dsp, double bram, double lut, double ff) {
    p.unit[static_cast<std::size_t>(k)] = ResourceTotals{dsp, bram, lut, ff};
  };
  // Synthetic per-lane costs: a serial circulant-conv engine (butterfly +
  // complex MAC) against single-lane element-wise units.
  set(OpKind::CirculantConv, 24, 8, 1200, 1500);
  set(OpKind::EwiseMul, 2, 1, 150, 200);
  set(OpKind::EwiseAdd, 0, 1, 120, 150);
  set(OpKind::Sigmoid, 2, 1, 250, 300);
  set(OpKind::Tanh, 2, 1, 250, 300);
  return p;
}

double stage_cycles(std::span<const double> workloads,
                    std::span<const int> parallelism, int replication,
                    double depth) {
  if (workloads.empty() || workloads.size() != parallelism.size()) {
    throw std::invalid_argument("stage_cycles: bad stage description");
  }
  if (replication < 1) {
    throw std::invalid_argument("stage_cycles: replication must be >= 1");
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < workloads.size(); ++i) {
    worst = std::max(worst, workloads[i] / static_cast<double>(parallelism[i]));
  }
  return std::ceil(worst / static_cast<double>(replication)) + depth;
}

double fps(std::span<const double> cycles, double frequency_hz) {
  if (cycles.empty()) {
    throw std::invalid_argument("fps: no stages");
  }
  const double worst = *std::max_element(cycles.begin(), cycles.end());
  return frequency_hz / worst;
}

FitReport check_fit(const ResourceTotals& totals, const PlatformProfile& p) {
  FitReport r;
  r.util_dsp = totals.dsp / p.dsp;
  r.util_bram = totals.bram / p.bram;
  r.util_lut = totals.lut / p.lut;
  r.util_ff = totals.ff / p.ff;
  r.feasible = totals.dsp <= p.dsp && totals.bram <= p.bram &&
               totals.lut <= p.lut && totals.ff <= p.ff;
  return r;
}

ResourceTotals stage_resources(std::span<const OpKind> kinds,
                               std::span<const int> parallelism,
                               const OpCostProfile& costs) {
  if (kinds.size() != parallelism.size()) {
    throw std::invalid_argument("stage_resources: bad stage description");
  }
  ResourceTotals t;
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    const ResourceTotals& u = costs.cost(kinds[i]);
    const double n = static_cast<double>(parallelism[i]);
    t.dsp += u.dsp * n;
    t.bram += u.bram * n;
    t.lut += u.lut * n;
    t.ff += u.ff * n;
  }
  return t;
}

ResourceTotals scale(const ResourceTotals& r, double factor) {
  return ResourceTotals{r.dsp * factor, r.bram * factor, r.lut * factor,
                        r.ff * factor};
}

ResourceTotals add(const ResourceTotals& a, const ResourceTotals& b) {
  return ResourceTotals{a.dsp + b.dsp, a.bram + b.bram, a.lut + b.lut,
                        a.ff + b.ff};
}

}  // namespace bclstm

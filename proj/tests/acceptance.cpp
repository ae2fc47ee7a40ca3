// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Tolerances are pinned in code next to each check.
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <random>
#include <vector>

#include "bclstm/graph.hpp"
#include "bclstm/model_io.hpp"
#include "oracles.hpp"

using namespace bclstm;

namespace {

int failures = 0;

void report(int index, const char* name, bool pass, const std::string& detail) {
  std::printf("[%s] criterion %2d: %s%s%s\n", pass ? "PASS" : "FAIL", index,
              name, detail.empty() ? "" : " -- ", detail.c_str());
  if (!pass) ++failures;
}

std::string fmt(const char* format, ...) {
  va_list args;
  va_start(args, format);
  char buf[512];
  std::vsnprintf(buf, sizeof buf, format, args);
  va_end(args);
  return std::string(buf);
}

BlockCirculantMatrix random_bcm(std::mt19937_64& gen, std::size_t m,
                                std::size_t n, std::size_t k) {
  BlockCirculantMatrix b(m, n, k);
  for (double& v : b.data()) v = oracles::random_vector(gen, 1)[0];
  return b;
}

// 1. matvec_fft vs matvec_naive, 500 random instances, 1e-8 relative, <10 s.
void criterion_oracle_equivalence() {
  std::mt19937_64 gen(9001);
  std::uniform_int_distribution<std::size_t> pq(1, 4);
  const std::size_t ks[4] = {2, 4, 8, 16};
  double worst = 0.0;
  const auto t0 = std::chrono::steady_clock::now();
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t k = ks[trial % 4];
    const std::size_t m = pq(gen) * k, n = pq(gen) * k;
    const BlockCirculantMatrix b = random_bcm(gen, m, n, k);
    const auto x = oracles::random_vector(gen, n);
    const auto fft = matvec_fft(b, x);
    const auto naive = matvec_naive(b, x);
    double scale = 1.0;
    for (double v : naive) scale = std::max(scale, std::abs(v));
    for (std::size_t i = 0; i < fft.size(); ++i) {
      worst = std::max(worst, std::abs(fft[i] - naive[i]) / scale);
    }
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  report(1, "fft path equals naive oracle (500 instances, k in {2,4,8,16})",
         worst < 1e-8 && seconds < 10.0,
         fmt("max rel err %.3e, %.2f s", worst, seconds));
}

// 2. Exact call-count contract with precomputed spectra.
void criterion_call_counts() {
  std::mt19937_64 gen(9002);
  bool ok = true;
  std::string detail;
  for (const auto [p, q, k] :
       {std::array<std::size_t, 3>{1, 1, 2}, std::array<std::size_t, 3>{3, 4, 8},
        std::array<std::size_t, 3>{4, 2, 16}}) {
    const BlockCirculantMatrix b = random_bcm(gen, p * k, q * k, k);
    const SpectralWeights sw = SpectralWeights::from(b);
    CallCounters counters;
    matvec_fft(sw, oracles::random_vector(gen, q * k), &counters);
    ok = ok && counters.dft() == q && counters.idft() == p &&
         counters.pointwise() == p * q;
    detail += fmt("p=%zu q=%zu: dft=%llu idft=%llu pw=%llu; ", p, q,
                  (unsigned long long)counters.dft(),
                  (unsigned long long)counters.idft(),
                  (unsigned long long)counters.pointwise());
  }
  report(2, "q DFT / p IDFT / p*q pointwise calls per mat-vec", ok, detail);
}

// 3. Storage: dense/k exactly when k | m,n; sweep ratio shape.
void criterion_storage() {
  bool exact_ok = true;
  for (std::size_t k : {2u, 4u, 8u, 16u}) {
    const BlockCirculantMatrix b(64, 128, k);
    exact_ok = exact_ok && b.param_count() == 64 * 128 / k;
  }
  const LstmArchSpec arch = arch_preset("google");
  bool ratio_ok = true;
  std::string detail = exact_ok ? "dense/k exact; " : "dense/k WRONG; ";
  std::size_t prev = compression_stats(arch, 1).compressed_params;
  for (std::size_t k : {2u, 4u, 8u, 16u}) {
    const std::size_t cur = compression_stats(arch, k).compressed_params;
    const double ratio = static_cast<double>(prev) / static_cast<double>(cur);
    ratio_ok = ratio_ok && ratio >= 1.8 && ratio <= 2.05;
    detail += fmt("%.3f ", ratio);
    prev = cur;
  }
  report(3, "parameter count scales as 1/k (successive ratios in [1.8, 2.05])",
         exact_ok && ratio_ok, detail);
}

// 4. Matrix compression ratios at the published 7.9:1 / 15.9:1 within 5%.
void criterion_compression_ratio() {
  const LstmArchSpec arch = arch_preset("google");
  const double r8 = compression_stats(arch, 8).matrix_compression_ratio;
  const double r16 = compression_stats(arch, 16).matrix_compression_ratio;
  const bool ok = std::abs(r8 / 7.9 - 1.0) <= 0.05 &&
                  std::abs(r16 / 15.9 - 1.0) <= 0.05;
  report(4, "google preset matrix ratios within 5% of 7.9:1 and 15.9:1", ok,
         fmt("k=8: %.2f:1, k=16: %.2f:1", r8, r16));
}

// 5. PWL accuracy under 1% over 1e5 grid points; one multiply-add per eval.
void criterion_pwl() {
  double worst = 0.0;
  const PwlTable sig = build_pwl(PwlFunction::Sigmoid);
  const PwlTable th = build_pwl(PwlFunction::Tanh);
  for (int i = 0; i <= 100000; ++i) {
    const double x = -8.0 + 16.0 * static_cast<double>(i) / 100000.0;
    worst = std::max(worst, std::abs(pwl_eval_real(sig, x) -
                                     1.0 / (1.0 + std::exp(-x))));
    worst = std::max(worst, std::abs(pwl_eval_real(th, x) - std::tanh(x)));
  }
  FxpOpStats stats;
  const FxpFormat fmt12 = make_format(12);
  for (int i = 0; i < 1000; ++i) {
    pwl_eval(sig, quantize(-7.9 + 0.0158 * i, fmt12), &stats);
  }
  const bool ops_ok = stats.muls == 1000 && stats.adds == 1000;
  report(5, "22-segment pwl max error < 0.01; one mul + one add per eval",
         worst < 0.01 && ops_ok,
         fmt("max err %.5f, ops per eval: %.3f mul / %.3f add", worst,
             stats.muls / 1000.0, stats.adds / 1000.0));
}

// 6. Backward pass vs central finite differences, k in {2,4,8}, rel < 1e-5.
void criterion_gradients() {
  std::mt19937_64 gen(9006);
  double worst = 0.0;
  for (std::size_t k : {2u, 4u, 8u}) {
    const std::size_t m = 2 * k, n = 3 * k;
    BlockCirculantMatrix b = random_bcm(gen, m, n, k);
    const auto x = oracles::random_vector(gen, n);
    const auto upstream = oracles::random_vector(gen, m);
    auto loss = [&](const BlockCirculantMatrix& bb,
                    const std::vector<double>& xx) {
      const auto a = matvec_naive(bb, xx);
      double l = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) l += upstream[i] * a[i];
      return l;
    };
    const CirculantGrad g = grad(b, x, upstream);
    for (std::size_t idx = 0; idx < b.data().size(); ++idx) {
      const double fd = oracles::central_difference(
          [&](double v) {
            BlockCirculantMatrix bb = b;
            bb.data()[idx] = v;
            return loss(bb, x);
          },
          b.data()[idx], 1e-5);
      worst = std::max(worst, std::abs(g.d_weights.data()[idx] - fd) /
                                  std::max(1.0, std::abs(fd)));
    }
    for (std::size_t idx = 0; idx < x.size(); ++idx) {
      const double fd = oracles::central_difference(
          [&](double v) {
            auto xx = x;
            xx[idx] = v;
            return loss(b, xx);
          },
          x[idx], 1e-5);
      worst = std::max(worst,
                       std::abs(g.d_input[idx] - fd) / std::max(1.0, std::abs(fd)));
    }
  }
  report(6, "gradients match finite differences (k in {2,4,8})", worst < 1e-5,
         fmt("max rel err %.3e", worst));
}

// 7. Scheduler golden test + priority topological property.
void criterion_scheduler() {
  LstmArchSpec arch = arch_preset("google");
  arch.block_size = 8;  // the FFT8 design point
  const OpGraph g = build_graph(arch);
  const StageAssignment a =
      schedule(g, platform_ku060(), OpCostProfile::defaults());
  bool golden = a.stages.size() == 3;
  if (golden) {
    for (int v : a.stages[0]) {
      golden = golden &&
               g.nodes[static_cast<std::size_t>(v)].kind == OpKind::CirculantConv;
    }
    for (int v : a.stages[1]) {
      golden = golden &&
               g.nodes[static_cast<std::size_t>(v)].kind != OpKind::CirculantConv;
    }
    golden = golden && a.stages[2].size() == 1 &&
             g.nodes[static_cast<std::size_t>(a.stages[2][0])].kind ==
                 OpKind::CirculantConv;
  }

  // Analytic conv-vs-ewise weight gap, order-of-magnitude around 128x for
  // the FFT block sizes the design targets.
  double gap = 0.0;
  bool gap_ok = true;
  for (std::size_t k : {8u, 16u}) {
    LstmArchSpec ak = arch_preset("google");
    ak.block_size = k;
    const OpGraph gk = build_graph(ak);
    double conv_w = 0.0, ewise_w = 0.0;
    for (const auto& n : gk.nodes) {
      if (n.label == "layer0.fwd.conv_i") conv_w = n.weight;
      if (n.label == "layer0.fwd.mul_out") ewise_w = n.weight;
    }
    gap = conv_w / ewise_w;
    gap_ok = gap_ok && gap >= 32.0 && gap <= 512.0;
  }

  std::mt19937_64 gen(9007);
  std::uniform_int_distribution<std::size_t> size_dist(2, 50);
  std::uniform_real_distribution<double> wdist(0.1, 50.0);
  std::uniform_real_distribution<double> p(0.0, 1.0);
  bool topo_ok = true;
  for (int trial = 0; trial < 200; ++trial) {
    OpGraph r;
    const std::size_t nn = size_dist(gen);
    for (std::size_t i = 0; i < nn; ++i) {
      r.nodes.push_back(OpNode{static_cast<int>(i), OpKind::EwiseMul, "",
                               wdist(gen), 1.0});
    }
    for (std::size_t i = 0; i < nn; ++i) {
      for (std::size_t j = i + 1; j < nn; ++j) {
        if (p(gen) < 0.15) r.edges.emplace_back(static_cast<int>(i),
                                                static_cast<int>(j));
      }
    }
    const auto prio = compute_priorities(r);
    for (const auto& [from, to] : r.edges) {
      topo_ok = topo_ok && prio[static_cast<std::size_t>(from)] >
                               prio[static_cast<std::size_t>(to)];
    }
  }
  report(7, "google/ku060 schedules into 3 stages; priorities topological",
         golden && topo_ok && gap_ok,
         fmt("stages=%zu, conv/ewise gap %.0fx, 200 random DAGs %s",
             a.stages.size(), gap, topo_ok ? "ordered" : "BROKEN"));
}

// 8. Model algebra vs duplicate implementations; monotonicity + linearity.
void criterion_model_algebra() {
  std::mt19937_64 gen(9008);
  std::uniform_int_distribution<int> n_dist(1, 16);
  std::uniform_int_distribution<int> r_dist(1, 16);
  std::uniform_int_distribution<int> len_dist(1, 8);
  std::uniform_int_distribution<int> kind_dist(0, 4);
  const OpCostProfile costs = OpCostProfile::defaults();
  bool exact = true;
  for (int trial = 0; trial < 1000; ++trial) {
    const int len = len_dist(gen);
    std::vector<double> q(static_cast<std::size_t>(len));
    std::vector<int> n(static_cast<std::size_t>(len));
    std::vector<OpKind> kinds(static_cast<std::size_t>(len));
    for (int i = 0; i < len; ++i) {
      q[static_cast<std::size_t>(i)] = oracles::random_vector(gen, 1, 1, 1e5)[0];
      n[static_cast<std::size_t>(i)] = n_dist(gen);
      kinds[static_cast<std::size_t>(i)] = static_cast<OpKind>(kind_dist(gen));
    }
    const int r = r_dist(gen);
    const double d = oracles::random_vector(gen, 1, 0, 50)[0];

    // Duplicate implementations, transcribed independently of the library.
    double worst = 0.0;
    for (int i = 0; i < len; ++i) {
      worst = std::max(worst, q[static_cast<std::size_t>(i)] /
                                  n[static_cast<std::size_t>(i)]);
    }
    const double t_expect = std::ceil(worst / r) + d;
    exact = exact && stage_cycles(q, n, r, d) == t_expect;

    ResourceTotals expect;
    for (int i = 0; i < len; ++i) {
      const auto& u = costs.cost(kinds[static_cast<std::size_t>(i)]);
      expect.dsp += u.dsp * n[static_cast<std::size_t>(i)];
      expect.bram += u.bram * n[static_cast<std::size_t>(i)];
      expect.lut += u.lut * n[static_cast<std::size_t>(i)];
      expect.ff += u.ff * n[static_cast<std::size_t>(i)];
    }
    const ResourceTotals got = stage_resources(kinds, n, costs);
    exact = exact && got.dsp == expect.dsp && got.bram == expect.bram &&
            got.lut == expect.lut && got.ff == expect.ff;

    // FPS monotone non-increasing in every T_k; resources linear in R.
    std::vector<double> cyc = q;
    const double f0 = fps(cyc, 200e6);
    cyc[static_cast<std::size_t>(trial % len)] += 100.0;
    exact = exact && fps(cyc, 200e6) <= f0;
    const ResourceTotals doubled = scale(got, 2.0);
    exact = exact && doubled.dsp == 2.0 * got.dsp && doubled.ff == 2.0 * got.ff;
  }
  report(8, "timing/resource evaluators match duplicates on 1000 configs",
         exact, exact ? "exact equality" : "mismatch");
}

// 9. Shift-policy accuracy direction on a 1000-vector corpus.
void criterion_shift_policies() {
  const FxpFormat fmt12 = make_format(12);
  const std::size_t k = 16;
  std::mt19937_64 gen(9009);
  double mse_end = 0.0, mse_dist = 0.0;
  std::size_t count = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto x = oracles::random_vector(gen, k);
    const FxpVector xq = quantize_vector(x, fmt12);
    const auto reference = dequantize_vector(xq);
    const auto end = dequantize_vector(idft_fxp(
        dft_fxp(xq, ShiftPolicy::AllAtIdftEnd), ShiftPolicy::AllAtIdftEnd));
    const auto dist = dequantize_vector(idft_fxp(
        dft_fxp(xq, ShiftPolicy::DistributedInIdft),
        ShiftPolicy::DistributedInIdft));
    for (std::size_t i = 0; i < k; ++i) {
      mse_end += (end[i] - reference[i]) * (end[i] - reference[i]);
      mse_dist += (dist[i] - reference[i]) * (dist[i] - reference[i]);
      ++count;
    }
  }
  mse_end /= static_cast<double>(count);
  mse_dist /= static_cast<double>(count);
  report(9, "distributed idft shifts at least as accurate as one end shift",
         mse_dist <= mse_end * 1.05,
         fmt("mse distributed %.3e vs end %.3e", mse_dist, mse_end));
}

// 10. Out-of-scope items named; host-side bench: FFT beats dense at k=16.
void criterion_bench() {
  std::printf(
      "          not reproduced here (needs TIMIT training + physical FPGAs):\n"
      "          phone error rates, hardware FPS/latency/power, and the\n"
      "          sparse-pruning baseline comparisons. Covered instead by\n"
      "          criteria 1-9 plus this host-side timing check.\n");
  const std::size_t m = 1024, n = 665, k = 16;
  std::mt19937_64 gen(9010);
  BlockCirculantMatrix b = random_bcm(gen, m, n, k);
  const SpectralWeights sw = SpectralWeights::from(b);
  const auto dense = expand_to_dense(b);
  const auto x = oracles::random_vector(gen, n);

  double sink = 0.0;
  for (int w = 0; w < 2; ++w) {
    sink += matvec_fft(sw, x)[0] + dense_matvec(dense, m, n, x)[0];
  }
  const int reps = 50;
  const auto f0 = std::chrono::steady_clock::now();
  for (int r = 0; r < reps; ++r) sink += matvec_fft(sw, x)[0];
  const auto f1 = std::chrono::steady_clock::now();
  for (int r = 0; r < reps; ++r) sink += dense_matvec(dense, m, n, x)[0];
  const auto f2 = std::chrono::steady_clock::now();
  const double fft_s = std::chrono::duration<double>(f1 - f0).count();
  const double dense_s = std::chrono::duration<double>(f2 - f1).count();
  if (sink == 12345.6789) std::printf("%f\n", sink);  // defeat dead-code elim
  report(10, "fft mat-vec outruns the dense path at k=16, google gate shape",
         fft_s < dense_s,
         fmt("fft %.3f ms vs dense %.3f ms per call (speedup %.2fx)",
             1e3 * fft_s / reps, 1e3 * dense_s / reps, dense_s / fft_s));
}

}  // namespace

int main() {
  criterion_oracle_equivalence();
  criterion_call_counts();
  criterion_storage();
  criterion_compression_ratio();
  criterion_pwl();
  criterion_gradients();
  criterion_scheduler();
  criterion_model_algebra();
  criterion_shift_policies();
  criterion_bench();
  if (failures == 0) {
    std::printf("all acceptance criteria passed\n");
    return 0;
  }
  std::printf("%d acceptance criteria FAILED\n", failures);
  return 1;
}

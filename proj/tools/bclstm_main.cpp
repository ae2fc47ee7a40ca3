// bclstm: block-circulant LSTM compression, inference, scheduling and
// estimation from one binary. See README.md for formats and examples.
#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "bclstm/graph.hpp"
#include "bclstm/model_io.hpp"

using nlohmann::json;
using namespace bclstm;

namespace {

constexpr const char* kVersion = "0.1.0";
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;
constexpr int kExitVerification = 3;

struct VerificationFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

json base_report(const std::string& command) {
  json r;
  r["command"] = command;
  r["tool_version"] = kVersion;
  return r;
}

void emit_report(const json& report, const std::string& format,
                 const std::string& path) {
  if (!path.empty()) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write report to " + path);
    out << report.dump(2) << '\n';
  }
  if (format == "json") {
    std::cout << report.dump(2) << '\n';
  }
}

LstmArchSpec resolve_arch(const std::string& arch_arg, std::size_t k) {
  LstmArchSpec arch;
  if (arch_arg == "google" || arch_arg == "small") {
    arch = arch_preset(arch_arg);
  } else {
    std::ifstream in(arch_arg);
    if (!in) {
      throw std::invalid_argument("cannot open architecture file '" + arch_arg +
                                  "' (expected 'google', 'small' or a JSON file)");
    }
    json j;
    in >> j;
    arch = arch_from_json(j);
  }
  if (k != 0) arch.block_size = k;
  arch.validate();
  return arch;
}

PlatformProfile resolve_platform(const std::string& arg) {
  if (arg == "ku060" || arg == "7v3" || arg == "unlimited") {
    return platform_preset(arg);
  }
  std::ifstream in(arg);
  if (!in) {
    throw std::invalid_argument("cannot open platform profile '" + arg + "'");
  }
  json j;
  in >> j;
  PlatformProfile p;
  p.name = j.value("name", arg);
  p.dsp = j.at("dsp").get<double>();
  p.bram = j.at("bram").get<double>();
  p.lut = j.at("lut").get<double>();
  p.ff = j.at("ff").get<double>();
  p.frequency_hz = j.value("frequency_hz", 200e6);
  return p;
}

OpCostProfile resolve_costs(const std::string& arg) {
  if (arg.empty()) return OpCostProfile::defaults();
  std::ifstream in(arg);
  if (!in) throw std::invalid_argument("cannot open cost profile '" + arg + "'");
  json j;
  in >> j;
  OpCostProfile costs = OpCostProfile::defaults();
  static const std::pair<const char*, OpKind> kKinds[] = {
      {"circulant_conv", OpKind::CirculantConv},
      {"ewise_mul", OpKind::EwiseMul},
      {"ewise_add", OpKind::EwiseAdd},
      {"sigmoid", OpKind::Sigmoid},
      {"tanh", OpKind::Tanh},
  };
  for (const auto& [name, kind] : kKinds) {
    if (!j.contains(name)) continue;
    const json& u = j.at(name);
    auto& slot = costs.unit[static_cast<std::size_t>(kind)];
    slot.dsp = u.value("dsp", slot.dsp);
    slot.bram = u.value("bram", slot.bram);
    slot.lut = u.value("lut", slot.lut);
    slot.ff = u.value("ff", slot.ff);
  }
  costs.depth_base = j.value("depth_base", costs.depth_base);
  costs.depth_per_op = j.value("depth_per_op", costs.depth_per_op);
  return costs;
}

std::vector<std::size_t> parse_k_list(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    out.push_back(static_cast<std::size_t>(std::stoull(item)));
  }
  if (out.empty()) throw std::invalid_argument("empty block-size list");
  return out;
}

std::vector<std::vector<double>> random_frames(std::size_t count,
                                               std::size_t dim,
                                               std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::vector<std::vector<double>> frames(count, std::vector<double>(dim));
  for (auto& f : frames) {
    for (double& v : f) {
      v = 2.0 * (static_cast<double>(gen() >> 11) * 0x1.0p-53) - 1.0;
    }
  }
  return frames;
}

// --------------------------------------------------------------------------
// sweep / compress

json sweep_json(const LstmArchSpec& arch, const std::vector<std::size_t>& ks) {
  json rows = json::array();
  const CompressionStats base = compression_stats(arch, 1);
  for (std::size_t k : ks) {
    const CompressionStats st = compression_stats(arch, k);
    json row;
    row["block_size"] = k;
    row["params"] = st.compressed_params;
    row["params_millions"] =
        static_cast<double>(st.compressed_params) / 1e6;
    row["compression_ratio"] =
        static_cast<double>(base.compressed_params) /
        static_cast<double>(st.compressed_params);
    row["matrix_compression_ratio"] = st.matrix_compression_ratio;
    row["complexity_ratio"] = st.complexity_ratio;
    rows.push_back(row);
  }
  return rows;
}

void print_sweep_table(const json& rows) {
  std::cout << std::left << std::setw(12) << "block-size" << std::setw(14)
            << "params" << std::setw(12) << "params(M)" << std::setw(12)
            << "ratio" << std::setw(14) << "matrix-ratio" << std::setw(12)
            << "complexity" << '\n';
  for (const auto& row : rows) {
    std::cout << std::left << std::setw(12)
              << row.at("block_size").get<std::size_t>() << std::setw(14)
              << row.at("params").get<std::size_t>() << std::setw(12)
              << std::fixed << std::setprecision(3)
              << row.at("params_millions").get<double>() << std::setw(12)
              << std::setprecision(2) << row.at("compression_ratio").get<double>()
              << std::setw(14) << row.at("matrix_compression_ratio").get<double>()
              << std::setw(12) << std::setprecision(3)
              << row.at("complexity_ratio").get<double>() << '\n';
  }
  std::cout.unsetf(std::ios::fixed);
}

int cmd_sweep(const std::string& arch_arg, const std::string& k_list,
              const std::string& format, const std::string& report_path) {
  const LstmArchSpec arch = resolve_arch(arch_arg, 0);
  json report = base_report("sweep");
  report["arch"] = arch_to_json(arch);
  report["rows"] = sweep_json(arch, parse_k_list(k_list));
  if (format == "table") print_sweep_table(report["rows"]);
  emit_report(report, format, report_path);
  return 0;
}

// Projects every weight matrix of a bundle onto block size k.
LstmWeights project_weights(const LstmWeights& src, std::size_t k) {
  LstmWeights out = src;
  out.arch.block_size = k;
  for (auto& layer : out.layers) {
    for (auto& dir : layer) {
      for (auto& gate : dir.gates) {
        const auto dense = expand_to_dense(gate.w);
        gate.w = project_dense(dense, gate.w.rows(), gate.w.cols(), k);
      }
      if (dir.projection) {
        const auto dense = expand_to_dense(*dir.projection);
        dir.projection = project_dense(dense, dir.projection->rows(),
                                       dir.projection->cols(), k);
      }
    }
  }
  return out;
}

int cmd_compress(const std::string& arch_arg, std::size_t k,
                 std::uint64_t seed, const std::string& out_dir,
                 const std::string& from_bundle, const std::string& fxp,
                 const std::string& sweep_list, bool no_spectra,
                 const std::string& format, const std::string& report_path) {
  if (!sweep_list.empty()) {
    return cmd_sweep(arch_arg, sweep_list, format, report_path);
  }
  if (out_dir.empty()) {
    throw std::invalid_argument("compress: --out is required");
  }
  ModelBundle bundle;
  bundle.datapath = parse_format(fxp);
  bundle.seed = seed;
  if (!from_bundle.empty()) {
    const ModelBundle src = load_bundle(from_bundle);
    bundle.weights = project_weights(src.weights, k);
  } else {
    LstmArchSpec arch = resolve_arch(arch_arg, k);
    bundle.weights = random_weights(arch, seed);
  }
  save_bundle(out_dir, bundle, !no_spectra);

  json report = base_report("compress");
  report["arch"] = arch_to_json(bundle.weights.arch);
  report["seed"] = seed;
  report["out"] = out_dir;
  report["datapath"] = bundle.datapath.to_string();
  report["spectra"] = !no_spectra;
  const CompressionStats st =
      compression_stats(bundle.weights.arch, bundle.weights.arch.block_size);
  report["params"] = st.compressed_params;
  report["matrix_compression_ratio"] = st.matrix_compression_ratio;
  if (format == "table") {
    std::cout << "bundle written to " << out_dir << " ("
              << st.compressed_params << " parameters, matrix ratio "
              << std::setprecision(3) << st.matrix_compression_ratio << ":1)\n";
  }
  emit_report(report, format, report_path);
  return 0;
}

// --------------------------------------------------------------------------
// infer / verify

double max_deviation(const std::vector<std::vector<double>>& a,
                     const std::vector<std::vector<double>>& b) {
  double worst = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) {
    for (std::size_t i = 0; i < a[t].size(); ++i) {
      worst = std::max(worst, std::abs(a[t][i] - b[t][i]));
    }
  }
  return worst;
}

int cmd_infer(const std::string& bundle_dir, const std::string& input_path,
              const std::string& input_raw, std::size_t frame_dim,
              const std::string& mode, const std::string& policy_name,
              const std::string& fxp_override, bool verify,
              const std::string& out_path, const std::string& format,
              const std::string& report_path) {
  const ModelBundle bundle = load_bundle(bundle_dir);
  const ShiftPolicy policy = parse_shift_policy(policy_name);
  const FxpFormat datapath =
      fxp_override.empty() ? bundle.datapath : parse_format(fxp_override);
  LstmRuntime rt(bundle.weights, datapath, policy);

  std::vector<std::vector<double>> inputs;
  if (!input_raw.empty()) {
    inputs = load_sequence_raw(input_raw, frame_dim != 0
                                              ? frame_dim
                                              : rt.arch().input_dim);
  } else if (!input_path.empty()) {
    inputs = load_sequence_json(input_path);
  } else {
    throw std::invalid_argument("infer: provide --input or --input-raw");
  }

  const RunMode run_mode = mode == "fxp" ? RunMode::Fxp : RunMode::Float;
  const auto t0 = std::chrono::steady_clock::now();
  const auto outputs = rt.run_sequence(inputs, run_mode);
  const auto t1 = std::chrono::steady_clock::now();
  // Snapshot before any verification reruns so the report counts this run.
  const std::uint64_t dft_calls = rt.counters().dft();
  const std::uint64_t idft_calls = rt.counters().idft();
  const std::uint64_t pointwise_calls = rt.counters().pointwise();

  json report = base_report("infer");
  report["bundle"] = bundle_dir;
  {
    // Digest of the raw frame payload so a report pins its exact input.
    std::vector<double> flat;
    for (const auto& f : inputs) flat.insert(flat.end(), f.begin(), f.end());
    report["input_digest"] =
        fnv1a64_hex(flat.data(), flat.size() * sizeof(double));
  }
  report["mode"] = mode;
  report["shift_policy"] = to_string(policy);
  report["datapath"] = datapath.to_string();
  report["frames"] = inputs.size();
  report["elapsed_seconds"] =
      std::chrono::duration<double>(t1 - t0).count();
  report["counters"] = {{"dft_calls", dft_calls},
                        {"idft_calls", idft_calls},
                        {"pointwise_calls", pointwise_calls}};
  report["max_abs_weight_spectrum"] = rt.max_abs_weight_spectrum();

  bool verification_failed = false;
  if (verify) {
    const auto oracle = rt.run_sequence(inputs, RunMode::Float, /*use_dense=*/true);
    if (run_mode == RunMode::Float) {
      const double dev = max_deviation(outputs, oracle);
      report["max_deviation_vs_dense_oracle"] = dev;
      verification_failed = !(dev < 1e-8);
    } else {
      const auto float_fft = rt.run_sequence(inputs, RunMode::Float);
      report["max_deviation_float_vs_dense_oracle"] =
          max_deviation(float_fft, oracle);
      // Measured, not asserted: the quantization gap of the datapath.
      report["max_deviation_fxp_vs_float"] = max_deviation(outputs, float_fft);
    }
  }

  if (!out_path.empty()) {
    json payload;
    payload["outputs"] = outputs;
    std::ofstream out(out_path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write outputs to " + out_path);
    out << payload.dump() << '\n';
    report["out"] = out_path;
  } else {
    report["outputs"] = outputs;
  }

  if (format == "table") {
    std::cout << "ran " << inputs.size() << " frame(s) in " << mode
              << " mode; counters: dft=" << dft_calls
              << " idft=" << idft_calls
              << " pointwise=" << pointwise_calls << '\n';
    if (report.contains("max_deviation_vs_dense_oracle")) {
      std::cout << "max deviation vs dense oracle: "
                << report["max_deviation_vs_dense_oracle"].get<double>() << '\n';
    }
  }
  emit_report(report, format, report_path);
  if (verification_failed) {
    throw VerificationFailure("inference deviated from the dense oracle");
  }
  return 0;
}

int cmd_verify(const std::string& bundle_dir, int trials, std::uint64_t seed,
               const std::string& format, const std::string& report_path) {
  if (trials <= 0) throw std::invalid_argument("verify: --trials must be > 0");
  const ModelBundle bundle = load_bundle(bundle_dir, /*verify_spectra=*/true);
  if (bundle.weights.arch.block_size == 1) {
    json report = base_report("verify");
    report["bundle"] = bundle_dir;
    report["pass"] = true;
    report["note"] = "block size 1 has no spectral path; hashes verified";
    if (format == "table") std::cout << "PASS: dense reference bundle, hashes ok\n";
    emit_report(report, format, report_path);
    return 0;
  }
  std::mt19937_64 gen(seed);

  double worst_rel = 0.0;
  bool counters_ok = true;
  for (const auto& layer : bundle.weights.layers) {
    for (const auto& dir : layer) {
      std::vector<const BlockCirculantMatrix*> mats;
      for (const auto& gate : dir.gates) mats.push_back(&gate.w);
      if (dir.projection) mats.push_back(&*dir.projection);
      for (const auto* mat : mats) {
        const SpectralWeights sw = SpectralWeights::from(*mat);
        for (int t = 0; t < trials; ++t) {
          std::vector<double> x(mat->cols());
          for (double& v : x) {
            v = 2.0 * (static_cast<double>(gen() >> 11) * 0x1.0p-53) - 1.0;
          }
          CallCounters counters;
          const auto fft = matvec_fft(sw, x, &counters);
          const auto naive = matvec_naive(*mat, x);
          double scale = 1.0;
          for (double v : naive) scale = std::max(scale, std::abs(v));
          for (std::size_t i = 0; i < fft.size(); ++i) {
            worst_rel = std::max(worst_rel, std::abs(fft[i] - naive[i]) / scale);
          }
          counters_ok = counters_ok && counters.dft() == sw.q &&
                        counters.idft() == sw.p &&
                        counters.pointwise() == sw.p * sw.q;
        }
      }
    }
  }

  const bool pass = worst_rel < 1e-8 && counters_ok;
  json report = base_report("verify");
  report["bundle"] = bundle_dir;
  report["trials_per_matrix"] = trials;
  report["max_relative_error"] = worst_rel;
  report["call_counters_exact"] = counters_ok;
  report["pass"] = pass;
  if (format == "table") {
    std::cout << (pass ? "PASS" : "FAIL") << ": max relative error "
              << worst_rel << ", counters "
              << (counters_ok ? "exact" : "WRONG") << '\n';
  }
  emit_report(report, format, report_path);
  if (!pass) throw VerificationFailure("fft path disagrees with the dense oracle");
  return 0;
}

// --------------------------------------------------------------------------
// schedule / estimate

json schedule_json(const OpGraph& g, const StageAssignment& a,
                   const PipelineEstimate& est, const PlatformProfile& platform) {
  json stages = json::array();
  for (std::size_t s = 0; s < a.stages.size(); ++s) {
    json stage;
    stage["index"] = s;
    stage["replication"] = a.replication[s];
    stage["cycles"] = est.cycles[s];
    json ops = json::array();
    for (int v : a.stages[s]) {
      const auto& node = g.nodes[static_cast<std::size_t>(v)];
      ops.push_back({{"id", node.id},
                     {"kind", to_string(node.kind)},
                     {"label", node.label},
                     {"weight", node.weight},
                     {"workload", node.workload},
                     {"parallelism",
                      a.parallelism[static_cast<std::size_t>(v)]}});
    }
    stage["ops"] = ops;
    stages.push_back(stage);
  }
  json out;
  out["platform"] = platform.name;
  out["frequency_hz"] = platform.frequency_hz;
  out["stages"] = stages;
  out["fps"] = est.fps;
  out["resources"] = {{"dsp", est.totals.dsp},
                      {"bram", est.totals.bram},
                      {"lut", est.totals.lut},
                      {"ff", est.totals.ff}};
  out["utilization"] = {{"dsp", est.fit.util_dsp},
                        {"bram", est.fit.util_bram},
                        {"lut", est.fit.util_lut},
                        {"ff", est.fit.util_ff}};
  out["feasible"] = est.fit.feasible;
  json compounded = json::array();
  for (int v : a.compounded_nodes) {
    compounded.push_back(g.nodes[static_cast<std::size_t>(v)].label);
  }
  out["parallelism_compounded"] = compounded;
  return out;
}

void print_schedule_table(const json& sched) {
  std::cout << "platform " << sched.at("platform").get<std::string>()
            << ", FPS " << std::fixed << std::setprecision(0)
            << sched.at("fps").get<double>() << '\n';
  std::cout.unsetf(std::ios::fixed);
  std::cout << std::setprecision(6);
  for (const auto& stage : sched.at("stages")) {
    std::cout << "stage " << stage.at("index").get<std::size_t>() << " (R="
              << stage.at("replication").get<int>() << ", T="
              << stage.at("cycles").get<double>() << "):";
    for (const auto& op : stage.at("ops")) {
      std::cout << ' ' << op.at("label").get<std::string>() << "[N="
                << op.at("parallelism").get<int>() << ']';
    }
    std::cout << '\n';
  }
  const auto& util = sched.at("utilization");
  std::cout << "utilization: dsp " << std::setprecision(3)
            << util.at("dsp").get<double>() * 100 << "% bram "
            << util.at("bram").get<double>() * 100 << "% lut "
            << util.at("lut").get<double>() * 100 << "% ff "
            << util.at("ff").get<double>() * 100 << "%\n";
}

int cmd_schedule(const std::string& arch_arg, std::size_t k,
                 const std::string& bundle_dir, const std::string& platform_arg,
                 const std::string& costs_arg, int max_replication,
                 bool emit_graph, const std::string& format,
                 const std::string& report_path) {
  LstmArchSpec arch;
  if (!bundle_dir.empty()) {
    arch = load_bundle(bundle_dir).weights.arch;
  } else {
    arch = resolve_arch(arch_arg, k);
  }
  const PlatformProfile platform = resolve_platform(platform_arg);
  const OpCostProfile costs = resolve_costs(costs_arg);

  const OpGraph g = build_graph(arch);
  StageAssignment a = schedule(g, platform, costs);
  enumerate_replication(g, a, platform, costs, max_replication);
  const PipelineEstimate est = estimate_pipeline(g, a, platform, costs);

  json report = base_report("schedule");
  report["arch"] = arch_to_json(arch);
  report["schedule"] = schedule_json(g, a, est, platform);
  if (emit_graph) report["graph_text"] = export_graph_text(g, &a.parallelism);
  if (format == "table") print_schedule_table(report["schedule"]);
  emit_report(report, format, report_path);
  return 0;
}

int cmd_estimate(const std::string& arch_arg, std::size_t k,
                 const std::string& bundle_dir, const std::string& platform_arg,
                 const std::string& costs_arg, int max_replication,
                 const std::string& format, const std::string& report_path) {
  LstmArchSpec arch;
  if (!bundle_dir.empty()) {
    arch = load_bundle(bundle_dir).weights.arch;
  } else {
    arch = resolve_arch(arch_arg, k);
  }
  const PlatformProfile platform = resolve_platform(platform_arg);
  const OpCostProfile costs = resolve_costs(costs_arg);
  const OpGraph g = build_graph(arch);
  StageAssignment a = schedule(g, platform, costs);
  enumerate_replication(g, a, platform, costs, max_replication);
  const PipelineEstimate est = estimate_pipeline(g, a, platform, costs);

  json report = base_report("estimate");
  report["arch"] = arch_to_json(arch);
  json cycles = json::array();
  for (double t : est.cycles) cycles.push_back(t);
  report["stage_cycles"] = cycles;
  report["fps"] = est.fps;
  report["resources"] = {{"dsp", est.totals.dsp},
                         {"bram", est.totals.bram},
                         {"lut", est.totals.lut},
                         {"ff", est.totals.ff}};
  report["utilization"] = {{"dsp", est.fit.util_dsp},
                           {"bram", est.fit.util_bram},
                           {"lut", est.fit.util_lut},
                           {"ff", est.fit.util_ff}};
  report["feasible"] = est.fit.feasible;
  if (format == "table") {
    std::cout << "stages:";
    for (double t : est.cycles) std::cout << ' ' << t;
    std::cout << "\nFPS: " << est.fps << "\nDSP " << est.totals.dsp << " BRAM "
              << est.totals.bram << " LUT " << est.totals.lut << " FF "
              << est.totals.ff << (est.fit.feasible ? " (fits)" : " (over budget)")
              << '\n';
  }
  emit_report(report, format, report_path);
  return 0;
}

// --------------------------------------------------------------------------
// bench

int cmd_bench(const std::string& bundle_dir, std::size_t frames, int reps,
              std::uint64_t seed, const std::string& format,
              const std::string& report_path) {
  if (reps <= 0) throw std::invalid_argument("bench: --reps must be > 0");
  if (frames == 0) throw std::invalid_argument("bench: --frames must be > 0");
  const ModelBundle bundle = load_bundle(bundle_dir);
  LstmRuntime rt(bundle.weights, bundle.datapath);
  const auto inputs = random_frames(frames, rt.arch().input_dim, seed);

  // Warm both paths (dense expansion is lazy).
  rt.run_sequence(inputs, RunMode::Float, /*use_dense=*/false);
  rt.run_sequence(inputs, RunMode::Float, /*use_dense=*/true);

  rt.counters().reset();
  const auto f0 = std::chrono::steady_clock::now();
  for (int r = 0; r < reps; ++r) rt.run_sequence(inputs, RunMode::Float, false);
  const auto f1 = std::chrono::steady_clock::now();
  const double fft_seconds = std::chrono::duration<double>(f1 - f0).count();
  const std::uint64_t dft_calls = rt.counters().dft();
  const std::uint64_t idft_calls = rt.counters().idft();
  const std::uint64_t pointwise_calls = rt.counters().pointwise();

  const auto d0 = std::chrono::steady_clock::now();
  for (int r = 0; r < reps; ++r) rt.run_sequence(inputs, RunMode::Float, true);
  const auto d1 = std::chrono::steady_clock::now();
  const double dense_seconds = std::chrono::duration<double>(d1 - d0).count();

  const std::size_t k = rt.arch().block_size;
  const double total_steps = static_cast<double>(frames) * reps;

  // Counter-based operation count vs the analytic model; the two must agree
  // exactly since they sum the same per-call costs.
  double counter_ops = 0.0;
  if (k > 1) {
    counter_ops =
        static_cast<double>(dft_calls + idft_calls) * fft_real_ops(k) +
        static_cast<double>(pointwise_calls) * pointwise_real_ops(k) +
        static_cast<double>(pointwise_calls - idft_calls) *
            spectral_accum_real_ops(k);
    counter_ops *= static_cast<double>(reps + 1) / reps;  // includes warm-up run
  }
  double analytic_ops_per_step = 0.0;
  double dense_ops_per_step = 0.0;
  for (const auto& shape : weight_shapes(rt.arch())) {
    if (!shape.compressed) continue;
    if (k > 1) {
      analytic_ops_per_step += fft_matvec_real_ops(shape.rows, shape.cols, k);
    }
    dense_ops_per_step += dense_matvec_real_ops(shape.rows, shape.cols);
  }
  const double analytic_total =
      analytic_ops_per_step * total_steps * static_cast<double>(reps + 1) / reps;

  json report = base_report("bench");
  report["bundle"] = bundle_dir;
  report["frames"] = frames;
  report["reps"] = reps;
  report["seed"] = seed;
  report["block_size"] = k;
  report["fft_path"] = {{"seconds", fft_seconds},
                        {"frames_per_second", total_steps / fft_seconds}};
  report["dense_path"] = {{"seconds", dense_seconds},
                          {"frames_per_second", total_steps / dense_seconds}};
  report["speedup"] = dense_seconds / fft_seconds;
  report["analytic_op_ratio"] =
      k > 1 ? dense_ops_per_step / analytic_ops_per_step : 1.0;
  report["counters"] = {{"dft_calls", dft_calls},
                        {"idft_calls", idft_calls},
                        {"pointwise_calls", pointwise_calls}};
  report["ops_counter_based"] = counter_ops;
  report["ops_analytic"] = analytic_total;
  report["ops_consistent"] =
      std::abs(counter_ops - analytic_total) <= 1e-6 * analytic_total;

  if (format == "table") {
    std::cout << "fft path:   " << total_steps / fft_seconds << " frames/s\n"
              << "dense path: " << total_steps / dense_seconds << " frames/s\n"
              << "speedup: " << dense_seconds / fft_seconds
              << " (analytic op ratio "
              << report["analytic_op_ratio"].get<double>() << ")\n";
  }
  emit_report(report, format, report_path);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"block-circulant LSTM compression, inference and scheduling"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  std::string format = "table";
  std::string report_path;
  app.add_option("--format", format, "output format")
      ->check(CLI::IsMember({"json", "table"}))
      ->capture_default_str();
  app.add_option("--report", report_path, "write the JSON run report to a file");

  // compress
  auto* compress = app.add_subcommand("compress", "build a compressed model bundle");
  std::string c_arch = "google", c_out, c_from, c_fxp = "q3.12", c_sweep;
  std::size_t c_k = 8;
  std::uint64_t c_seed = 42;
  bool c_no_spectra = false;
  compress->add_option("--arch", c_arch, "google | small | arch.json")
      ->capture_default_str();
  compress->add_option("--k", c_k, "circulant block size (power of two)")
      ->capture_default_str();
  compress->add_option("--seed", c_seed, "weight init seed")->capture_default_str();
  compress->add_option("--out", c_out, "bundle output directory");
  compress->add_option("--from", c_from,
                       "project the weights of an existing bundle instead of "
                       "random init");
  compress->add_option("--fxp", c_fxp, "datapath format, q<int>.<frac>")
      ->capture_default_str();
  compress->add_option("--sweep", c_sweep,
                       "print a parameter/complexity table for these block "
                       "sizes (e.g. 1,2,4,8,16) instead of writing a bundle");
  compress->add_flag("--no-spectra", c_no_spectra, "skip spectrum precompute");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "parameter-count sweep over block sizes");
  std::string s_arch = "google", s_klist = "1,2,4,8,16";
  sweep->add_option("--arch", s_arch)->capture_default_str();
  sweep->add_option("--k-list", s_klist)->capture_default_str();

  // infer
  auto* infer = app.add_subcommand("infer", "run a sequence through a bundle");
  std::string i_bundle, i_input, i_input_raw, i_mode = "float",
                         i_policy = "distributed-in-idft", i_out, i_fxp;
  std::size_t i_frame_dim = 0;
  bool i_verify = false;
  infer->add_option("--bundle", i_bundle)->required();
  infer->add_option("--input", i_input, "JSON sequence file");
  infer->add_option("--input-raw", i_input_raw, "raw float32 frames");
  infer->add_option("--frame-dim", i_frame_dim, "frame width for raw input");
  infer->add_option("--mode", i_mode)->check(CLI::IsMember({"float", "fxp"}))
      ->capture_default_str();
  infer->add_option("--shift-policy", i_policy)->capture_default_str();
  infer->add_option("--fxp", i_fxp,
                    "override the bundle datapath format, q<int>.<frac>");
  infer->add_flag("--verify", i_verify, "compare against the dense oracle path");
  infer->add_option("--out", i_out, "write outputs JSON here instead of the report");

  // verify
  auto* verify = app.add_subcommand("verify", "oracle checks for a bundle");
  std::string v_bundle;
  int v_trials = 5;
  std::uint64_t v_seed = 1;
  verify->add_option("--bundle", v_bundle)->required();
  verify->add_option("--trials", v_trials, "random mat-vecs per matrix")
      ->capture_default_str();
  verify->add_option("--seed", v_seed)->capture_default_str();

  // schedule
  auto* sched = app.add_subcommand("schedule", "operator scheduling report");
  std::string g_arch = "google", g_bundle, g_platform = "ku060", g_costs;
  std::size_t g_k = 8;
  int g_max_r = 16;
  bool g_graph = false;
  sched->add_option("--arch", g_arch)->capture_default_str();
  sched->add_option("--k", g_k)->capture_default_str();
  sched->add_option("--bundle", g_bundle, "take the architecture from a bundle");
  sched->add_option("--platform", g_platform, "ku060 | 7v3 | unlimited | file.json")
      ->capture_default_str();
  sched->add_option("--costs", g_costs, "operator cost profile JSON");
  sched->add_option("--max-replication", g_max_r)->capture_default_str();
  sched->add_flag("--graph", g_graph, "include the DAG dump in the report");

  // estimate
  auto* est = app.add_subcommand("estimate", "performance/resource model report");
  std::string e_arch = "google", e_bundle, e_platform = "ku060", e_costs;
  std::size_t e_k = 8;
  int e_max_r = 16;
  est->add_option("--arch", e_arch)->capture_default_str();
  est->add_option("--k", e_k)->capture_default_str();
  est->add_option("--bundle", e_bundle);
  est->add_option("--platform", e_platform)->capture_default_str();
  est->add_option("--costs", e_costs);
  est->add_option("--max-replication", e_max_r)->capture_default_str();

  // bench
  auto* bench = app.add_subcommand("bench", "host-side FFT vs dense timing");
  std::string b_bundle;
  std::size_t b_frames = 8;
  int b_reps = 3;
  std::uint64_t b_seed = 1;
  bench->add_option("--bundle", b_bundle)->required();
  bench->add_option("--frames", b_frames)->capture_default_str();
  bench->add_option("--reps", b_reps)->capture_default_str();
  bench->add_option("--seed", b_seed)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (*compress) {
      return cmd_compress(c_arch, c_k, c_seed, c_out, c_from, c_fxp, c_sweep,
                          c_no_spectra, format, report_path);
    }
    if (*sweep) return cmd_sweep(s_arch, s_klist, format, report_path);
    if (*infer) {
      return cmd_infer(i_bundle, i_input, i_input_raw, i_frame_dim, i_mode,
                       i_policy, i_fxp, i_verify, i_out, format, report_path);
    }
    if (*verify) return cmd_verify(v_bundle, v_trials, v_seed, format, report_path);
    if (*sched) {
      return cmd_schedule(g_arch, g_k, g_bundle, g_platform, g_costs, g_max_r,
                          g_graph, format, report_path);
    }
    if (*est) {
      return cmd_estimate(e_arch, e_k, e_bundle, e_platform, e_costs, e_max_r,
                          format, report_path);
    }
    if (*bench) {
      return cmd_bench(b_bundle, b_frames, b_reps, b_seed, format, report_path);
    }
  } catch (const VerificationFailure& e) {
    std::cerr << "verification failure: " << e.what() << '\n';
    return kExitVerification;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}

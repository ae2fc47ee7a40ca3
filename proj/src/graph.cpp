#include "bclstm/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

namespace bclstm {

std::vector<std::vector<int>> OpGraph::successors() const {
  std::vector<std::vector<int>> succ(nodes.size());
  for (const auto& [from, to] : edges) succ[static_cast<std::size_t>(from)].push_back(to);
  return succ;
}

std::vector<std::vector<int>> OpGraph::predecessors() const {
  std::vector<std::vector<int>> pred(nodes.size());
  for (const auto& [from, to] : edges) pred[static_cast<std::size_t>(to)].push_back(from);
  return pred;
}

std::vector<int> OpGraph::sources() const {
  std::vector<int> indeg(nodes.size(), 0);
  for (const auto& [from, to] : edges) ++indeg[static_cast<std::size_t>(to)];
  std::vector<int> out;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (indeg[i] == 0) out.push_back(static_cast<int>(i));
  }
  return out;
}

std::vector<int> OpGraph::sinks() const {
  std::vector<int> outdeg(nodes.size(), 0);
  for (const auto& [from, to] : edges) ++outdeg[static_cast<std::size_t>(from)];
  std::vector<int> out;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (outdeg[i] == 0) out.push_back(static_cast<int>(i));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Graph construction

namespace {

struct GraphBuilder {
  OpGraph g;

  int add(OpKind kind, std::string label, double weight, double workload) {
    const int id = static_cast<int>(g.nodes.size());
    g.nodes.push_back(OpNode{id, kind, std::move(label), weight, workload});
    return id;
  }
  void edge(int from, int to) { g.edges.emplace_back(from, to); }
};

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

}  // namespace

OpGraph build_graph(const LstmArchSpec& arch) {
  arch.validate();
  const std::size_t k = arch.block_size;
  const std::size_t hidden = arch.hidden_dim;
  const double ew = static_cast<double>(hidden);  // element-wise weight = length

  GraphBuilder b;
  std::vector<int> prev_layer_outputs;
  for (std::size_t layer = 0; layer < arch.num_layers; ++layer) {
    std::vector<int> layer_outputs;
    const std::size_t fused = arch.fused_input_dim(layer);
    const double conv_w = k == 1 ? dense_matvec_real_ops(hidden, fused)
                                 : fft_matvec_real_ops(hidden, fused, k);
    const double conv_q =
        static_cast<double>(ceil_div(hidden, k) * ceil_div(fused, k));
    for (std::size_t dir = 0; dir < arch.num_directions(); ++dir) {
      const std::string pre = "layer" + std::to_string(layer) +
                              (dir == 0 ? ".fwd." : ".bwd.");

      const int conv_i = b.add(OpKind::CirculantConv, pre + "conv_i", conv_w, conv_q);
      const int conv_f = b.add(OpKind::CirculantConv, pre + "conv_f", conv_w, conv_q);
      const int conv_c = b.add(OpKind::CirculantConv, pre + "conv_c", conv_w, conv_q);
      const int conv_o = b.add(OpKind::CirculantConv, pre + "conv_o", conv_w, conv_q);
      for (int conv : {conv_i, conv_f, conv_c, conv_o}) {
        for (int src : prev_layer_outputs) b.edge(src, conv);
      }

      int peep_i = -1, peep_f = -1;
      if (arch.peephole) {
        peep_i = b.add(OpKind::EwiseMul, pre + "mul_peep_i", ew, ew);
        peep_f = b.add(OpKind::EwiseMul, pre + "mul_peep_f", ew, ew);
      }

      const int add_i = b.add(OpKind::EwiseAdd, pre + "add_i", ew, ew);
      const int add_f = b.add(OpKind::EwiseAdd, pre + "add_f", ew, ew);
      const int add_g = b.add(OpKind::EwiseAdd, pre + "add_g", ew, ew);
      const int add_o = b.add(OpKind::EwiseAdd, pre + "add_o", ew, ew);
      b.edge(conv_i, add_i);
      b.edge(conv_f, add_f);
      b.edge(conv_c, add_g);
      b.edge(conv_o, add_o);
      if (arch.peephole) {
        b.edge(peep_i, add_i);
        b.edge(peep_f, add_f);
      }

      const int sig_i = b.add(OpKind::Sigmoid, pre + "sig_i", ew, ew);
      const int sig_f = b.add(OpKind::Sigmoid, pre + "sig_f", ew, ew);
      const OpKind g_kind = arch.gate_activation == GateActivation::Sigmoid
                                ? OpKind::Sigmoid
                                : OpKind::Tanh;
      const int act_g = b.add(g_kind, pre + "act_g", ew, ew);
      b.edge(add_i, sig_i);
      b.edge(add_f, sig_f);
      b.edge(add_g, act_g);

      // f_t (.) c_{t-1}; the previous cell state arrives via buffer.
      const int mul_forget = b.add(OpKind::EwiseMul, pre + "mul_forget", ew, ew);
      const int mul_write = b.add(OpKind::EwiseMul, pre + "mul_write", ew, ew);
      b.edge(sig_f, mul_forget);
      b.edge(sig_i, mul_write);
      b.edge(act_g, mul_write);

      const int add_cell = b.add(OpKind::EwiseAdd, pre + "add_cell", ew, ew);
      b.edge(mul_forget, add_cell);
      b.edge(mul_write, add_cell);

      if (arch.peephole) {
        // The output-gate peephole reads the current cell state.
        const int peep_o = b.add(OpKind::EwiseMul, pre + "mul_peep_o", ew, ew);
        b.edge(add_cell, peep_o);
        b.edge(peep_o, add_o);
      }
      const int sig_o = b.add(OpKind::Sigmoid, pre + "sig_o", ew, ew);
      b.edge(add_o, sig_o);

      const int tanh_cell = b.add(OpKind::Tanh, pre + "tanh_cell", ew, ew);
      b.edge(add_cell, tanh_cell);

      const int mul_out = b.add(OpKind::EwiseMul, pre + "mul_out", ew, ew);
      b.edge(sig_o, mul_out);
      b.edge(tanh_cell, mul_out);

      if (arch.projection) {
        const double proj_w =
            k == 1 ? dense_matvec_real_ops(arch.projection_dim, hidden)
                   : fft_matvec_real_ops(arch.projection_dim, hidden, k);
        const double proj_q = static_cast<double>(
            ceil_div(arch.projection_dim, k) * ceil_div(hidden, k));
        const int conv_proj =
            b.add(OpKind::CirculantConv, pre + "conv_proj", proj_w, proj_q);
        b.edge(mul_out, conv_proj);
        layer_outputs.push_back(conv_proj);
      } else {
        layer_outputs.push_back(mul_out);
      }
    }
    prev_layer_outputs = std::move(layer_outputs);
  }
  return b.g;
}

// ---------------------------------------------------------------------------
// Priorities

std::vector<double> compute_priorities(const OpGraph& g) {
  const std::size_t n = g.nodes.size();
  const auto succ = g.successors();

  // Kahn order on the reversed graph; a leftover node means a cycle.
  std::vector<int> outdeg(n, 0);
  for (const auto& [from, to] : g.edges) ++outdeg[static_cast<std::size_t>(from)];
  std::vector<int> ready;
  for (std::size_t i = 0; i < n; ++i) {
    if (outdeg[i] == 0) ready.push_back(static_cast<int>(i));
  }
  const auto pred = g.predecessors();
  std::vector<double> priority(n, 0.0);
  std::size_t visited = 0;
  while (!ready.empty()) {
    const int v = ready.back();
    ready.pop_back();
    ++visited;
    double best = 0.0;
    for (int s : succ[static_cast<std::size_t>(v)]) {
      best = std::max(best, priority[static_cast<std::size_t>(s)]);
    }
    priority[static_cast<std::size_t>(v)] = g.nodes[static_cast<std::size_t>(v)].weight + best;
    for (int p : pred[static_cast<std::size_t>(v)]) {
      if (--outdeg[static_cast<std::size_t>(p)] == 0) ready.push_back(p);
    }
  }
  if (visited != n) {
    throw std::runtime_error("compute_priorities: graph has a cycle");
  }
  return priority;
}

// ---------------------------------------------------------------------------
// Scheduling

namespace {

ResourceTotals assignment_stage_resources(const OpGraph& g,
                                          const std::vector<int>& stage,
                                          const std::vector<int>& parallelism,
                                          const OpCostProfile& costs) {
  std::vector<OpKind> kinds;
  std::vector<int> n;
  kinds.reserve(stage.size());
  n.reserve(stage.size());
  for (int v : stage) {
    kinds.push_back(g.nodes[static_cast<std::size_t>(v)].kind);
    n.push_back(parallelism[static_cast<std::size_t>(v)]);
  }
  return stage_resources(kinds, n, costs);
}

int checked_ratio_scale(int n, double ratio) {
  const double scaled = static_cast<double>(n) * std::ceil(ratio);
  constexpr double kMax = 1 << 30;
  return static_cast<int>(std::min(scaled, kMax));
}

}  // namespace

StageAssignment schedule(const OpGraph& g, const PlatformProfile& platform,
                         const OpCostProfile& costs) {
  const std::size_t n = g.nodes.size();
  if (n == 0) throw std::invalid_argument("schedule: empty graph");

  for (const auto& node : g.nodes) {
    std::vector<OpKind> kind{node.kind};
    std::vector<int> one{1};
    if (!check_fit(stage_resources(kind, one, costs), platform).feasible) {
      throw std::runtime_error("schedule: operator '" + node.label +
                               "' exceeds the platform budget at N=1");
    }
  }

  const std::vector<double> priority = compute_priorities(g);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    const double pa = priority[static_cast<std::size_t>(a)];
    const double pb = priority[static_cast<std::size_t>(b)];
    if (pa != pb) return pa > pb;
    return a < b;  // fixed tie-break for determinism
  });

  StageAssignment out;
  out.parallelism.assign(n, 1);
  std::vector<int> upscales(n, 0);

  for (int v : order) {
    const double wv = g.nodes[static_cast<std::size_t>(v)].weight;
    if (out.stages.empty()) {
      out.stages.push_back({v});
      continue;
    }
    auto& cur = out.stages.back();

    // Tentative parallelism: residents rescale against the candidate weight;
    // a candidate slower than the stage's current rate scales up to match.
    std::vector<int> tentative = out.parallelism;
    double stage_rate = std::numeric_limits<double>::infinity();
    for (int j : cur) {
      const auto& nj = g.nodes[static_cast<std::size_t>(j)];
      tentative[static_cast<std::size_t>(j)] = checked_ratio_scale(
          out.parallelism[static_cast<std::size_t>(j)], nj.weight / wv);
      stage_rate = std::min(
          stage_rate, nj.weight / out.parallelism[static_cast<std::size_t>(j)]);
    }
    tentative[static_cast<std::size_t>(v)] =
        std::max(1, static_cast<int>(std::ceil(wv / stage_rate)));

    std::vector<int> with_candidate = cur;
    with_candidate.push_back(v);
    const ResourceTotals totals =
        assignment_stage_resources(g, with_candidate, tentative, costs);
    if (check_fit(totals, platform).feasible) {
      for (int j : cur) {
        if (tentative[static_cast<std::size_t>(j)] >
            out.parallelism[static_cast<std::size_t>(j)]) {
          if (++upscales[static_cast<std::size_t>(j)] > 1) {
            out.compounded_nodes.push_back(j);
          }
        }
      }
      out.parallelism = std::move(tentative);
      cur.push_back(v);
    } else {
      out.stages.push_back({v});
      out.parallelism[static_cast<std::size_t>(v)] = 1;
    }
  }

  std::sort(out.compounded_nodes.begin(), out.compounded_nodes.end());
  out.compounded_nodes.erase(
      std::unique(out.compounded_nodes.begin(), out.compounded_nodes.end()),
      out.compounded_nodes.end());
  out.replication.assign(out.stages.size(), 1);
  return out;
}

std::size_t stage_critical_path(const OpGraph& g,
                                const std::vector<int>& stage_nodes) {
  if (stage_nodes.empty()) return 0;
  std::set<int> members(stage_nodes.begin(), stage_nodes.end());
  const auto pred = g.predecessors();
  const auto succ = g.successors();

  // Longest chain over the induced subgraph, Kahn order.
  std::vector<int> indeg(g.nodes.size(), 0);
  std::vector<int> ready;
  for (int v : stage_nodes) {
    int d = 0;
    for (int p : pred[static_cast<std::size_t>(v)]) d += members.count(p) ? 1 : 0;
    indeg[static_cast<std::size_t>(v)] = d;
    if (d == 0) ready.push_back(v);
  }
  std::vector<std::size_t> depth(g.nodes.size(), 0);
  std::size_t best = 1;
  while (!ready.empty()) {
    const int v = ready.back();
    ready.pop_back();
    std::size_t d = 1;
    for (int p : pred[static_cast<std::size_t>(v)]) {
      if (members.count(p)) d = std::max(d, depth[static_cast<std::size_t>(p)] + 1);
    }
    depth[static_cast<std::size_t>(v)] = d;
    best = std::max(best, d);
    for (int s : succ[static_cast<std::size_t>(v)]) {
      if (members.count(s) && --indeg[static_cast<std::size_t>(s)] == 0) {
        ready.push_back(s);
      }
    }
  }
  return best;
}

PipelineEstimate estimate_pipeline(const OpGraph& g,
                                   const StageAssignment& assignment,
                                   const PlatformProfile& platform,
                                   const OpCostProfile& costs) {
  PipelineEstimate est;
  est.cycles.reserve(assignment.stages.size());
  ResourceTotals totals;
  for (std::size_t s = 0; s < assignment.stages.size(); ++s) {
    const auto& stage = assignment.stages[s];
    std::vector<double> q;
    std::vector<int> np;
    q.reserve(stage.size());
    np.reserve(stage.size());
    for (int v : stage) {
      q.push_back(g.nodes[static_cast<std::size_t>(v)].workload);
      np.push_back(assignment.parallelism[static_cast<std::size_t>(v)]);
    }
    const double depth =
        costs.depth_base +
        costs.depth_per_op * static_cast<double>(stage_critical_path(g, stage));
    est.cycles.push_back(
        stage_cycles(q, np, assignment.replication[s], depth));
    totals = add(totals,
                 scale(assignment_stage_resources(g, stage,
                                                  assignment.parallelism, costs),
                       static_cast<double>(assignment.replication[s])));
  }
  est.totals = totals;
  est.fps = fps(est.cycles, platform.frequency_hz);
  est.fit = check_fit(totals, platform);
  return est;
}

void enumerate_replication(const OpGraph& g, StageAssignment& assignment,
                           const PlatformProfile& platform,
                           const OpCostProfile& costs, int max_replication) {
  const std::size_t stages = assignment.stages.size();
  if (stages == 0) return;

  // Per-stage base time (max Q/N), depth, and unit resources at R=1.
  std::vector<double> base(stages, 0.0), depth(stages, 0.0);
  std::vector<ResourceTotals> unit(stages);
  for (std::size_t s = 0; s < stages; ++s) {
    for (int v : assignment.stages[s]) {
      const auto& node = g.nodes[static_cast<std::size_t>(v)];
      base[s] = std::max(
          base[s], node.workload /
                       assignment.parallelism[static_cast<std::size_t>(v)]);
    }
    depth[s] = costs.depth_base +
               costs.depth_per_op *
                   static_cast<double>(stage_critical_path(g, assignment.stages[s]));
    unit[s] = assignment_stage_resources(g, assignment.stages[s],
                                         assignment.parallelism, costs);
  }

  auto cycles_at = [&](std::size_t s, int r) {
    return std::ceil(base[s] / static_cast<double>(r)) + depth[s];
  };

  // Every useful configuration is "minimal R per stage for some bottleneck
  // time", so sweeping candidate bottlenecks covers the whole R lattice up
  // to the cap. Ties: lowest DSP, then lexicographically smallest R.
  std::vector<double> candidates;
  for (std::size_t s = 0; s < stages; ++s) {
    for (int r = 1; r <= max_replication; ++r) candidates.push_back(cycles_at(s, r));
  }
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()),
                   candidates.end());

  std::vector<int> best = assignment.replication;
  double best_fps = -1.0;
  double best_dsp = std::numeric_limits<double>::infinity();
  for (double target : candidates) {
    std::vector<int> r(stages, max_replication);
    bool reachable = true;
    for (std::size_t s = 0; s < stages; ++s) {
      int chosen = -1;
      for (int cand = 1; cand <= max_replication; ++cand) {
        if (cycles_at(s, cand) <= target) {
          chosen = cand;
          break;
        }
      }
      if (chosen < 0) {
        reachable = false;
        break;
      }
      r[s] = chosen;
    }
    if (!reachable) continue;
    ResourceTotals totals;
    std::vector<double> cyc(stages);
    for (std::size_t s = 0; s < stages; ++s) {
      totals = add(totals, scale(unit[s], static_cast<double>(r[s])));
      cyc[s] = cycles_at(s, r[s]);
    }
    if (!check_fit(totals, platform).feasible) continue;
    const double f = fps(cyc, platform.frequency_hz);
    const bool better =
        f > best_fps || (f == best_fps && totals.dsp < best_dsp) ||
        (f == best_fps && totals.dsp == best_dsp &&
         std::lexicographical_compare(r.begin(), r.end(), best.begin(), best.end()));
    if (better) {
      best = r;
      best_fps = f;
      best_dsp = totals.dsp;
    }
  }
  if (best_fps >= 0.0) assignment.replication = best;
}

std::string export_graph_text(const OpGraph& g,
                              const std::vector<int>* parallelism) {
  std::ostringstream os;
  for (const auto& node : g.nodes) {
    os << "node " << node.id << ' ' << to_string(node.kind) << ' '
       << node.label << " W=" << node.weight << " Q=" << node.workload;
    if (parallelism) {
      os << " N=" << (*parallelism)[static_cast<std::size_t>(node.id)];
    }
    os << '\n';
  }
  for (const auto& [from, to] : g.edges) {
    os << "edge " << from << " -> " << to << '\n';
  }
  return os.str();
}

}  // namespace bclstm

#ifndef BCLSTM_GRAPH_HPP_
#define BCLSTM_GRAPH_HPP_

#include <cstddef>
#include <string>
#include <vector>

#include "bclstm/estimate.hpp"
#include "bclstm/lstm.hpp"

namespace bclstm {

struct OpNode {
  int id = 0;
  OpKind kind = OpKind::EwiseAdd;
  std::string label;
  double weight = 0.0;    // W(v): arithmetic operation count
  double workload = 0.0;  // Q(v): element workload for the timing model
};

// Operator dependency DAG. Recurrent uses (previous-step cell state and
// output) are not edges; they arrive through buffers, which keeps the graph
// acyclic.
struct OpGraph {
  std::vector<OpNode> nodes;
  std::vector<std::pair<int, int>> edges;

  std::vector<std::vector<int>> successors() const;
  std::vector<std::vector<int>> predecessors() const;
  std::vector<int> sources() const;  // in-degree zero
  std::vector<int> sinks() const;    // out-degree zero
};

// One node per primitive operator of the cell equations; stacked layers and
// both directions of a bidirectional stack appear in the same graph.
OpGraph build_graph(const LstmArchSpec& arch);

// P(v) = W(v) + max over successors P(succ); sinks carry their own weight.
// Decreasing priority is a topological order. Throws on cycles.
std::vector<double> compute_priorities(const OpGraph& g);

struct StageAssignment {
  std::vector<std::vector<int>> stages;  // node ids, stage 0 first
  std::vector<int> parallelism;          // N(v), indexed by node id
  std::vector<int> replication;          // R(G_k), indexed by stage
  // Nodes whose parallelism was rescaled upward on more than one admission;
  // the relative-ratio update can compound for uneven weights.
  std::vector<int> compounded_nodes;
};

// List scheduling in decreasing priority. An admission scales the resident
// operators by ceil(W(v_j)/W(v_i)); a candidate slower than the stage's
// current rate is itself scaled up to match before the resource check. The
// stage is admitted only if its scaled resources fit the platform budget.
// Throws std::runtime_error if a single operator exceeds the budget alone.
StageAssignment schedule(const OpGraph& g, const PlatformProfile& platform,
                         const OpCostProfile& costs);

// Chooses R(G_k) maximizing modeled FPS subject to the platform budget,
// considering every per-stage replication in [1, max_replication]. Ties go
// to the configuration with the lowest DSP total, then lexicographic order.
void enumerate_replication(const OpGraph& g, StageAssignment& assignment,
                           const PlatformProfile& platform,
                           const OpCostProfile& costs,
                           int max_replication = 16);

struct PipelineEstimate {
  std::vector<double> cycles;  // T_k per stage
  double fps = 0.0;
  ResourceTotals totals;
  FitReport fit;
};

PipelineEstimate estimate_pipeline(const OpGraph& g,
                                   const StageAssignment& assignment,
                                   const PlatformProfile& platform,
                                   const OpCostProfile& costs);

// Longest dependency chain (node count) within one stage, for the affine
// pipeline-depth model.
std::size_t stage_critical_path(const OpGraph& g,
                                const std::vector<int>& stage_nodes);

// Plain-text DAG dump (one node/edge per line) for inspection and goldens.
// With an assignment, each node line also carries its parallelism N(v).
std::string export_graph_text(const OpGraph& g,
                              const std::vector<int>* parallelism = nullptr);

}  // namespace bclstm

#endif  // BCLSTM_GRAPH_HPP_

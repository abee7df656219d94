#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "hetnav/autodiff.hpp"
#include "hetnav/core.hpp"

namespace hetnav {

/// The five pairwise interaction kinds: human-human, human-center-robot,
/// human-other-robot, center-robot-other-robot, other-robot-other-robot.
enum class RelationType { HHI = 0, HCRI = 1, HORI = 2, CRORI = 3, ORORI = 4 };

inline constexpr int kNumRelations = 5;
inline constexpr int kEmbedDim = 64;

const char* to_string(RelationType relation);

/// Typed scene graph. Node 0 is the center robot, nodes 1..n the humans,
/// nodes n+1..n+m the other robots. Edges are stored directed with every
/// undirected link present in both directions; the five lists partition the
/// complete graph on all agents. Homogeneous mode keeps the whole union in
/// slot 0 and leaves the rest empty.
struct HetGraph {
  int n_humans = 0;
  int n_other_robots = 0;
  std::array<std::vector<std::pair<int, int>>, kNumRelations> edges;

  int n_nodes() const { return 1 + n_humans + n_other_robots; }
};

HetGraph build_het_graph(int n_humans, int n_other_robots, Ablation ablation);
HetGraph build_het_graph(const JointObservation& obs, Ablation ablation);

/// Two dense layers with ReLU after each.
struct Mlp2 {
  ad::Tensor w0, b0, w1, b1;
};

/// Four dense layers, ReLU on the three hidden ones, linear output.
struct Mlp4 {
  ad::Tensor w0, b0, w1, b1, w2, b2, w3, b3;
};

/// Per-relation weight pair of one graph layer: w1 multiplies the node's own
/// feature, w2 the summed neighbor features.
struct GnnLayer {
  std::vector<ad::Tensor> w1, w2;
};

/// All trainable weights. Heterogeneous modes embed humans and other robots
/// separately and keep five relation weight pairs per layer; homogeneous
/// modes share one peer embedding (embed_or stays empty) and one relation.
struct ModelParams {
  Ablation ablation = Ablation::HeR;
  Mlp2 embed_cr;
  Mlp2 embed_h;
  Mlp2 embed_or;
  std::array<GnnLayer, 2> gnn;
  Mlp4 value_head;

  int n_relations() const { return is_homogeneous(ablation) ? 1 : kNumRelations; }
  int neighbor_input_dim() const { return drops_category(ablation) ? 7 : 8; }

  /// Flat views in a fixed order (the checkpoint and optimizer order).
  std::vector<ad::Tensor*> tensors();
  std::vector<const ad::Tensor*> tensors() const;
  std::vector<std::string> tensor_names() const;
};

/// All tensors allocated with the right shapes, zero filled.
ModelParams make_zero_params(Ablation ablation);

/// Xavier-uniform weights (bound sqrt(6 / (fan_in + fan_out))), zero biases;
/// a fixed draw order makes this a pure function of (ablation, stream).
ModelParams init_params(Ablation ablation, RngStream& rng);

/// Per-agent 64-wide features from the observation, node order as in
/// HetGraph. Rows go through embed_cr / embed_h / embed_or by agent type
/// (peers share embed_h in homogeneous modes).
ad::Tensor embed(const JointObservation& obs, const ModelParams& params);

/// One relational message-passing layer:
///   out(v) = relu( h(v) * mean_{i in touching(v)} w1_i
///                  + sum_i sum_{w in N_i(v)} h(w) * w2_i )
/// where touching(v) are the relations with an edge at v; a node touching
/// none uses the average of all relations' w1 (degenerate single-agent
/// scenes). `weights` must carry one w1/w2 pair per populated relation.
ad::Tensor hetgnn_layer(const HetGraph& graph, const ad::Tensor& feats,
                        const GnnLayer& weights);

/// Scalar state value: embed, two graph layers, center-robot feature through
/// the value head.
double value(const JointObservation& obs, const ModelParams& params);

/// Values of many observations in one pass over a disjoint-union graph;
/// results match per-scene value() up to dense-kernel rounding.
std::vector<double> value_batch(const std::vector<JointObservation>& batch,
                                const ModelParams& params);

/// Parameter nodes staged on a tape, mirroring ModelParams::tensors() order.
struct StagedParams {
  Ablation ablation = Ablation::HeR;
  std::vector<ad::NodeId> all;
};

StagedParams stage_params(ad::Tape& tape, const ModelParams& params);

/// Builds the full differentiable forward pass for a batch of observations;
/// returns a (batch x 1) node of state values.
ad::NodeId value_graph(ad::Tape& tape, const StagedParams& staged,
                       const std::vector<JointObservation>& batch);

/// Binary checkpoint container: magic, format version, ablation tag and a
/// dimension table, then every tensor as (name, rows, cols, row-major
/// 64-bit little-endian floats). Round-trips bit-exactly.
void save_checkpoint(const ModelParams& params, const std::string& path);

/// Throws ConfigError with a dimension diff when the file does not match the
/// architecture implied by its ablation tag.
ModelParams load_checkpoint(const std::string& path);

}  // namespace hetnav

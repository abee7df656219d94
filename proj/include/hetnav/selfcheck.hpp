#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hetnav/model.hpp"

namespace hetnav {

struct CheckReport {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

/// Independent reference for the relation-collapsed layer: plain loops, no
/// tape, no dense kernels. out(v) = relu(h(v) * w1 + sum over incoming
/// union-graph edges of h(src) * w2).
ad::Tensor homogeneous_layer_oracle(
    const std::vector<std::pair<int, int>>& union_edges,
    const ad::Tensor& feats, const ad::Tensor& w1, const ad::Tensor& w2);

/// End-to-end value gradients vs central finite differences (h = 1e-5) on
/// random scenes of 1..8 agents across all four model variants.
CheckReport gradient_check(int n_scenes = 20, int min_coords = 256,
                           std::uint64_t seed = 0x6772616431ULL);

/// Relation-tied layers vs homogeneous_layer_oracle, and the homogeneous
/// mode against both, on random scenes.
CheckReport reduction_check(int n_scenes = 100,
                            std::uint64_t seed = 0x726564751ULL);

/// Full-visibility ORCA-only episodes keep every pairwise surface
/// separation non-negative.
CheckReport orca_soundness_check(int n_episodes = 100,
                                 std::uint64_t seed = 0x6f726361ULL);

std::vector<CheckReport> run_all_selfchecks();

}  // namespace hetnav

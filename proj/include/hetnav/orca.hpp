#pragma once

#include <stdexcept>
#include <vector>

#include "hetnav/core.hpp"

namespace hetnav {

struct OrcaParams {
  double neighbor_dist = 10.0;
  double time_horizon = 5.0;
  double time_horizon_obst = 5.0;  // carried for completeness; no static obstacles
  double max_speed = 1.0;
  /// Avoidance-only inflation of every agent radius (collision detection
  /// elsewhere uses the true radii). When the joint constraints go infeasible
  /// in a dense crossing, the fallback program admits millimetre-scale
  /// violations; this buffer keeps those inside the inflated shell so true
  /// surfaces never touch.
  double safety_buffer = 0.01;

  void validate() const {
    if (neighbor_dist <= 0.0 || time_horizon <= 0.0 ||
        time_horizon_obst <= 0.0 || max_speed <= 0.0) {
      throw std::invalid_argument("OrcaParams: all fields must be positive");
    }
    if (safety_buffer < 0.0) {
      throw std::invalid_argument("OrcaParams: safety_buffer must be >= 0");
    }
  }
};

/// One velocity update of optimal reciprocal collision avoidance: builds one
/// half-plane constraint per visible neighbor within neighbor_dist, then picks
/// the feasible velocity closest to the preferred velocity (unit vector to
/// goal scaled by min(v_pref, d_g/dt), so agents stop on their goals). If the
/// half-planes admit no velocity, the standard projected fallback program
/// returns the least-penetrating one instead.
Vec2 orca_velocity(const AgentState& self,
                   const std::vector<AgentState>& visible_neighbors,
                   const OrcaParams& params, double dt);

}  // namespace hetnav

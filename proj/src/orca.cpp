#include "hetnav/orca.hpp"

#include <cmath>
#include <cstddef>

namespace hetnav {
namespace {

// Half-plane constraint: admissible velocities lie to the LEFT of the
// directed line through `point` along `direction`.
struct Line {
  Vec2 point;
  Vec2 direction;
};

constexpr double kEps = 1e-10;

// 1-D program on line `line_no` clipped by the speed circle and all earlier
// lines. direction_opt switches between "closest point to opt_velocity" and
// "furthest along opt_velocity" (used by the fallback program).
bool linear_program1(const std::vector<Line>& lines, std::size_t line_no,
                     double radius, const Vec2& opt_velocity,
                     bool direction_opt, Vec2& result) {
  const double dot = lines[line_no].point.dot(lines[line_no].direction);
  const double discriminant =
      dot * dot + radius * radius - lines[line_no].point.norm_sq();
  if (discriminant < 0.0) {
    // Speed circle fully invalidates this line.
    return false;
  }

  const double sqrt_disc = std::sqrt(discriminant);
  double t_left = -dot - sqrt_disc;
  double t_right = -dot + sqrt_disc;

  for (std::size_t i = 0; i < line_no; ++i) {
    const double denominator =
        lines[line_no].direction.det(lines[i].direction);
    const double numerator =
        lines[i].direction.det(lines[line_no].point - lines[i].point);

    if (std::fabs(denominator) <= kEps) {
      // Lines line_no and i are (almost) parallel.
      if (numerator < 0.0) return false;
      continue;
    }

    const double t = numerator / denominator;
    if (denominator >= 0.0) {
      t_right = std::min(t_right, t);
    } else {
      t_left = std::max(t_left, t);
    }
    if (t_left > t_right) return false;
  }

  if (direction_opt) {
    if (opt_velocity.dot(lines[line_no].direction) > 0.0) {
      result = lines[line_no].point + t_right * lines[line_no].direction;
    } else {
      result = lines[line_no].point + t_left * lines[line_no].direction;
    }
  } else {
    const double t =
        lines[line_no].direction.dot(opt_velocity - lines[line_no].point);
    if (t < t_left) {
      result = lines[line_no].point + t_left * lines[line_no].direction;
    } else if (t > t_right) {
      result = lines[line_no].point + t_right * lines[line_no].direction;
    } else {
      result = lines[line_no].point + t * lines[line_no].direction;
    }
  }
  return true;
}

// 2-D program: returns lines.size() on success, else the index of the first
// infeasible line (result then holds the value from before that line).
std::size_t linear_program2(const std::vector<Line>& lines, double radius,
                            const Vec2& opt_velocity, bool direction_opt,
                            Vec2& result) {
  if (direction_opt) {
    // opt_velocity is a unit direction in this mode.
    result = opt_velocity * radius;
  } else if (opt_velocity.norm_sq() > radius * radius) {
    result = opt_velocity.normalized() * radius;
  } else {
    result = opt_velocity;
  }

  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].direction.det(lines[i].point - result) > 0.0) {
      const Vec2 temp_result = result;
      if (!linear_program1(lines, i, radius, opt_velocity, direction_opt,
                           result)) {
        result = temp_result;
        return i;
      }
    }
  }
  return lines.size();
}

// Fallback when the half-planes are jointly infeasible: minimizes the worst
// constraint violation by optimizing along penetration distance.
void linear_program3(const std::vector<Line>& lines, std::size_t begin_line,
                     double radius, Vec2& result) {
  double distance = 0.0;

  for (std::size_t i = begin_line; i < lines.size(); ++i) {
    if (lines[i].direction.det(lines[i].point - result) > distance) {
      std::vector<Line> proj_lines;
      proj_lines.reserve(i);
      for (std::size_t j = 0; j < i; ++j) {
        Line line;
        const double determinant =
            lines[i].direction.det(lines[j].direction);
        if (std::fabs(determinant) <= kEps) {
          if (lines[i].direction.dot(lines[j].direction) > 0.0) {
            // Parallel, same direction: j is redundant here.
            continue;
          }
          line.point = 0.5 * (lines[i].point + lines[j].point);
        } else {
          line.point =
              lines[i].point +
              (lines[j].direction.det(lines[i].point - lines[j].point) /
               determinant) *
                  lines[i].direction;
        }
        line.direction =
            (lines[j].direction - lines[i].direction).normalized();
        proj_lines.push_back(line);
      }

      const Vec2 temp_result = result;
      if (linear_program2(proj_lines, radius,
                          Vec2{-lines[i].direction.y, lines[i].direction.x},
                          true, result) < proj_lines.size()) {
        // Can only fail through rounding; the previous result is feasible
        // for this sub-program by construction, so keep it.
        result = temp_result;
      }
      distance = lines[i].direction.det(lines[i].point - result);
    }
  }
}

}  // namespace

Vec2 orca_velocity(const AgentState& self,
                   const std::vector<AgentState>& visible_neighbors,
                   const OrcaParams& params, double dt) {
  params.validate();
  if (dt <= 0.0) throw std::invalid_argument("orca_velocity: dt must be > 0");

  const Vec2 to_goal = self.goal - self.p;
  const double d_g = to_goal.norm();
  const Vec2 pref_velocity =
      d_g > 0.0 ? to_goal / d_g * std::min(self.v_pref, d_g / dt)
                : Vec2{0.0, 0.0};

  const double inv_time_horizon = 1.0 / params.time_horizon;
  std::vector<Line> lines;
  lines.reserve(visible_neighbors.size());

  for (const AgentState& other : visible_neighbors) {
    const Vec2 relative_position = other.p - self.p;
    if (relative_position.norm_sq() > params.neighbor_dist * params.neighbor_dist) {
      continue;
    }
    const Vec2 relative_velocity = self.v - other.v;
    const double dist_sq = relative_position.norm_sq();
    // Each party contributes its inflated radius, as if both were that large.
    const double combined_radius =
        self.r + other.r + 2.0 * params.safety_buffer;
    const double combined_radius_sq = combined_radius * combined_radius;

    Line line;
    Vec2 u;

    if (dist_sq > combined_radius_sq) {
      // No current collision: cut-off circle at horizon distance.
      const Vec2 w = relative_velocity - inv_time_horizon * relative_position;
      const double w_length_sq = w.norm_sq();
      const double dot = w.dot(relative_position);

      if (dot < 0.0 && dot * dot > combined_radius_sq * w_length_sq) {
        // Project on cut-off circle.
        const double w_length = std::sqrt(w_length_sq);
        const Vec2 unit_w = w / w_length;
        line.direction = {unit_w.y, -unit_w.x};
        u = (combined_radius * inv_time_horizon - w_length) * unit_w;
      } else {
        // Project on the nearer leg of the velocity-obstacle cone.
        const double leg = std::sqrt(dist_sq - combined_radius_sq);
        if (relative_position.det(w) > 0.0) {
          line.direction = Vec2{relative_position.x * leg -
                                    relative_position.y * combined_radius,
                                relative_position.x * combined_radius +
                                    relative_position.y * leg} /
                           dist_sq;
        } else {
          line.direction = -Vec2{relative_position.x * leg +
                                     relative_position.y * combined_radius,
                                 -relative_position.x * combined_radius +
                                     relative_position.y * leg} /
                           dist_sq;
        }
        u = relative_velocity.dot(line.direction) * line.direction -
            relative_velocity;
      }
    } else {
      // Already overlapping: push apart within one time step.
      const double inv_time_step = 1.0 / dt;
      const Vec2 w = relative_velocity - inv_time_step * relative_position;
      const double w_length = w.norm();
      const Vec2 unit_w = w / w_length;
      line.direction = {unit_w.y, -unit_w.x};
      u = (combined_radius * inv_time_step - w_length) * unit_w;
    }

    // Reciprocity: each agent takes half the needed correction.
    line.point = self.v + 0.5 * u;
    lines.push_back(line);
  }

  Vec2 new_velocity;
  const std::size_t line_fail = linear_program2(
      lines, params.max_speed, pref_velocity, false, new_velocity);
  if (line_fail < lines.size()) {
    linear_program3(lines, line_fail, params.max_speed, new_velocity);
  }
  return new_velocity;
}

}  // namespace hetnav

#pragma once

#include <Eigen/Core>
#include <vector>

#include "upright/rng.hpp"
#include "upright/terrain.hpp"

namespace upright {

// Appendix randomization table, verbatim ranges. Everything is a pure
// function of (input, rng stream) so per-environment streams keep rollouts
// reproducible.
struct RandomizationRanges {
  bool enabled = true;

  // dynamics perturbations
  double push_interval_min = 15.0, push_interval_max = 20.0;  // s
  double push_vel_min = -1.0, push_vel_max = 1.0;             // m/s per axis
  double friction_min = 0.5, friction_max = 1.25;
  double com_offset_min = -0.05, com_offset_max = 0.05;       // m
  double link_mass_min = 0.9, link_mass_max = 1.1;            // scale
  double pd_gain_min = 0.9, pd_gain_max = 1.1;                // scale
  int control_delay_max = 2;                                  // {0, 1, 2} steps
  double restitution_min = 0.0, restitution_max = 0.0;        // off by default

  // policy input noise (std devs)
  double noise_base_lin_vel = 0.1;
  double noise_base_ang_vel = 0.2;
  double noise_gravity = 0.05;
  double noise_joint_pos = 0.01;
  double noise_joint_vel = 1.5;
  double noise_terrain_heights = 0.1;

  // visual perturbations
  double depth_erase_prob = 0.4;
  double depth_erase_min_frac = 0.02, depth_erase_max_frac = 0.10;
  double depth_blur_sigma_min = 0.01, depth_blur_sigma_max = 0.1;
  int depth_blur_kernel = 5;
  double depth_noise_std = 0.005;
  int depth_shift_max = 1;  // ray-index analog of image rotation
  double camera_pos_jitter = 0.01;    // m
  double camera_pitch_jitter = 0.087; // rad
  double depth_clip_min = 0.1, depth_clip_max = 2.0;
};

struct DynamicsDraw {
  double friction = 1.0;
  Vec2 com_offset{0.0, 0.0};
  std::vector<double> link_mass_scale;
  std::vector<double> kp_scale, kd_scale;
  int control_delay = 0;
  double restitution = 0.0;
};

DynamicsDraw sample_dynamics(const RandomizationRanges& r, Rng& rng, int n_links, int n_joints);

struct ScheduledPush {
  double time = 0.0;
  Vec2 delta_velocity{0.0, 0.0};
};
// Renewal schedule with gaps U[interval_min, interval_max] from t = 0.
std::vector<ScheduledPush> schedule_pushes(const RandomizationRanges& r, double horizon, Rng& rng);

// Gaussian noise per channel group; the input is left untouched.
struct ProprioNoiseLayout {
  int base_ang_vel_at = 0, base_ang_vel_n = 1;
  int gravity_at = 1, gravity_n = 2;
  int joint_pos_at = 3, joint_pos_n = 8;
  int joint_vel_at = 11, joint_vel_n = 8;
  int terrain_at = -1, terrain_n = 0;  // scandots when present
};
Eigen::VectorXd perturb_proprio(const Eigen::VectorXd& obs, const RandomizationRanges& r,
                                const ProprioNoiseLayout& layout, Rng& rng);

// erase spans -> 1-D Gaussian blur -> additive noise -> re-clip, with a
// +-1 ray shift standing in for image rotation.
DepthScan perturb_depth(const DepthScan& scan, const RandomizationRanges& r, Rng& rng);

// Zeroes the listed joints (free-fall actuator failures).
Eigen::VectorXd torque_dropout(const Eigen::VectorXd& torques, const std::vector<int>& dropout);

}  // namespace upright

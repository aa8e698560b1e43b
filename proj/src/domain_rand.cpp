#include "upright/domain_rand.hpp"

#include <algorithm>
#include <cmath>

namespace upright {

DynamicsDraw sample_dynamics(const RandomizationRanges& r, Rng& rng, int n_links, int n_joints) {
  DynamicsDraw d;
  d.link_mass_scale.assign(n_links, 1.0);
  d.kp_scale.assign(n_joints, 1.0);
  d.kd_scale.assign(n_joints, 1.0);
  if (!r.enabled) return d;
  d.friction = rng.uniform(r.friction_min, r.friction_max);
  d.com_offset = Vec2(rng.uniform(r.com_offset_min, r.com_offset_max),
                      rng.uniform(r.com_offset_min, r.com_offset_max));
  for (auto& s : d.link_mass_scale) s = rng.uniform(r.link_mass_min, r.link_mass_max);
  for (auto& s : d.kp_scale) s = rng.uniform(r.pd_gain_min, r.pd_gain_max);
  for (auto& s : d.kd_scale) s = rng.uniform(r.pd_gain_min, r.pd_gain_max);
  d.control_delay = int(rng.uniform_index(uint64_t(r.control_delay_max + 1)));
  d.restitution = rng.uniform(r.restitution_min, r.restitution_max);
  return d;
}

std::vector<ScheduledPush> schedule_pushes(const RandomizationRanges& r, double horizon, Rng& rng) {
  std::vector<ScheduledPush> pushes;
  if (!r.enabled || horizon <= 0.0) return pushes;
  double t = 0.0;
  for (;;) {
    t += rng.uniform(r.push_interval_min, r.push_interval_max);
    if (t >= horizon) break;
    pushes.push_back({t, Vec2(rng.uniform(r.push_vel_min, r.push_vel_max),
                              rng.uniform(r.push_vel_min, r.push_vel_max))});
  }
  return pushes;
}

Eigen::VectorXd perturb_proprio(const Eigen::VectorXd& obs, const RandomizationRanges& r,
                                const ProprioNoiseLayout& layout, Rng& rng) {
  Eigen::VectorXd out = obs;
  if (!r.enabled) return out;
  auto add = [&](int at, int n, double std) {
    if (std <= 0.0 || at < 0) return;
    for (int i = 0; i < n; ++i) out[at + i] += rng.normal(0.0, std);
  };
  add(layout.base_ang_vel_at, layout.base_ang_vel_n, r.noise_base_ang_vel);
  add(layout.gravity_at, layout.gravity_n, r.noise_gravity);
  add(layout.joint_pos_at, layout.joint_pos_n, r.noise_joint_pos);
  add(layout.joint_vel_at, layout.joint_vel_n, r.noise_joint_vel);
  add(layout.terrain_at, layout.terrain_n, r.noise_terrain_heights);
  return out;
}

DepthScan perturb_depth(const DepthScan& scan, const RandomizationRanges& r, Rng& rng) {
  DepthScan out = scan;
  if (!r.enabled) return out;
  auto& d = out.depths;
  const int n = int(d.size());

  if (rng.bernoulli(r.depth_erase_prob)) {
    const double frac = rng.uniform(r.depth_erase_min_frac, r.depth_erase_max_frac);
    const int span = std::max(1, int(std::round(frac * n)));
    const int start = int(rng.uniform_index(uint64_t(std::max(1, n - span + 1))));
    for (int i = start; i < std::min(n, start + span); ++i) d[i] = scan.clip_max;
  }

  {  // 1-D Gaussian blur, fixed kernel width
    const double sigma = rng.uniform(r.depth_blur_sigma_min, r.depth_blur_sigma_max);
    const int half = r.depth_blur_kernel / 2;
    std::vector<double> w(r.depth_blur_kernel);
    double wsum = 0.0;
    for (int k = -half; k <= half; ++k) {
      w[k + half] = std::exp(-double(k * k) / (2.0 * sigma * sigma));
      wsum += w[k + half];
    }
    std::vector<double> blurred(n);
    for (int i = 0; i < n; ++i) {
      double acc = 0.0;
      for (int k = -half; k <= half; ++k) {
        const int j = std::clamp(i + k, 0, n - 1);
        acc += w[k + half] * d[j];
      }
      blurred[i] = acc / wsum;
    }
    d = std::move(blurred);
  }

  if (r.depth_shift_max > 0) {  // rotation jitter analog
    const int shift = rng.uniform_int(-r.depth_shift_max, r.depth_shift_max);
    if (shift != 0) {
      std::vector<double> shifted(n);
      for (int i = 0; i < n; ++i) shifted[i] = d[std::clamp(i - shift, 0, n - 1)];
      d = std::move(shifted);
    }
  }

  for (auto& v : d) v = std::clamp(v + rng.normal(0.0, r.depth_noise_std), scan.clip_min, scan.clip_max);
  return out;
}

Eigen::VectorXd torque_dropout(const Eigen::VectorXd& torques, const std::vector<int>& dropout) {
  Eigen::VectorXd out = torques;
  for (int j : dropout)
    if (j >= 0 && j < out.size()) out[j] = 0.0;
  return out;
}

}  // namespace upright

#pragma once

#include <Eigen/Core>
#include <array>
#include <string>
#include <vector>

#include "upright/model.hpp"
#include "upright/physics.hpp"
#include "upright/reference.hpp"

namespace upright {

// Rows of the composite reward, one per Table-1 term.
enum class RewardTerm : int {
  rb_pos_track = 0,
  rb_rot_track,
  rb_lin_vel_track,
  rb_ang_vel_track,
  joint_pos_track,
  joint_vel_track,
  torque_penalty,
  torque_limit,
  joint_pos_limit,
  joint_vel_limit,
  joint_acc,
  momentum_change,
  body_yank,
  joint_vel_penalty,
  action_rate,
  undesired_contacts,
  support_at_edge,
  head_height,
  base_lin_vel,
  base_ang_vel,
};
constexpr int kNumRewardTerms = 20;
const char* reward_term_name(RewardTerm t);

struct RewardWeights {
  // motion imitation (Gaussian kernels exp(-d^2 / sigma))
  double rb_pos_track = 1.25;
  double rb_rot_track = 0.50;
  double rb_lin_vel_track = 0.125;
  double rb_ang_vel_track = 0.125;
  double joint_pos_track = 0.50;
  double joint_vel_track = 0.125;
  // regularization & safety
  double torque_penalty = -1.0e-6;
  double torque_limit = -0.1;
  double joint_pos_limit = -10.0;
  double joint_vel_limit = -5.0;
  double joint_acc = -2.5e-7;
  double momentum_change = -5.0e-3;
  double body_yank = -2.0e-6;
  double joint_vel_penalty = -1.0e-4;
  double action_rate = -0.1;
  double undesired_contacts = -0.1;
  double support_at_edge = -1.0;
  // post-recovery stabilization
  double head_height = 0.25;
  double base_lin_vel = -1.0;
  double base_ang_vel = -0.025;

  // kernel widths (unpublished; informative over the observed error ranges)
  double sigma_rb_pos = 0.30;
  double sigma_rb_rot = 0.50;
  double sigma_lin_vel = 1.0;
  double sigma_ang_vel = 2.0;
  double sigma_joint_pos = 1.0;
  double sigma_joint_vel = 25.0;
  double sigma_head_height = 0.04;

  // links whose terrain contact is not penalized (shins/feet, forearms/hands)
  std::vector<int> permitted_contact_links{kShinL, kShinR, kForearmL, kForearmR};

  void validate() const;  // tracking weights >= 0, penalties <= 0, sigmas > 0
};

struct RewardBreakdown {
  std::array<double, kNumRewardTerms> value{};
  std::array<bool, kNumRewardTerms> present{};
  double total = 0.0;

  void set(RewardTerm t, double v);
  double get(RewardTerm t) const { return value[int(t)]; }
  std::vector<std::pair<std::string, double>> rows() const;
};

double gaussian_kernel(double d, double sigma);  // exp(-d^2 / sigma), sigma > 0

RewardBreakdown imitation_reward(const Keyframe& ref, const HumanoidState& state,
                                 const RewardWeights& w);

// Cross-step context for the regularization rows.
struct RegularizationAux {
  Eigen::VectorXd prev_joint_vel;   // for joint accelerations
  Vec2 momentum{0, 0}, prev_momentum{0, 0};
  Vec2 contact_force{0, 0}, prev_contact_force{0, 0};  // net, for body yank
  double dt = 0.02;
  const std::vector<double>* terrain_edges = nullptr;  // discontinuity x's
  double edge_margin = 0.05;                           // m
};

RewardBreakdown regularization_reward(const HumanoidState& state, const Eigen::VectorXd& torques,
                                      const Eigen::VectorXd& action,
                                      const Eigen::VectorXd& prev_action,
                                      const ContactSet& contacts, const HumanoidModel& model,
                                      const RewardWeights& w, const RegularizationAux& aux);

// Head-height kernel is always active; the residual-velocity penalties gate
// on the standing flag.
RewardBreakdown post_recovery_reward(const HumanoidState& state, const HumanoidModel& model,
                                     const RewardWeights& w, bool standing,
                                     double ground_z_under_head = 0.0);

// Union of disjoint breakdowns; duplicate rows are rejected.
RewardBreakdown total_reward(const std::vector<RewardBreakdown>& parts);

}  // namespace upright

#include "upright/rewards.hpp"

#include <cmath>
#include <stdexcept>

namespace upright {

const char* reward_term_name(RewardTerm t) {
  switch (t) {
    case RewardTerm::rb_pos_track: return "RB pos. track.";
    case RewardTerm::rb_rot_track: return "RB rot. track";
    case RewardTerm::rb_lin_vel_track: return "RB lin. vel. track.";
    case RewardTerm::rb_ang_vel_track: return "RB ang. vel. track.";
    case RewardTerm::joint_pos_track: return "Joint pos. track.";
    case RewardTerm::joint_vel_track: return "Joint vel. track.";
    case RewardTerm::torque_penalty: return "Torque penalty";
    case RewardTerm::torque_limit: return "Torque limit";
    case RewardTerm::joint_pos_limit: return "Joint pos. limit";
    case RewardTerm::joint_vel_limit: return "Joint vel. limit";
    case RewardTerm::joint_acc: return "Joint acc.";
    case RewardTerm::momentum_change: return "Momentum change";
    case RewardTerm::body_yank: return "Body yank";
    case RewardTerm::joint_vel_penalty: return "Joint vel. penalty";
    case RewardTerm::action_rate: return "Action rate";
    case RewardTerm::undesired_contacts: return "Undesired contacts";
    case RewardTerm::support_at_edge: return "Support at edge";
    case RewardTerm::head_height: return "Head height";
    case RewardTerm::base_lin_vel: return "Base linear velocity";
    case RewardTerm::base_ang_vel: return "Base angular velocity";
  }
  return "?";
}

void RewardWeights::validate() const {
  auto track = [](double w, const char* n) {
    if (w < 0.0) throw std::invalid_argument(std::string("tracking weight must be >= 0: ") + n);
  };
  auto pen = [](double w, const char* n) {
    if (w > 0.0) throw std::invalid_argument(std::string("penalty weight must be <= 0: ") + n);
  };
  auto sig = [](double s, const char* n) {
    if (s <= 0.0) throw std::invalid_argument(std::string("sigma must be > 0: ") + n);
  };
  track(rb_pos_track, "rb_pos_track");
  track(rb_rot_track, "rb_rot_track");
  track(rb_lin_vel_track, "rb_lin_vel_track");
  track(rb_ang_vel_track, "rb_ang_vel_track");
  track(joint_pos_track, "joint_pos_track");
  track(joint_vel_track, "joint_vel_track");
  track(head_height, "head_height");
  pen(torque_penalty, "torque_penalty");
  pen(torque_limit, "torque_limit");
  pen(joint_pos_limit, "joint_pos_limit");
  pen(joint_vel_limit, "joint_vel_limit");
  pen(joint_acc, "joint_acc");
  pen(momentum_change, "momentum_change");
  pen(body_yank, "body_yank");
  pen(joint_vel_penalty, "joint_vel_penalty");
  pen(action_rate, "action_rate");
  pen(undesired_contacts, "undesired_contacts");
  pen(support_at_edge, "support_at_edge");
  pen(base_lin_vel, "base_lin_vel");
  pen(base_ang_vel, "base_ang_vel");
  sig(sigma_rb_pos, "sigma_rb_pos");
  sig(sigma_rb_rot, "sigma_rb_rot");
  sig(sigma_lin_vel, "sigma_lin_vel");
  sig(sigma_ang_vel, "sigma_ang_vel");
  sig(sigma_joint_pos, "sigma_joint_pos");
  sig(sigma_joint_vel, "sigma_joint_vel");
  sig(sigma_head_height, "sigma_head_height");
}

void RewardBreakdown::set(RewardTerm t, double v) {
  value[int(t)] = v;
  present[int(t)] = true;
  total += v;
}

std::vector<std::pair<std::string, double>> RewardBreakdown::rows() const {
  std::vector<std::pair<std::string, double>> out;
  for (int i = 0; i < kNumRewardTerms; ++i)
    if (present[i]) out.emplace_back(reward_term_name(RewardTerm(i)), value[i]);
  return out;
}

double gaussian_kernel(double d, double sigma) {
  if (sigma <= 0.0) throw std::invalid_argument("gaussian_kernel: sigma must be > 0");
  return std::exp(-d * d / sigma);
}

RewardBreakdown imitation_reward(const Keyframe& ref, const HumanoidState& state,
                                 const RewardWeights& w) {
  RewardBreakdown b;
  const auto err = relative_error(ref, state);
  double mean_norm = 0.0;
  for (const auto& e : err) mean_norm += e.norm();
  mean_norm /= double(err.size());
  b.set(RewardTerm::rb_pos_track, w.rb_pos_track * gaussian_kernel(mean_norm, w.sigma_rb_pos));

  const double dang = wrap_angle(ref.base_angle - state.base_angle);
  b.set(RewardTerm::rb_rot_track, w.rb_rot_track * gaussian_kernel(dang, w.sigma_rb_rot));

  const double dlin = (ref.base_lin_vel - state.base_lin_vel).norm();
  b.set(RewardTerm::rb_lin_vel_track, w.rb_lin_vel_track * gaussian_kernel(dlin, w.sigma_lin_vel));

  const double dang_vel = ref.base_ang_vel - state.base_ang_vel;
  b.set(RewardTerm::rb_ang_vel_track,
        w.rb_ang_vel_track * gaussian_kernel(dang_vel, w.sigma_ang_vel));

  const double dq = (ref.joint_pos - state.joint_pos).norm();
  b.set(RewardTerm::joint_pos_track, w.joint_pos_track * gaussian_kernel(dq, w.sigma_joint_pos));

  const double dqd = (ref.joint_vel - state.joint_vel).norm();
  b.set(RewardTerm::joint_vel_track, w.joint_vel_track * gaussian_kernel(dqd, w.sigma_joint_vel));
  return b;
}

RewardBreakdown regularization_reward(const HumanoidState& state, const Eigen::VectorXd& torques,
                                      const Eigen::VectorXd& action,
                                      const Eigen::VectorXd& prev_action,
                                      const ContactSet& contacts, const HumanoidModel& model,
                                      const RewardWeights& w, const RegularizationAux& aux) {
  RewardBreakdown b;
  b.set(RewardTerm::torque_penalty, w.torque_penalty * torques.squaredNorm());

  double over_torque = 0.0, pos_limit = 0.0, vel_limit = 0.0;
  for (int j = 0; j < model.n_joints(); ++j) {
    const auto& jt = model.joints[j];
    over_torque += std::max(0.0, std::abs(torques[j]) - jt.torque_limit);
    pos_limit += std::max(0.0, state.joint_pos[j] - jt.q_max) +
                 std::max(0.0, jt.q_min - state.joint_pos[j]);
    vel_limit += std::max(0.0, std::abs(state.joint_vel[j]) - jt.vel_limit);
  }
  b.set(RewardTerm::torque_limit, w.torque_limit * over_torque);
  b.set(RewardTerm::joint_pos_limit, w.joint_pos_limit * pos_limit);
  b.set(RewardTerm::joint_vel_limit, w.joint_vel_limit * vel_limit);

  const Eigen::VectorXd qacc = (state.joint_vel - aux.prev_joint_vel) / aux.dt;
  b.set(RewardTerm::joint_acc, w.joint_acc * qacc.squaredNorm());

  b.set(RewardTerm::momentum_change,
        w.momentum_change * (aux.momentum - aux.prev_momentum).norm());
  b.set(RewardTerm::body_yank,
        w.body_yank * (aux.contact_force - aux.prev_contact_force).squaredNorm());
  b.set(RewardTerm::joint_vel_penalty, w.joint_vel_penalty * state.joint_vel.squaredNorm());
  b.set(RewardTerm::action_rate, w.action_rate * (action - prev_action).squaredNorm());

  int undesired = 0;
  for (const auto& c : contacts) {
    bool permitted = false;
    for (int link : w.permitted_contact_links) permitted = permitted || (c.link == link);
    if (!permitted) ++undesired;
  }
  b.set(RewardTerm::undesired_contacts, w.undesired_contacts * double(undesired));

  int at_edge = 0;
  if (aux.terrain_edges) {
    for (const auto& c : contacts) {
      if (c.normal_force <= 0.0) continue;
      for (double ex : *aux.terrain_edges) {
        if (std::abs(c.position.x() - ex) <= aux.edge_margin) {
          ++at_edge;
          break;
        }
      }
    }
  }
  b.set(RewardTerm::support_at_edge, w.support_at_edge * double(at_edge));
  return b;
}

RewardBreakdown post_recovery_reward(const HumanoidState& state, const HumanoidModel& model,
                                     const RewardWeights& w, bool standing,
                                     double ground_z_under_head) {
  RewardBreakdown b;
  static thread_local double nominal = -1.0;
  static thread_local const HumanoidModel* nominal_model = nullptr;
  if (nominal_model != &model) {  // cache the FK-derived constant per model
    nominal = nominal_head_height(model);
    nominal_model = &model;
  }
  const double dh = (head_height(state, model) - ground_z_under_head) - nominal;
  b.set(RewardTerm::head_height, w.head_height * gaussian_kernel(dh, w.sigma_head_height));
  const double lin = standing ? state.base_lin_vel.squaredNorm() : 0.0;
  const double ang = standing ? state.base_ang_vel * state.base_ang_vel : 0.0;
  b.set(RewardTerm::base_lin_vel, w.base_lin_vel * lin);
  b.set(RewardTerm::base_ang_vel, w.base_ang_vel * ang);
  return b;
}

RewardBreakdown total_reward(const std::vector<RewardBreakdown>& parts) {
  RewardBreakdown out;
  for (const auto& p : parts) {
    for (int i = 0; i < kNumRewardTerms; ++i) {
      if (!p.present[i]) continue;
      if (out.present[i])
        throw std::invalid_argument(std::string("duplicate reward row: ") +
                                    reward_term_name(RewardTerm(i)));
      out.set(RewardTerm(i), p.value[i]);
    }
  }
  return out;
}

}  // namespace upright

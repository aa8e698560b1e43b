#include "upright/env.hpp"

#include <cmath>

namespace upright {

const ReferenceClip& ClipLibrary::get(int index, bool mirrored, bool sparse_set) const {
  const auto& set = sparse_set ? (mirrored ? sparse_mirrored : sparse)
                               : (mirrored ? full_mirrored : full);
  return set.at(size_t(index));
}

ClipLibrary make_clip_library(const HumanoidModel& model, const EnvConfig& cfg,
                              std::vector<ReferenceClip> clips) {
  ClipLibrary lib;
  lib.full = std::move(clips);
  for (const auto& c : lib.full) {
    lib.full_mirrored.push_back(c.mirrored(model));
    lib.sparse.push_back(subsample_keyframes(c, cfg.keyframe_rate));
    lib.sparse_mirrored.push_back(subsample_keyframes(lib.full_mirrored.back(), cfg.keyframe_rate));
  }
  return lib;
}

bool standing_instant(const HumanoidState& state, const HumanoidModel& model,
                      double ground_under_head, const EnvConfig& cfg, double nominal_head) {
  const double clearance = head_height(state, model) - ground_under_head;
  return clearance >= cfg.stand_head_frac * nominal_head &&
         std::abs(wrap_angle(state.base_angle)) <= cfg.stand_max_angle &&
         state.base_lin_vel.norm() <= cfg.stand_max_lin_vel &&
         std::abs(state.base_ang_vel) <= cfg.stand_max_ang_vel;
}

Env::Env(const HumanoidModel& model, const EnvConfig& cfg, const RewardWeights& rewards,
         const RandomizationRanges& dr, std::shared_ptr<const ClipLibrary> clips, uint64_t seed,
         uint64_t stream)
    : base_model_(model), cfg_(cfg), rewards_(rewards), dr_(dr), clips_(std::move(clips)),
      rng_(seed, stream) {
  layout_.n_joints = base_model_.n_joints();
  layout_.n_links = base_model_.n_links();
  layout_.scandots = cfg_.scandots.count;
  layout_.ref_block = 2 * base_model_.n_links() + 1;
  layout_.depth = cfg_.depth_rays;
  layout_.proprio_hist = cfg_.proprio_history;
  layout_.depth_hist = cfg_.depth_history;
  layout_.future = cfg_.future_keyframes;
  nominal_head_ = nominal_head_height(base_model_);
  world_ = std::make_unique<PhysicsWorld>(base_model_);
}

const ReferenceClip& Env::active_clip(bool sparse_set) const {
  return clips_->get(init_.clip_index, init_.mirror, sparse_set);
}

Keyframe Env::reference_frame() const {
  const Keyframe kf = active_clip(true).sample(phase_, base_model_);
  return project_to_terrain(kf, terrain_);
}

void Env::reset(Stage stage) {
  Heightfield terrain;
  if (stage == Stage::flat) {
    terrain = generate_terrain(TerrainFamily::flat, 0.0, rng_.next_u64(), cfg_.terrain_extent,
                               cfg_.terrain_spacing);
  } else {
    const int family = 1 + int(rng_.uniform_index(6));  // the six non-flat families
    const double difficulty = rng_.uniform(0.0, 14.0);
    terrain = generate_terrain(TerrainFamily(family), difficulty, rng_.next_u64(),
                               cfg_.terrain_extent, cfg_.terrain_spacing);
  }
  const InitSpec spec =
      sample_initialization(clips_->full, rng_, cfg_.init, base_model_.n_joints());
  apply_init(spec, std::move(terrain));
}

void Env::reset_with(const InitSpec& spec, Heightfield terrain) {
  apply_init(spec, std::move(terrain));
}

void Env::apply_init(const InitSpec& spec, Heightfield terrain) {
  init_ = spec;
  terrain_ = std::move(terrain);
  terrain_edges_ = terrain_.discontinuities(cfg_.edge_jump);

  // per-episode dynamics randomization on a fresh model copy
  HumanoidModel m = base_model_;
  ContactParams cp;
  const DynamicsDraw draw = sample_dynamics(dr_, rng_, m.n_links(), m.n_joints());
  for (int k = 0; k < m.n_links(); ++k) {
    m.links[k].mass *= draw.link_mass_scale[k];
    m.links[k].inertia *= draw.link_mass_scale[k];
  }
  m.links[0].com_local += draw.com_offset;
  for (int j = 0; j < m.n_joints(); ++j) {
    m.joints[j].kp *= draw.kp_scale[j];
    m.joints[j].kd *= draw.kd_scale[j];
  }
  cp.friction = dr_.enabled ? draw.friction : cp.friction;
  cp.restitution = draw.restitution;
  world_ = std::make_unique<PhysicsWorld>(m, cp);
  control_delay_ = draw.control_delay;

  // pose at the sampled phase, shifted and projected onto the terrain
  Keyframe kf = active_clip(false).sample(spec.phase, base_model_);
  kf.base_pos.x() += spec.x_offset;
  for (auto& p : kf.link_positions) p.x() += spec.x_offset;
  kf = project_to_terrain(kf, terrain_);
  state_ = make_state(m, kf.base_pos, kf.base_angle, kf.joint_pos);
  state_.base_lin_vel = kf.base_lin_vel;
  state_.base_ang_vel = kf.base_ang_vel;
  state_.joint_vel = kf.joint_vel;
  state_.time = 0.0;

  phase_ = spec.phase;
  free_fall_until_ = spec.free_fall ? spec.free_fall_duration : -1.0;
  resynced_ = !spec.free_fall;
  steps_ = 0;

  prev_action_ = Eigen::VectorXd::Zero(m.n_joints());
  prev_prev_action_ = Eigen::VectorXd::Zero(m.n_joints());
  action_queue_.clear();
  for (int i = 0; i < control_delay_; ++i) action_queue_.push_back(prev_action_);

  aux_ = RegularizationAux{};
  aux_.dt = cfg_.dt_control;
  aux_.prev_joint_vel = state_.joint_vel;
  aux_.momentum = linear_momentum(m, state_);
  aux_.prev_momentum = aux_.momentum;
  aux_.terrain_edges = &terrain_edges_;
  aux_.edge_margin = cfg_.edge_margin;

  const double ground = terrain_.height_at(head_position(state_, m).x());
  const bool inst = standing_instant(state_, m, ground, cfg_, nominal_head_);
  stand_window_.assign(size_t(cfg_.hold_steps()), inst ? 1 : 0);
  sustained_ = inst;

  proprio_hist_.clear();
  depth_hist_.clear();
  depth_age_ = 0;
  if (next_push_in_ < 0.0)
    next_push_in_ = rng_.uniform(dr_.push_interval_min, dr_.push_interval_max);

  log_ = EpisodeLog{};
  log_.clip_id = active_clip(false).id;
  log_.mirrored = spec.mirror;
  log_.terrain_family = terrain_family_name(terrain_.family);
  log_.terrain_difficulty = terrain_.difficulty;
  log_.terrain_seed = terrain_.seed;
  log_.dt = cfg_.dt_control;
  log_.horizon = cfg_.horizon;
  log_.config_digest = cfg_.config_digest;

  build_observations();
}

Env::StepOut Env::step(const Eigen::VectorXd& action) {
  if (done()) throw std::logic_error("Env::step called on a finished episode");
  const HumanoidModel& m = world_->model();
  const double dt = cfg_.dt_control;
  const double t_now = state_.time;

  // control delay queue
  action_queue_.push_back(action);
  Eigen::VectorXd applied = action_queue_[action_queue_.size() - 1 - size_t(control_delay_)];
  while (int(action_queue_.size()) > control_delay_ + 1) action_queue_.pop_front();

  const bool in_free_fall = t_now < free_fall_until_;
  if (in_free_fall) applied = Eigen::VectorXd::Zero(m.n_joints());

  const Eigen::VectorXd q_des = action_to_targets(applied, m, m.action_scale, m.action_clip);
  Eigen::VectorXd tau = pd_torques(q_des, state_, m);
  if (in_free_fall) tau = torque_dropout(tau, init_.dropout_joints);

  // stochastic pushes, persisting across episode boundaries
  if (dr_.enabled) {
    next_push_in_ -= dt;
    if (next_push_in_ <= 0.0) {
      state_.base_lin_vel += Vec2(rng_.uniform(dr_.push_vel_min, dr_.push_vel_max),
                                  rng_.uniform(dr_.push_vel_min, dr_.push_vel_max));
      next_push_in_ = rng_.uniform(dr_.push_interval_min, dr_.push_interval_max);
    }
  }

  aux_.prev_joint_vel = state_.joint_vel;
  ContactSet contacts;
  try {
    auto out = world_->step(state_, tau, terrain_, dt, cfg_.substeps);
    state_ = std::move(out.first);
    contacts = std::move(out.second);
  } catch (const SimulationDiverged& e) {
    log_.diverged = true;
    log_.divergence_reason = e.what();
    throw;
  }
  ++steps_;

  phase_ += dt;
  if (!resynced_ && state_.time >= free_fall_until_) {
    if (cfg_.resync_after_free_fall) {
      const double clearance =
          state_.base_position.y() - terrain_.height_at(state_.base_position.x());
      phase_ = resync_phase(clearance, active_clip(true));
    }
    resynced_ = true;
  }

  // cross-step reward context
  aux_.prev_momentum = aux_.momentum;
  aux_.momentum = linear_momentum(m, state_);
  aux_.prev_contact_force = aux_.contact_force;
  Vec2 net_force(0.0, 0.0);
  for (const auto& c : contacts) {
    const double slope = std::clamp(terrain_.slope_at(c.position.x()),
                                    -world_->contact_params().max_surface_slope,
                                    world_->contact_params().max_surface_slope);
    const double inv_len = 1.0 / std::sqrt(1.0 + slope * slope);
    const Vec2 n(-slope * inv_len, inv_len);
    const Vec2 t(inv_len, slope * inv_len);
    net_force += c.normal_force * n + c.tangent_force * t;
  }
  aux_.contact_force = net_force;

  const Vec2 head = head_position(state_, m);
  const double ground_head = terrain_.height_at(head.x());
  const bool inst = standing_instant(state_, m, ground_head, cfg_, nominal_head_);
  stand_window_.pop_front();
  stand_window_.push_back(inst ? 1 : 0);
  sustained_ = true;
  for (int f : stand_window_) sustained_ = sustained_ && (f != 0);

  const Keyframe ref = reference_frame();
  const RewardBreakdown imit = imitation_reward(ref, state_, rewards_);
  const RewardBreakdown reg =
      regularization_reward(state_, tau, action, prev_action_, contacts, m, rewards_, aux_);
  const RewardBreakdown post =
      post_recovery_reward(state_, m, rewards_, sustained_, ground_head);
  const RewardBreakdown total = total_reward({imit, reg, post});

  if (logging_) {
    LogStep ls;
    ls.time = state_.time;
    ls.state = state_;
    ls.action = action;
    ls.torques = tau;
    ls.reward = total;
    ls.contacts = contacts;
    ls.head_height = head.y();
    ls.ground_under_head = ground_head;
    ls.reference_error = relative_error(ref, state_);
    ls.phase = phase_;
    ls.standing_instant = inst;
    ls.standing_sustained = sustained_;
    log_.steps.push_back(std::move(ls));
  }

  prev_prev_action_ = prev_action_;
  prev_action_ = action;
  build_observations();
  return {total.total, done()};
}

void Env::build_observations() {
  const HumanoidModel& m = world_->model();
  const int nj = layout_.n_joints;
  const int np = layout_.proprio();

  Eigen::VectorXd proprio(np);
  proprio[0] = state_.base_ang_vel;
  proprio.segment(1, 2) = projected_gravity(state_.base_angle);
  proprio.segment(3, nj) = state_.joint_pos;
  proprio.segment(3 + nj, nj) = state_.joint_vel;
  proprio.segment(3 + 2 * nj, nj) = prev_action_;

  ProprioNoiseLayout noise_layout;
  noise_layout.joint_pos_n = nj;
  noise_layout.joint_vel_at = 3 + nj;
  noise_layout.joint_vel_n = nj;
  const Eigen::VectorXd noisy_proprio = perturb_proprio(proprio, dr_, noise_layout, rng_);

  const auto scandots =
      sample_scandots(terrain_, state_.base_position.x(), state_.base_position.y(), cfg_.scandots);
  Eigen::VectorXd scan_clean = Eigen::Map<const Eigen::VectorXd>(scandots.data(), long(scandots.size()));
  Eigen::VectorXd scan_noisy = scan_clean;
  if (dr_.enabled && dr_.noise_terrain_heights > 0.0)
    for (int i = 0; i < scan_noisy.size(); ++i)
      scan_noisy[i] += rng_.normal(0.0, dr_.noise_terrain_heights);

  // next sparse keyframes, root-relative, plus time to reach them
  const ReferenceClip& sparse = active_clip(true);
  const int next = sparse.next_keyframe_index(phase_);
  Eigen::VectorXd ref_block(layout_.future * layout_.ref_block);
  for (int f = 0; f < layout_.future; ++f) {
    const auto& kf = sparse.keyframes[std::min(next + f, int(sparse.keyframes.size()) - 1)];
    const int at = f * layout_.ref_block;
    for (int k = 0; k < layout_.n_links; ++k) {
      const Vec2 rel = kf.link_positions[k] - kf.link_positions[0];
      ref_block[at + 2 * k] = rel.x();
      ref_block[at + 2 * k + 1] = rel.y();
    }
    ref_block[at + 2 * layout_.n_links] = std::max(0.0, kf.time - phase_);
  }

  obs_.teacher.resize(layout_.teacher());
  obs_.teacher << noisy_proprio, scan_noisy, ref_block;

  // critic sees clean signals plus privileged extras
  const Keyframe ref = reference_frame();
  const auto err = relative_error(ref, state_);
  Eigen::VectorXd diff(2 * layout_.n_links);
  for (int k = 0; k < layout_.n_links; ++k) {
    diff[2 * k] = err[size_t(k)].x();
    diff[2 * k + 1] = err[size_t(k)].y();
  }
  obs_.critic.resize(layout_.critic());
  obs_.critic << proprio, scan_clean, ref_block, state_.base_lin_vel, diff;

  // student: proprio + history, depth stack + current scan
  if (proprio_hist_.empty())
    proprio_hist_.assign(size_t(layout_.proprio_hist), noisy_proprio);

  ++depth_age_;
  if (depth_hist_.empty() || depth_age_ >= cfg_.depth_refresh_every) {
    Vec2 cam = head_position(state_, m);
    double heading = state_.base_angle + cfg_.camera_mount_angle;
    if (dr_.enabled) {
      cam += Vec2(rng_.uniform(-dr_.camera_pos_jitter, dr_.camera_pos_jitter),
                  rng_.uniform(-dr_.camera_pos_jitter, dr_.camera_pos_jitter));
      heading += rng_.uniform(-dr_.camera_pitch_jitter, dr_.camera_pitch_jitter);
    }
    DepthScan scan = raycast_depth(terrain_, cam, heading, cfg_.depth_rays, cfg_.depth_fov,
                                   dr_.depth_clip_min, dr_.depth_clip_max);
    scan = perturb_depth(scan, dr_, rng_);
    if (depth_hist_.empty()) {
      depth_hist_.assign(size_t(layout_.depth_hist),
                         Eigen::Map<const Eigen::VectorXd>(scan.depths.data(), long(scan.depths.size())));
    } else {
      depth_hist_.pop_front();
      depth_hist_.push_back(
          Eigen::Map<const Eigen::VectorXd>(scan.depths.data(), long(scan.depths.size())));
    }
    depth_age_ = 0;
  }

  obs_.student.resize(layout_.student());
  int at = 0;
  obs_.student.segment(at, np) = noisy_proprio;
  at += np;
  for (const auto& h : proprio_hist_) {
    obs_.student.segment(at, np) = h;
    at += np;
  }
  for (const auto& d : depth_hist_) {
    obs_.student.segment(at, layout_.depth) = d;
    at += layout_.depth;
  }
  obs_.student.segment(at, layout_.depth) = depth_hist_.back();

  // history shifts after the observation is assembled (newest-last)
  proprio_hist_.pop_front();
  proprio_hist_.push_back(noisy_proprio);
}

EpisodeLog run_episode(Env& env, Policy& policy, Stage stage) {
  env.reset(stage);
  env.set_logging(true);
  try {
    while (!env.done()) env.step(policy.act(env.obs()));
  } catch (const SimulationDiverged& e) {
    throw EpisodeDiverged(e.what(), env.take_log());
  }
  return env.take_log();
}

}  // namespace upright

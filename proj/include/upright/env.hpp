#pragma once

#include <deque>
#include <memory>
#include <optional>

#include "upright/domain_rand.hpp"
#include "upright/episode_log.hpp"
#include "upright/model.hpp"
#include "upright/physics.hpp"
#include "upright/reference.hpp"
#include "upright/rewards.hpp"
#include "upright/terrain.hpp"

namespace upright {

enum class Stage { flat, terrain };

struct EnvConfig {
  double horizon = 7.5;
  double dt_control = 0.02;
  int substeps = 4;

  double keyframe_rate = 5.0;  // sparse reference subsampling
  int future_keyframes = 1;

  ScandotPattern scandots;
  int depth_rays = 64;
  double depth_fov = 1.5;
  double camera_mount_angle = -1.05;  // view direction relative to the base
  int depth_refresh_every = 2;        // 30 Hz camera vs 50 Hz control
  int proprio_history = 10;
  int depth_history = 3;

  // standing detector
  double stand_head_frac = 0.85;
  double stand_max_angle = 0.3;     // rad
  double stand_max_lin_vel = 0.3;   // m/s
  double stand_max_ang_vel = 0.5;   // rad/s
  double stand_hold = 1.0;          // s

  bool resync_after_free_fall = true;
  double terrain_extent = 20.0;
  double terrain_spacing = 0.02;
  double edge_jump = 0.05;    // discontinuity size for "support at edge"
  double edge_margin = 0.05;  // horizontal margin

  InitSampling init;

  int max_steps() const { return int(std::ceil(horizon / dt_control)); }
  int hold_steps() const { return int(std::round(stand_hold / dt_control)); }
};

// Precomputed reference material shared read-only across environments.
struct ClipLibrary {
  std::vector<ReferenceClip> full;
  std::vector<ReferenceClip> full_mirrored;
  std::vector<ReferenceClip> sparse;           // subsampled at keyframe_rate
  std::vector<ReferenceClip> sparse_mirrored;
  const ReferenceClip& get(int index, bool mirrored, bool sparse_set) const;
};
ClipLibrary make_clip_library(const HumanoidModel& model, const EnvConfig& cfg,
                              std::vector<ReferenceClip> clips);

// Observation widths and slices; fixed across stages and terrains.
struct ObsLayout {
  int n_joints = 8, n_links = 9;
  int scandots = 33, ref_block = 19, depth = 64;
  int proprio_hist = 10, depth_hist = 3;
  int future = 1;

  int proprio() const { return 3 + 3 * n_joints; }  // ang vel, gravity, q, qd, prev action
  int teacher() const { return proprio() + scandots + future * ref_block; }
  int goal_inputs() const { return scandots + future * ref_block; }
  int critic() const { return teacher() + 2 + 2 * n_links; }
  int student() const {
    return proprio() * (1 + proprio_hist) + depth * (depth_hist + 1);
  }
  // offsets within the teacher vector
  int goal_at() const { return proprio(); }
};

struct EnvObs {
  Eigen::VectorXd teacher;
  Eigen::VectorXd student;
  Eigen::VectorXd critic;
};

bool standing_instant(const HumanoidState& state, const HumanoidModel& model,
                      double ground_under_head, const EnvConfig& cfg, double nominal_head);

class Env {
 public:
  Env(const HumanoidModel& model, const EnvConfig& cfg, const RewardWeights& rewards,
      const RandomizationRanges& dr, std::shared_ptr<const ClipLibrary> clips, uint64_t seed,
      uint64_t stream);

  void reset(Stage stage);
  // Controlled initialization for evaluation runs.
  void reset_with(const InitSpec& spec, Heightfield terrain);

  struct StepOut {
    double reward = 0.0;
    bool done = false;
  };
  StepOut step(const Eigen::VectorXd& action);

  const EnvObs& obs() const { return obs_; }
  const HumanoidState& state() const { return state_; }
  const ObsLayout& layout() const { return layout_; }
  const HumanoidModel& model() const { return world_->model(); }
  const Heightfield& terrain() const { return terrain_; }
  bool standing() const { return sustained_; }
  int steps_done() const { return steps_; }
  bool done() const { return steps_ >= cfg_.max_steps(); }
  double nominal_head() const { return nominal_head_; }
  const EnvConfig& config() const { return cfg_; }

  void set_logging(bool on) { logging_ = on; }
  const EpisodeLog& log() const { return log_; }
  EpisodeLog take_log() { return std::move(log_); }

 private:
  void apply_init(const InitSpec& spec, Heightfield terrain);
  void build_observations();
  Keyframe reference_frame() const;  // interpolated sparse reference at the current phase
  const ReferenceClip& active_clip(bool sparse_set) const;

  HumanoidModel base_model_;
  EnvConfig cfg_;
  RewardWeights rewards_;
  RandomizationRanges dr_;
  std::shared_ptr<const ClipLibrary> clips_;
  Rng rng_;
  ObsLayout layout_;
  double nominal_head_ = 1.0;

  std::unique_ptr<PhysicsWorld> world_;
  Heightfield terrain_;
  std::vector<double> terrain_edges_;
  HumanoidState state_;
  InitSpec init_;
  double phase_ = 0.0;
  double free_fall_until_ = -1.0;
  bool resynced_ = false;
  int steps_ = 0;

  Eigen::VectorXd prev_action_, prev_prev_action_;
  std::deque<Eigen::VectorXd> action_queue_;  // control delay
  int control_delay_ = 0;

  RegularizationAux aux_;
  std::deque<int> stand_window_;  // instantaneous flags
  bool sustained_ = false;

  std::deque<Eigen::VectorXd> proprio_hist_;
  std::deque<Eigen::VectorXd> depth_hist_;
  int depth_age_ = 0;

  double next_push_in_ = -1.0;  // persists across resets; counts sim time down

  EnvObs obs_;
  bool logging_ = false;
  EpisodeLog log_;
};

// Maps observations to an action of joint width.
struct Policy {
  virtual ~Policy() = default;
  virtual Eigen::VectorXd act(const EnvObs& obs) = 0;
};

// Runs one full episode (no early termination); the partial log rides along
// if the simulation diverges.
struct EpisodeDiverged : SimulationDiverged {
  EpisodeDiverged(const std::string& what, EpisodeLog partial)
      : SimulationDiverged(what), partial_log(std::move(partial)) {}
  EpisodeLog partial_log;
};
EpisodeLog run_episode(Env& env, Policy& policy, Stage stage);

}  // namespace upright

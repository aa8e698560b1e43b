#pragma once

#include <Eigen/Core>
#include <iosfwd>
#include <string>
#include <vector>

#include "upright/model.hpp"
#include "upright/physics.hpp"
#include "upright/rng.hpp"
#include "upright/terrain.hpp"

namespace upright {

// One sparse reference pose. Link positions are world coordinates in the
// flat-ground authoring frame and always FK-consistent with (base, joints).
struct Keyframe {
  double time = 0.0;
  Eigen::VectorXd joint_pos;
  Eigen::VectorXd joint_vel;
  Vec2 base_pos{0.0, 0.0};
  double base_angle = 0.0;
  Vec2 base_lin_vel{0.0, 0.0};
  double base_ang_vel = 0.0;
  std::vector<Vec2> link_positions;
};

enum class ClipStyle {
  stand_supine,
  stand_prone,
  stand_side,
  fall_forward,
  fall_backward,
  fall_side,
  diag_left,
  diag_right,
  crouch_recover
};
const char* clip_style_name(ClipStyle s);
ClipStyle clip_style_from_name(const std::string& name);
constexpr int kNumClipStyles = 9;

struct ReferenceClip {
  std::string id;
  ClipStyle style = ClipStyle::stand_supine;
  std::vector<Keyframe> keyframes;  // strictly increasing times
  double source_rate = 50.0;

  double duration() const { return keyframes.empty() ? 0.0 : keyframes.back().time; }
  // Index of the first keyframe with time >= phase (last one when beyond).
  int next_keyframe_index(double phase) const;
  // Linear interpolation of base and joints at `phase`, link positions by FK
  // so the frame invariant holds.
  Keyframe sample(double phase, const HumanoidModel& model) const;
  // Left-right flip about x = 0: exact for the symmetric default humanoid.
  ReferenceClip mirrored(const HumanoidModel& model) const;

  // FK consistency within tol for every keyframe; throws on violation.
  void validate(const HumanoidModel& model, double tol = 1e-9) const;

  void save(std::ostream& os) const;
  static ReferenceClip load(std::istream& is, const HumanoidModel& model);
};

// Nine scripted recovery demonstrations: cubic interpolation through
// hand-authored joint waypoints, grounded on flat terrain, FK-evaluated at
// 50 Hz with central-difference velocities.
std::vector<ReferenceClip> synthesize_clips(const HumanoidModel& model);

// Keeps the frames nearest to multiples of 1/rate; endpoints always survive.
ReferenceClip subsample_keyframes(const ReferenceClip& clip, double rate);

// Coarse vertical projection: shift every z by
// dz = max_i(h(x_i) - z_i) over links and base so the tightest link touches
// the terrain exactly and none penetrate.
Keyframe project_to_terrain(const Keyframe& frame, const Heightfield& hf);

struct InitSpec {
  int clip_index = 0;
  double phase = 0.0;
  double x_offset = 0.0;  // planar pose noise
  bool mirror = false;
  bool free_fall = false;
  double free_fall_duration = 0.0;
  std::vector<int> dropout_joints;
};

struct InitSampling {
  double x_offset_range = 0.2;
  double mirror_prob = 0.5;
  double free_fall_prob = 0.3;
  double free_fall_min = 0.2, free_fall_max = 0.5;
  int dropout_min = 1, dropout_max = 3;
};

InitSpec sample_initialization(const std::vector<ReferenceClip>& clips, Rng& rng,
                               const InitSampling& opts = {}, int n_joints = 8);

// Phase whose keyframe base height is nearest to base_z; ties break earlier.
double resync_phase(double base_z, const ReferenceClip& clip);

// Root-relative tracking errors (p_ref_i - p_ref_0) - (p_i - p_0) per link.
std::vector<Vec2> relative_error(const Keyframe& ref, const HumanoidState& state);

}  // namespace upright

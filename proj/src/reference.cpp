#include "upright/reference.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace upright {

const char* clip_style_name(ClipStyle s) {
  switch (s) {
    case ClipStyle::stand_supine: return "stand_supine";
    case ClipStyle::stand_prone: return "stand_prone";
    case ClipStyle::stand_side: return "stand_side";
    case ClipStyle::fall_forward: return "fall_forward";
    case ClipStyle::fall_backward: return "fall_backward";
    case ClipStyle::fall_side: return "fall_side";
    case ClipStyle::diag_left: return "diag_left";
    case ClipStyle::diag_right: return "diag_right";
    case ClipStyle::crouch_recover: return "crouch_recover";
  }
  return "?";
}

ClipStyle clip_style_from_name(const std::string& name) {
  for (int i = 0; i < kNumClipStyles; ++i)
    if (name == clip_style_name(ClipStyle(i))) return ClipStyle(i);
  throw std::invalid_argument("unknown clip style: " + name);
}

int ReferenceClip::next_keyframe_index(double phase) const {
  for (int i = 0; i < int(keyframes.size()); ++i)
    if (keyframes[i].time >= phase - 1e-12) return i;
  return int(keyframes.size()) - 1;
}

Keyframe ReferenceClip::sample(double phase, const HumanoidModel& model) const {
  const auto& kfs = keyframes;
  if (phase <= kfs.front().time) {
    Keyframe k = kfs.front();
    k.time = phase;
    return k;
  }
  if (phase >= kfs.back().time) {
    Keyframe k = kfs.back();
    k.time = phase;
    return k;
  }
  int hi = 1;
  while (kfs[hi].time < phase) ++hi;
  const Keyframe& a = kfs[hi - 1];
  const Keyframe& b = kfs[hi];
  const double u = (phase - a.time) / (b.time - a.time);
  Keyframe k;
  k.time = phase;
  k.joint_pos = (1.0 - u) * a.joint_pos + u * b.joint_pos;
  k.joint_vel = (1.0 - u) * a.joint_vel + u * b.joint_vel;
  k.base_pos = (1.0 - u) * a.base_pos + u * b.base_pos;
  k.base_angle = (1.0 - u) * a.base_angle + u * b.base_angle;
  k.base_lin_vel = (1.0 - u) * a.base_lin_vel + u * b.base_lin_vel;
  k.base_ang_vel = (1.0 - u) * a.base_ang_vel + u * b.base_ang_vel;
  k.link_positions = forward_kinematics(model, k.base_pos, k.base_angle, k.joint_pos).keypoint;
  return k;
}

ReferenceClip ReferenceClip::mirrored(const HumanoidModel& model) const {
  // Left-right limb role swap. A true facing-direction reflection is not
  // representable with one-sided knee and elbow limits, so the planar flip
  // exchanges which limbs lead instead.
  ReferenceClip out = *this;
  out.id = id + "_m";
  auto swap_pair = [](Eigen::VectorXd& v, int a, int b) { std::swap(v[a], v[b]); };
  for (auto& kf : out.keyframes) {
    swap_pair(kf.joint_pos, kHipL, kHipR);
    swap_pair(kf.joint_pos, kKneeL, kKneeR);
    swap_pair(kf.joint_pos, kShoulderL, kShoulderR);
    swap_pair(kf.joint_pos, kElbowL, kElbowR);
    swap_pair(kf.joint_vel, kHipL, kHipR);
    swap_pair(kf.joint_vel, kKneeL, kKneeR);
    swap_pair(kf.joint_vel, kShoulderL, kShoulderR);
    swap_pair(kf.joint_vel, kElbowL, kElbowR);
    kf.link_positions = forward_kinematics(model, kf.base_pos, kf.base_angle, kf.joint_pos).keypoint;
  }
  return out;
}

void ReferenceClip::validate(const HumanoidModel& model, double tol) const {
  if (keyframes.size() < 2) throw std::runtime_error("clip " + id + ": needs >= 2 keyframes");
  for (size_t i = 1; i < keyframes.size(); ++i)
    if (!(keyframes[i].time > keyframes[i - 1].time))
      throw std::runtime_error("clip " + id + ": keyframe times must strictly increase");
  for (const auto& kf : keyframes) {
    const auto fk = forward_kinematics(model, kf.base_pos, kf.base_angle, kf.joint_pos);
    if (kf.link_positions.size() != fk.keypoint.size())
      throw std::runtime_error("clip " + id + ": link count mismatch");
    for (size_t k = 0; k < fk.keypoint.size(); ++k)
      if ((fk.keypoint[k] - kf.link_positions[k]).norm() > tol)
        throw std::runtime_error("clip " + id + ": keyframe link positions inconsistent with FK");
  }
}

namespace {

struct Waypoint {
  double t;
  std::array<double, 8> q;  // hipL kneeL hipR kneeR shL elL shR elR
  double base_angle;
  double base_x;
};

// Hermite interpolation with finite-difference tangents on non-uniform knots.
double spline_eval(const std::vector<double>& ts, const std::vector<double>& vs, double t) {
  const int n = int(ts.size());
  if (t <= ts.front()) return vs.front();
  if (t >= ts.back()) return vs.back();
  int i = 0;
  while (ts[i + 1] < t) ++i;
  const double h = ts[i + 1] - ts[i];
  const double u = (t - ts[i]) / h;
  auto tangent = [&](int k) {
    if (k == 0) return (vs[1] - vs[0]) / (ts[1] - ts[0]);
    if (k == n - 1) return (vs[n - 1] - vs[n - 2]) / (ts[n - 1] - ts[n - 2]);
    return (vs[k + 1] - vs[k - 1]) / (ts[k + 1] - ts[k - 1]);
  };
  const double m0 = tangent(i) * h, m1 = tangent(i + 1) * h;
  const double u2 = u * u, u3 = u2 * u;
  return (2 * u3 - 3 * u2 + 1) * vs[i] + (u3 - 2 * u2 + u) * m0 + (-2 * u3 + 3 * u2) * vs[i + 1] +
         (u3 - u2) * m1;
}

ReferenceClip build_clip(const HumanoidModel& model, ClipStyle style,
                         const std::vector<Waypoint>& wps, double rate = 50.0) {
  const int nj = model.n_joints();
  std::vector<double> ts;
  for (const auto& w : wps) ts.push_back(w.t);
  const double duration = ts.back();
  const int frames = int(std::round(duration * rate)) + 1;
  const double dt = 1.0 / rate;

  // channel splines -> grounded frames
  std::vector<Eigen::VectorXd> qs(frames);
  std::vector<double> angles(frames), xs(frames), zs(frames);
  for (int f = 0; f < frames; ++f) {
    const double t = double(f) * dt;
    Eigen::VectorXd q(nj);
    for (int j = 0; j < nj; ++j) {
      std::vector<double> vs;
      for (const auto& w : wps) vs.push_back(w.q[j]);
      q[j] = std::clamp(spline_eval(ts, vs, t), model.joints[j].q_min, model.joints[j].q_max);
    }
    std::vector<double> va, vx;
    for (const auto& w : wps) {
      va.push_back(w.base_angle);
      vx.push_back(w.base_x);
    }
    const double angle = spline_eval(ts, va, t);
    const double x = spline_eval(ts, vx, t);
    // rest the lowest contact point exactly on the flat authoring ground
    const auto fk = forward_kinematics(model, Vec2(x, 0.0), angle, q);
    double low = 1e300;
    for (int k = 0; k < model.n_links(); ++k) {
      const Eigen::Matrix2d R = rot(fk.link_angle[k]);
      for (const auto& cp : model.links[k].contact_points)
        low = std::min(low, (fk.link_origin[k] + R * cp).y());
    }
    qs[f] = q;
    angles[f] = angle;
    xs[f] = x;
    zs[f] = -low;
  }

  ReferenceClip clip;
  clip.id = clip_style_name(style);
  clip.style = style;
  clip.source_rate = rate;
  clip.keyframes.resize(frames);
  for (int f = 0; f < frames; ++f) {
    Keyframe& kf = clip.keyframes[f];
    kf.time = double(f) * dt;
    kf.joint_pos = qs[f];
    kf.base_pos = Vec2(xs[f], zs[f]);
    kf.base_angle = angles[f];
    const int p = std::max(0, f - 1), nx = std::min(frames - 1, f + 1);
    const double span = double(nx - p) * dt;
    kf.joint_vel = (qs[nx] - qs[p]) / span;
    kf.base_lin_vel = Vec2((xs[nx] - xs[p]) / span, (zs[nx] - zs[p]) / span);
    kf.base_ang_vel = (angles[nx] - angles[p]) / span;
    kf.link_positions = forward_kinematics(model, kf.base_pos, kf.base_angle, kf.joint_pos).keypoint;
  }
  clip.validate(model);
  return clip;
}

}  // namespace

std::vector<ReferenceClip> synthesize_clips(const HumanoidModel& model) {
  std::vector<ReferenceClip> clips;
  const double D0 = 0.25, D1 = -0.10, D2 = -0.25, D3 = -0.10;  // default legs
  const double D4 = 0.30, D5 = 0.35, D6 = -0.30, D7 = 0.35;    // default arms
  const std::array<double, 8> kStand = {D0, D1, D2, D3, D4, D5, D6, D7};
  const double kPi2 = M_PI / 2.0;

  // Lying on the back, head toward -x: crunch, sit up, crouch, rise.
  clips.push_back(build_clip(
      model, ClipStyle::stand_supine,
      {{0.0, {0.05, -0.05, 0.05, -0.05, 0.10, 0.10, 0.10, 0.10}, kPi2, 0.0},
       {0.6, {0.70, -1.00, 0.70, -1.00, -0.20, 0.30, -0.20, 0.30}, 1.45, 0.0},
       {1.2, {1.30, -1.50, 1.30, -1.50, -0.50, 0.80, -0.50, 0.80}, 0.95, 0.05},
       {1.8, {1.55, -1.60, 1.55, -1.60, 0.30, 0.60, 0.30, 0.60}, -0.35, 0.15},
       {2.5, {0.90, -1.00, 0.80, -1.00, 0.40, 0.45, 0.20, 0.45}, -0.12, 0.22},
       {3.1, kStand, 0.0, 0.25},
       {3.6, kStand, 0.0, 0.25}}));

  // Lying face down, head toward +x: push up, feet under, rise.
  clips.push_back(build_clip(
      model, ClipStyle::stand_prone,
      {{0.0, {-0.05, -0.05, -0.05, -0.05, 0.30, 0.60, 0.30, 0.60}, -kPi2, 0.0},
       {0.7, {-0.30, -0.40, -0.30, -0.40, 1.30, 0.70, 1.30, 0.70}, -1.35, 0.0},
       {1.5, {-0.90, -1.20, -0.90, -1.20, 1.50, 0.40, 1.50, 0.40}, -1.05, -0.08},
       {2.3, {1.00, -1.55, 1.00, -1.55, 1.00, 0.50, 1.00, 0.50}, -0.50, -0.12},
       {3.0, {0.80, -0.90, 0.70, -0.90, 0.50, 0.45, 0.35, 0.45}, -0.20, -0.10},
       {3.6, kStand, 0.0, -0.08},
       {4.0, kStand, 0.0, -0.08}}));

  // Side-style recovery: asymmetric limbs, left side leads.
  clips.push_back(build_clip(
      model, ClipStyle::stand_side,
      {{0.0, {0.10, -0.10, 0.00, -0.05, 0.40, 0.30, -0.10, 0.20}, kPi2, 0.0},
       {0.7, {0.90, -1.20, 0.50, -0.80, -0.30, 0.50, 0.40, 0.30}, 1.30, 0.02},
       {1.5, {1.40, -1.55, 1.10, -1.30, -0.40, 0.90, 0.60, 0.50}, 0.70, 0.08},
       {2.2, {1.50, -1.50, 1.30, -1.45, 0.30, 0.60, 0.50, 0.50}, -0.30, 0.15},
       {2.9, {0.85, -0.90, 0.70, -1.00, 0.40, 0.45, 0.00, 0.40}, -0.12, 0.20},
       {3.4, kStand, 0.0, 0.22},
       {3.8, kStand, 0.0, 0.22}}));

  // Standing, pitches forward, catches on hands, back up via all-fours.
  clips.push_back(build_clip(
      model, ClipStyle::fall_forward,
      {{0.0, kStand, 0.0, 0.0},
       {0.5, {0.50, -0.30, 0.40, -0.30, 1.20, 0.30, 1.10, 0.30}, -0.50, 0.10},
       {0.9, {0.90, -0.50, 0.80, -0.50, 1.50, 0.45, 1.45, 0.45}, -1.10, 0.22},
       {1.3, {0.30, -0.60, 0.25, -0.60, 1.55, 0.50, 1.50, 0.50}, -1.45, 0.30},
       {2.2, {-0.50, -1.00, -0.50, -1.00, 1.50, 0.40, 1.50, 0.40}, -1.10, 0.20},
       {3.1, {1.00, -1.55, 1.00, -1.55, 1.00, 0.50, 1.00, 0.50}, -0.50, 0.15},
       {4.0, {0.80, -0.90, 0.70, -0.90, 0.50, 0.45, 0.35, 0.45}, -0.20, 0.20},
       {4.7, kStand, 0.0, 0.25},
       {5.2, kStand, 0.0, 0.25}}));

  // Standing, sits back, rolls to the back, then the supine get-up.
  clips.push_back(build_clip(
      model, ClipStyle::fall_backward,
      {{0.0, kStand, 0.0, 0.0},
       {0.5, {0.80, -1.00, 0.70, -1.00, -0.60, 0.40, -0.70, 0.40}, 0.35, -0.05},
       {0.9, {1.20, -1.40, 1.10, -1.40, -0.90, 0.50, -0.95, 0.50}, 0.80, -0.12},
       {1.4, {0.60, -0.70, 0.60, -0.70, -0.40, 0.30, -0.40, 0.30}, 1.35, -0.20},
       {2.1, {0.70, -1.00, 0.70, -1.00, -0.20, 0.30, -0.20, 0.30}, 1.45, -0.20},
       {2.8, {1.30, -1.50, 1.30, -1.50, -0.50, 0.80, -0.50, 0.80}, 0.95, -0.15},
       {3.5, {1.55, -1.60, 1.55, -1.60, 0.30, 0.60, 0.30, 0.60}, -0.35, -0.05},
       {4.2, {0.90, -1.00, 0.80, -1.00, 0.40, 0.45, 0.20, 0.45}, -0.15, 0.00},
       {4.9, kStand, 0.0, 0.02},
       {5.4, kStand, 0.0, 0.02}}));

  // Sideways collapse: trailing arm braces late, staggered leg recovery.
  clips.push_back(build_clip(
      model, ClipStyle::fall_side,
      {{0.0, kStand, 0.0, 0.0},
       {0.5, {0.60, -0.80, 0.30, -0.50, -0.30, 0.30, 0.60, 0.40}, 0.30, -0.03},
       {1.0, {1.00, -1.30, 0.70, -0.90, -0.80, 0.50, 0.30, 0.60}, 0.90, -0.10},
       {1.6, {0.80, -1.10, 0.60, -0.80, -0.30, 0.40, -0.10, 0.40}, 1.40, -0.15},
       {2.4, {1.35, -1.50, 1.20, -1.40, -0.45, 0.75, -0.30, 0.70}, 0.90, -0.10},
       {3.2, {1.55, -1.60, 1.45, -1.55, 0.30, 0.60, 0.20, 0.55}, -0.30, -0.02},
       {4.0, {0.85, -0.95, 0.75, -1.00, 0.40, 0.45, 0.25, 0.45}, -0.12, 0.03},
       {4.6, kStand, 0.0, 0.05},
       {5.0, kStand, 0.0, 0.05}}));

  // Diagonal recoveries: supine-style with strong left (right) lead.
  clips.push_back(build_clip(
      model, ClipStyle::diag_left,
      {{0.0, {0.15, -0.10, 0.00, -0.05, 0.30, 0.20, 0.00, 0.15}, kPi2, 0.0},
       {0.7, {0.95, -1.25, 0.55, -0.85, -0.40, 0.55, 0.30, 0.35}, 1.35, 0.02},
       {1.4, {1.45, -1.55, 1.05, -1.25, -0.45, 0.85, 0.45, 0.55}, 0.80, 0.08},
       {2.1, {1.55, -1.55, 1.30, -1.45, 0.30, 0.60, 0.45, 0.55}, -0.32, 0.14},
       {2.8, {0.90, -0.95, 0.75, -1.00, 0.40, 0.45, 0.10, 0.42}, -0.12, 0.20},
       {3.4, kStand, 0.0, 0.22},
       {3.8, kStand, 0.0, 0.22}}));

  clips.push_back(build_clip(
      model, ClipStyle::diag_right,
      {{0.0, {0.00, -0.05, 0.15, -0.10, 0.00, 0.15, 0.30, 0.20}, kPi2, 0.0},
       {0.7, {0.55, -0.85, 0.95, -1.25, 0.30, 0.35, -0.40, 0.55}, 1.35, 0.02},
       {1.4, {1.05, -1.25, 1.45, -1.55, 0.45, 0.55, -0.45, 0.85}, 0.80, 0.08},
       {2.1, {1.30, -1.45, 1.55, -1.55, 0.45, 0.55, 0.30, 0.60}, -0.32, 0.14},
       {2.8, {0.75, -1.00, 0.90, -0.95, 0.10, 0.42, 0.40, 0.45}, -0.12, 0.20},
       {3.4, kStand, 0.0, 0.22},
       {3.8, kStand, 0.0, 0.22}}));

  // Deep crouch to stand.
  clips.push_back(build_clip(
      model, ClipStyle::crouch_recover,
      {{0.0, {1.45, -1.55, 1.35, -1.55, 0.50, 0.50, 0.30, 0.50}, -0.35, 0.0},
       {0.8, {0.90, -1.00, 0.80, -1.00, 0.40, 0.45, 0.20, 0.45}, -0.15, 0.04},
       {1.6, kStand, 0.0, 0.06},
       {2.2, kStand, 0.0, 0.06}}));

  return clips;
}

ReferenceClip subsample_keyframes(const ReferenceClip& clip, double rate) {
  if (rate <= 0.0) throw std::invalid_argument("subsample rate must be > 0");
  if (rate > clip.source_rate + 1e-9)
    throw std::invalid_argument("subsample rate exceeds clip source rate");
  const int n = int(clip.keyframes.size());
  std::vector<int> keep;
  const double duration = clip.duration();
  const int count = int(std::floor(duration * rate + 1e-9));
  for (int k = 0; k <= count; ++k) {
    const double t = double(k) / rate;
    int best = 0;
    double best_d = 1e300;
    for (int i = 0; i < n; ++i) {
      const double d = std::abs(clip.keyframes[i].time - t);
      if (d < best_d - 1e-12) {
        best_d = d;
        best = i;
      }
    }
    keep.push_back(best);
  }
  keep.push_back(0);
  keep.push_back(n - 1);
  std::sort(keep.begin(), keep.end());
  keep.erase(std::unique(keep.begin(), keep.end()), keep.end());

  ReferenceClip out;
  out.id = clip.id;
  out.style = clip.style;
  out.source_rate = rate;
  for (int i : keep) out.keyframes.push_back(clip.keyframes[i]);
  return out;
}

Keyframe project_to_terrain(const Keyframe& frame, const Heightfield& hf) {
  double dz = hf.height_at(frame.base_pos.x()) - frame.base_pos.y();  // base as pseudo-link
  for (const auto& p : frame.link_positions)
    dz = std::max(dz, hf.height_at(p.x()) - p.y());
  Keyframe out = frame;
  out.base_pos.y() += dz;
  for (auto& p : out.link_positions) p.y() += dz;
  return out;
}

InitSpec sample_initialization(const std::vector<ReferenceClip>& clips, Rng& rng,
                               const InitSampling& opts, int n_joints) {
  if (clips.empty()) throw std::invalid_argument("sample_initialization: no clips");
  InitSpec spec;
  spec.clip_index = int(rng.uniform_index(clips.size()));
  spec.phase = rng.uniform(0.0, clips[spec.clip_index].duration());
  spec.x_offset = rng.uniform(-opts.x_offset_range, opts.x_offset_range);
  spec.mirror = rng.bernoulli(opts.mirror_prob);
  spec.free_fall = rng.bernoulli(opts.free_fall_prob);
  if (spec.free_fall) {
    spec.free_fall_duration = rng.uniform(opts.free_fall_min, opts.free_fall_max);
    const int n_drop = rng.uniform_int(opts.dropout_min, opts.dropout_max);
    std::vector<int> all(n_joints);
    for (int i = 0; i < n_joints; ++i) all[i] = i;
    for (int i = 0; i < n_drop; ++i) {
      const int j = i + int(rng.uniform_index(uint64_t(n_joints - i)));
      std::swap(all[i], all[j]);
      spec.dropout_joints.push_back(all[i]);
    }
    std::sort(spec.dropout_joints.begin(), spec.dropout_joints.end());
  }
  return spec;
}

double resync_phase(double base_z, const ReferenceClip& clip) {
  if (clip.keyframes.empty()) throw std::invalid_argument("resync_phase: empty clip");
  int best = 0;
  double best_d = 1e300;
  for (int i = 0; i < int(clip.keyframes.size()); ++i) {
    const double d = std::abs(clip.keyframes[i].base_pos.y() - base_z);
    if (d < best_d - 1e-12) {  // strict improvement keeps the earlier frame on ties
      best_d = d;
      best = i;
    }
  }
  return clip.keyframes[best].time;
}

std::vector<Vec2> relative_error(const Keyframe& ref, const HumanoidState& state) {
  if (ref.link_positions.size() != state.link_world_positions.size())
    throw std::invalid_argument("relative_error: link count mismatch");
  const Vec2 ref_root = ref.link_positions[0];
  const Vec2 root = state.link_world_positions[0];
  std::vector<Vec2> err(ref.link_positions.size());
  for (size_t i = 0; i < err.size(); ++i)
    err[i] = (ref.link_positions[i] - ref_root) - (state.link_world_positions[i] - root);
  return err;
}

void ReferenceClip::save(std::ostream& os) const {
  os.precision(17);
  const int nj = keyframes.empty() ? 0 : int(keyframes.front().joint_pos.size());
  const int nl = keyframes.empty() ? 0 : int(keyframes.front().link_positions.size());
  os << id << ' ' << clip_style_name(style) << ' ' << source_rate << ' ' << keyframes.size() << ' '
     << nj << ' ' << nl << '\n';
  for (const auto& kf : keyframes) {
    os << kf.time;
    for (int j = 0; j < nj; ++j) os << ' ' << kf.joint_pos[j];
    for (int j = 0; j < nj; ++j) os << ' ' << kf.joint_vel[j];
    os << ' ' << kf.base_pos.x() << ' ' << kf.base_pos.y() << ' ' << kf.base_angle;
    os << ' ' << kf.base_lin_vel.x() << ' ' << kf.base_lin_vel.y() << ' ' << kf.base_ang_vel;
    for (const auto& p : kf.link_positions) os << ' ' << p.x() << ' ' << p.y();
    os << '\n';
  }
}

ReferenceClip ReferenceClip::load(std::istream& is, const HumanoidModel& model) {
  ReferenceClip clip;
  std::string style;
  size_t n = 0;
  int nj = 0, nl = 0;
  if (!(is >> clip.id >> style >> clip.source_rate >> n >> nj >> nl))
    throw std::runtime_error("clip: bad header");
  clip.style = clip_style_from_name(style);
  clip.keyframes.resize(n);
  for (auto& kf : clip.keyframes) {
    kf.joint_pos.resize(nj);
    kf.joint_vel.resize(nj);
    kf.link_positions.resize(nl);
    is >> kf.time;
    for (int j = 0; j < nj; ++j) is >> kf.joint_pos[j];
    for (int j = 0; j < nj; ++j) is >> kf.joint_vel[j];
    is >> kf.base_pos.x() >> kf.base_pos.y() >> kf.base_angle;
    is >> kf.base_lin_vel.x() >> kf.base_lin_vel.y() >> kf.base_ang_vel;
    for (auto& p : kf.link_positions) is >> p.x() >> p.y();
    if (!is) throw std::runtime_error("clip: truncated keyframe data");
  }
  clip.validate(model);
  return clip;
}

}  // namespace upright

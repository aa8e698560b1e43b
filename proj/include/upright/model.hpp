#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "upright/geom.hpp"

namespace upright {

// Planar kinematic tree. Link frames sit at the proximal joint anchor with
// local +y pointing toward the distal end; the root frame is the pelvis and
// base_angle = 0 means local +y is world up. A joint's rest_angle is the
// child frame rotation relative to the parent at q = 0 (pi for hips and
// shoulders, whose limbs hang opposite the torso axis).

struct LinkSpec {
  std::string name;
  double mass = 1.0;        // kg
  double length = 0.3;      // m, proximal anchor to distal end
  double inertia = 0.01;    // kg m^2 about the COM
  Vec2 com_local{0.0, 0.15};
  Vec2 keypoint_local{0.0, 0.3};      // tracked body point (distal end; pelvis for the root)
  std::vector<Vec2> contact_points;   // in link frame
};

struct JointSpec {
  std::string name;
  int parent = 0;
  int child = 0;
  Vec2 anchor_in_parent{0.0, 0.0};
  double rest_angle = 0.0;
  double q_min = -2.5, q_max = 2.5;   // rad
  double torque_limit = 18.0;         // N m
  double vel_limit = 22.0;            // rad/s
  double kp = 60.0;                   // N m / rad
  double kd = 3.0;                    // N m s / rad
};

struct HumanoidModel {
  std::vector<LinkSpec> links;    // links[0] is the root; link k>0 is joints[k-1].child
  std::vector<JointSpec> joints;
  Eigen::VectorXd default_pose;   // rad, one per joint
  Vec2 head_offset{0.0, 0.65};    // in root frame
  double action_scale = 0.25;
  double action_clip = 6.0;
  bool fixed_base = false;        // pinned root (test mechanisms)

  int n_joints() const { return int(joints.size()); }
  int n_links() const { return int(links.size()); }
  int dof() const { return (fixed_base ? 0 : 3) + n_joints(); }

  double total_mass() const;
  // Throws std::invalid_argument with every violation listed.
  void validate() const;

  // Ancestor joint indices per link, root to leaf, precomputed by validate()
  // callers via this helper.
  std::vector<std::vector<int>> ancestor_joints() const;

  std::string to_json() const;
  static HumanoidModel from_json(const std::string& text);
};

// The default planar humanoid: torso with head point, two legs
// (hip + knee) and two arms (shoulder + elbow); 9 links, 8 actuated joints.
// Left and right limbs are geometrically identical so mirror flips are exact.
HumanoidModel default_humanoid();

// Joint index layout of default_humanoid(); clip authoring and mirroring
// rely on it.
enum JointIx { kHipL = 0, kKneeL, kHipR, kKneeR, kShoulderL, kElbowL, kShoulderR, kElbowR };
enum LinkIx {
  kTorso = 0,
  kThighL,
  kShinL,
  kThighR,
  kShinR,
  kUpperArmL,
  kForearmL,
  kUpperArmR,
  kForearmR
};

// Nominal standing head height: FK of the default pose with feet on flat
// ground. Used by the standing detector and post-recovery reward.
double nominal_head_height(const HumanoidModel& model);

}  // namespace upright

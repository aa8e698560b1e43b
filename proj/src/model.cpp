#include "upright/model.hpp"

#include <nlohmann/json.hpp>
#include <sstream>
#include <stdexcept>

#include "upright/physics.hpp"

namespace upright {

using nlohmann::json;

double HumanoidModel::total_mass() const {
  double m = 0.0;
  for (const auto& l : links) m += l.mass;
  return m;
}

void HumanoidModel::validate() const {
  std::ostringstream errs;
  if (links.empty()) errs << "model has no links\n";
  if (int(joints.size()) != n_links() - 1) errs << "joint count must be n_links - 1 (tree)\n";
  for (int i = 0; i < n_links(); ++i) {
    if (links[i].mass <= 0.0) errs << "link " << links[i].name << ": mass must be > 0\n";
    if (links[i].length <= 0.0) errs << "link " << links[i].name << ": length must be > 0\n";
    if (links[i].inertia <= 0.0) errs << "link " << links[i].name << ": inertia must be > 0\n";
  }
  std::vector<int> in_degree(n_links(), 0);
  for (int j = 0; j < n_joints(); ++j) {
    const auto& jt = joints[j];
    if (jt.child != j + 1) errs << "joint " << jt.name << ": child must be link " << j + 1 << "\n";
    if (jt.parent < 0 || jt.parent >= n_links() || jt.parent >= jt.child)
      errs << "joint " << jt.name << ": parent must precede child\n";
    else
      in_degree[jt.child]++;
    if (!(jt.q_min < jt.q_max)) errs << "joint " << jt.name << ": q_min must be < q_max\n";
    if (jt.torque_limit <= 0.0) errs << "joint " << jt.name << ": torque_limit must be > 0\n";
    if (jt.vel_limit <= 0.0) errs << "joint " << jt.name << ": vel_limit must be > 0\n";
  }
  for (int i = 1; i < n_links(); ++i)
    if (in_degree[i] != 1) errs << "link " << links[i].name << ": must have exactly one parent\n";
  if (default_pose.size() != n_joints()) errs << "default_pose width must equal joint count\n";
  const std::string s = errs.str();
  if (!s.empty()) throw std::invalid_argument("invalid humanoid model:\n" + s);
}

std::vector<std::vector<int>> HumanoidModel::ancestor_joints() const {
  std::vector<std::vector<int>> anc(n_links());
  for (int j = 0; j < n_joints(); ++j) {
    const int child = joints[j].child;
    anc[child] = anc[joints[j].parent];
    anc[child].push_back(j);
  }
  return anc;
}

HumanoidModel default_humanoid() {
  HumanoidModel m;
  const double torso_len = 0.55, torso_half_w = 0.13;
  const double thigh_len = 0.40, shin_len = 0.40, uarm_len = 0.38, farm_len = 0.38;

  auto limb = [](const std::string& name, double mass, double len) {
    LinkSpec l;
    l.name = name;
    l.mass = mass;
    l.length = len;
    l.inertia = mass * len * len / 12.0;
    l.com_local = Vec2(0.0, len / 2.0);
    l.keypoint_local = Vec2(0.0, len);
    l.contact_points = {Vec2(0.0, len)};
    return l;
  };

  LinkSpec torso;
  torso.name = "torso";
  torso.mass = 2.2;
  torso.length = torso_len;
  torso.inertia = torso.mass * (torso_len * torso_len + 4.0 * torso_half_w * torso_half_w) / 12.0;
  torso.com_local = Vec2(0.0, torso_len / 2.0);
  torso.keypoint_local = Vec2(0.0, 0.0);  // pelvis; the root-relative frame anchors here
  torso.contact_points = {Vec2(-torso_half_w, 0.0), Vec2(torso_half_w, 0.0),
                          Vec2(-torso_half_w, torso_len), Vec2(torso_half_w, torso_len),
                          Vec2(0.0, 0.65)};  // pelvis corners, shoulder corners, head
  m.links.push_back(torso);
  m.links.push_back(limb("thigh_l", 1.10, thigh_len));
  m.links.push_back(limb("shin_l", 0.95, shin_len));
  m.links.push_back(limb("thigh_r", 1.10, thigh_len));
  m.links.push_back(limb("shin_r", 0.95, shin_len));
  m.links.push_back(limb("uarm_l", 0.85, uarm_len));
  m.links.push_back(limb("farm_l", 0.80, farm_len));
  m.links.push_back(limb("uarm_r", 0.85, uarm_len));
  m.links.push_back(limb("farm_r", 0.80, farm_len));

  auto joint = [](const std::string& name, int parent, int child, Vec2 anchor, double rest,
                  double q_min, double q_max) {
    JointSpec j;
    j.name = name;
    j.parent = parent;
    j.child = child;
    j.anchor_in_parent = anchor;
    j.rest_angle = rest;
    j.q_min = q_min;
    j.q_max = q_max;
    return j;
  };

  const Vec2 pelvis(0.0, 0.0), shoulder(0.0, torso_len);
  m.joints.push_back(joint("hip_l", kTorso, kThighL, pelvis, M_PI, -2.6, 2.6));
  m.joints.push_back(joint("knee_l", kThighL, kShinL, Vec2(0.0, thigh_len), 0.0, -2.5, 0.05));
  m.joints.push_back(joint("hip_r", kTorso, kThighR, pelvis, M_PI, -2.6, 2.6));
  m.joints.push_back(joint("knee_r", kThighR, kShinR, Vec2(0.0, thigh_len), 0.0, -2.5, 0.05));
  m.joints.push_back(joint("shoulder_l", kTorso, kUpperArmL, shoulder, M_PI, -3.0, 3.0));
  m.joints.push_back(joint("elbow_l", kUpperArmL, kForearmL, Vec2(0.0, uarm_len), 0.0, -0.05, 2.6));
  m.joints.push_back(joint("shoulder_r", kTorso, kUpperArmR, shoulder, M_PI, -3.0, 3.0));
  m.joints.push_back(joint("elbow_r", kUpperArmR, kForearmR, Vec2(0.0, uarm_len), 0.0, -0.05, 2.6));

  m.default_pose.resize(8);
  // split stance: left leg/arm forward, right back, knees and elbows soft
  m.default_pose << 0.25, -0.10, -0.25, -0.10, 0.30, 0.35, -0.30, 0.35;
  m.head_offset = Vec2(0.0, 0.65);
  m.validate();
  return m;
}

double nominal_head_height(const HumanoidModel& model) {
  HumanoidState s = make_state(model, Vec2(0.0, 2.0), 0.0, model.default_pose);
  double lowest = 1e300;
  const auto fk = forward_kinematics(model, s.base_position, s.base_angle, s.joint_pos);
  for (int k = 0; k < model.n_links(); ++k) {
    const Eigen::Matrix2d R = rot(fk.link_angle[k]);
    for (const auto& cp : model.links[k].contact_points)
      lowest = std::min(lowest, (fk.link_origin[k] + R * cp).y());
  }
  return head_height(s, model) - lowest;  // head clearance with feet on the ground
}

namespace {

json vec2_json(const Vec2& v) { return json::array({v.x(), v.y()}); }
Vec2 vec2_from(const json& j) { return Vec2(j.at(0).get<double>(), j.at(1).get<double>()); }

}  // namespace

std::string HumanoidModel::to_json() const {
  json j;
  for (const auto& l : links) {
    json lj{{"name", l.name},        {"mass", l.mass},
            {"length", l.length},    {"inertia", l.inertia},
            {"com", vec2_json(l.com_local)}, {"keypoint", vec2_json(l.keypoint_local)}};
    json cps = json::array();
    for (const auto& c : l.contact_points) cps.push_back(vec2_json(c));
    lj["contact_points"] = cps;
    j["links"].push_back(lj);
  }
  for (const auto& jt : joints) {
    j["joints"].push_back(json{{"name", jt.name},
                               {"parent", jt.parent},
                               {"child", jt.child},
                               {"anchor", vec2_json(jt.anchor_in_parent)},
                               {"rest_angle", jt.rest_angle},
                               {"q_min", jt.q_min},
                               {"q_max", jt.q_max},
                               {"torque_limit", jt.torque_limit},
                               {"vel_limit", jt.vel_limit},
                               {"kp", jt.kp},
                               {"kd", jt.kd}});
  }
  j["default_pose"] = std::vector<double>(default_pose.data(), default_pose.data() + default_pose.size());
  j["head_offset"] = vec2_json(head_offset);
  j["action_scale"] = action_scale;
  j["action_clip"] = action_clip;
  j["fixed_base"] = fixed_base;
  return j.dump(2);
}

HumanoidModel HumanoidModel::from_json(const std::string& text) {
  const json j = json::parse(text);
  HumanoidModel m;
  for (const auto& lj : j.at("links")) {
    LinkSpec l;
    l.name = lj.at("name").get<std::string>();
    l.mass = lj.at("mass").get<double>();
    l.length = lj.at("length").get<double>();
    l.inertia = lj.at("inertia").get<double>();
    l.com_local = vec2_from(lj.at("com"));
    l.keypoint_local = vec2_from(lj.at("keypoint"));
    for (const auto& c : lj.at("contact_points")) l.contact_points.push_back(vec2_from(c));
    m.links.push_back(l);
  }
  for (const auto& jj : j.at("joints")) {
    JointSpec jt;
    jt.name = jj.at("name").get<std::string>();
    jt.parent = jj.at("parent").get<int>();
    jt.child = jj.at("child").get<int>();
    jt.anchor_in_parent = vec2_from(jj.at("anchor"));
    jt.rest_angle = jj.at("rest_angle").get<double>();
    jt.q_min = jj.at("q_min").get<double>();
    jt.q_max = jj.at("q_max").get<double>();
    jt.torque_limit = jj.at("torque_limit").get<double>();
    jt.vel_limit = jj.at("vel_limit").get<double>();
    jt.kp = jj.at("kp").get<double>();
    jt.kd = jj.at("kd").get<double>();
    m.joints.push_back(jt);
  }
  const auto pose = j.at("default_pose").get<std::vector<double>>();
  m.default_pose = Eigen::Map<const Eigen::VectorXd>(pose.data(), long(pose.size()));
  m.head_offset = vec2_from(j.at("head_offset"));
  m.action_scale = j.at("action_scale").get<double>();
  m.action_clip = j.at("action_clip").get<double>();
  m.fixed_base = j.value("fixed_base", false);
  m.validate();
  return m;
}

}  // namespace upright

#pragma once

#include <Eigen/Core>
#include <stdexcept>
#include <string>
#include <vector>

#include "upright/model.hpp"
#include "upright/terrain.hpp"

namespace upright {

struct HumanoidState {
  Vec2 base_position{0.0, 0.0};
  double base_angle = 0.0;
  Vec2 base_lin_vel{0.0, 0.0};
  double base_ang_vel = 0.0;
  Eigen::VectorXd joint_pos;
  Eigen::VectorXd joint_vel;
  std::vector<Vec2> link_world_positions;  // keypoint per link, consistent with FK
  double time = 0.0;
};

struct Contact {
  Vec2 position{0.0, 0.0};
  double normal_force = 0.0;   // >= 0
  double tangent_force = 0.0;  // |f_t| <= mu * f_n
  double penetration = 0.0;    // m, vertical
  int link = 0;
};
using ContactSet = std::vector<Contact>;

struct ContactParams {
  double stiffness = 2.0e4;        // N/m
  double damping = 200.0;          // N s/m
  double tangent_damping = 200.0;  // N s/m, capped by the Coulomb cone
  double friction = 1.0;           // mu
  double max_surface_slope = 1.5;  // contact normal slope clamp
  double restitution = 0.0;        // share of approach speed returned as exit speed
};

struct SimulationDiverged : std::runtime_error {
  explicit SimulationDiverged(const std::string& what) : std::runtime_error(what) {}
};

// Forward kinematics, usable standalone as a test oracle.
struct FkResult {
  std::vector<double> link_angle;   // world frame rotation per link
  std::vector<Vec2> link_origin;    // proximal anchor world position
  std::vector<Vec2> keypoint;       // model keypoint per link
};
FkResult forward_kinematics(const HumanoidModel& model, const Vec2& base_pos, double base_angle,
                            const Eigen::VectorXd& q);

HumanoidState make_state(const HumanoidModel& model, const Vec2& base_pos, double base_angle,
                         const Eigen::VectorXd& q);

// a -> q_default + scale * clamp(a, -clip, clip)
Eigen::VectorXd action_to_targets(const Eigen::VectorXd& a, const HumanoidModel& model,
                                  double scale, double clip);

// tau_i = kp_i (q_des_i - q_i) - kd_i qdot_i, clamped to the joint torque limit
Eigen::VectorXd pd_torques(const Eigen::VectorXd& q_des, const HumanoidState& state,
                           const HumanoidModel& model);

// Unit gravity direction in the base frame.
Vec2 projected_gravity(double base_angle);

double head_height(const HumanoidState& state, const HumanoidModel& model);
Vec2 head_position(const HumanoidState& state, const HumanoidModel& model);

double total_energy(const HumanoidModel& model, const HumanoidState& state);
Vec2 linear_momentum(const HumanoidModel& model, const HumanoidState& state);

// Reduced-coordinate dynamics for one humanoid instance. The model copy is
// private so per-environment dynamics randomization never aliases.
class PhysicsWorld {
 public:
  explicit PhysicsWorld(const HumanoidModel& model, ContactParams contact = {});

  // Advances by dt_control using `substeps` symplectic sub-iterations with
  // the given actuation torques held constant. Composite mass matrix and
  // contact penalty forces are reassembled every substep; throws
  // SimulationDiverged if the state leaves the finite range.
  std::pair<HumanoidState, ContactSet> step(const HumanoidState& state,
                                            const Eigen::VectorXd& torques,
                                            const Heightfield& terrain, double dt_control = 0.02,
                                            int substeps = 4) const;

  const HumanoidModel& model() const { return model_; }
  HumanoidModel& mutable_model() { return model_; }
  ContactParams& contact_params() { return contact_; }
  const ContactParams& contact_params() const { return contact_; }

  // Joint-limit spring/damper applied inside the integrator.
  double limit_stiffness = 200.0;  // N m / rad
  double limit_damping = 2.0;      // N m s / rad
  double joint_damping = 0.02;     // bearing viscosity, N m s / rad

 private:
  HumanoidModel model_;
  ContactParams contact_;
  std::vector<std::vector<int>> ancestors_;
};

}  // namespace upright

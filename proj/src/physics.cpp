#include "upright/physics.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <sstream>

namespace upright {

namespace {
constexpr double kGravity = 9.81;
}

FkResult forward_kinematics(const HumanoidModel& model, const Vec2& base_pos, double base_angle,
                            const Eigen::VectorXd& q) {
  FkResult fk;
  const int n = model.n_links();
  fk.link_angle.resize(n);
  fk.link_origin.resize(n);
  fk.keypoint.resize(n);
  fk.link_angle[0] = base_angle;
  fk.link_origin[0] = base_pos;
  for (int j = 0; j < model.n_joints(); ++j) {
    const auto& jt = model.joints[j];
    const Vec2 anchor =
        fk.link_origin[jt.parent] + rot(fk.link_angle[jt.parent]) * jt.anchor_in_parent;
    fk.link_angle[jt.child] = fk.link_angle[jt.parent] + jt.rest_angle + q[j];
    fk.link_origin[jt.child] = anchor;
  }
  for (int k = 0; k < n; ++k)
    fk.keypoint[k] = fk.link_origin[k] + rot(fk.link_angle[k]) * model.links[k].keypoint_local;
  return fk;
}

HumanoidState make_state(const HumanoidModel& model, const Vec2& base_pos, double base_angle,
                         const Eigen::VectorXd& q) {
  HumanoidState s;
  s.base_position = base_pos;
  s.base_angle = base_angle;
  s.joint_pos = q;
  s.joint_vel = Eigen::VectorXd::Zero(model.n_joints());
  s.link_world_positions = forward_kinematics(model, base_pos, base_angle, q).keypoint;
  return s;
}

Eigen::VectorXd action_to_targets(const Eigen::VectorXd& a, const HumanoidModel& model,
                                  double scale, double clip) {
  if (a.size() != model.n_joints())
    throw std::invalid_argument("action width " + std::to_string(a.size()) +
                                " != joint count " + std::to_string(model.n_joints()));
  Eigen::VectorXd out(a.size());
  for (int i = 0; i < a.size(); ++i)
    out[i] = model.default_pose[i] + scale * std::clamp(a[i], -clip, clip);
  return out;
}

Eigen::VectorXd pd_torques(const Eigen::VectorXd& q_des, const HumanoidState& state,
                           const HumanoidModel& model) {
  if (q_des.size() != model.n_joints() || state.joint_pos.size() != model.n_joints())
    throw std::invalid_argument("pd_torques: dimension mismatch");
  Eigen::VectorXd tau(model.n_joints());
  for (int i = 0; i < model.n_joints(); ++i) {
    const auto& jt = model.joints[i];
    const double raw = jt.kp * (q_des[i] - state.joint_pos[i]) - jt.kd * state.joint_vel[i];
    tau[i] = std::clamp(raw, -jt.torque_limit, jt.torque_limit);
  }
  return tau;
}

Vec2 projected_gravity(double base_angle) {
  return Vec2(-std::sin(base_angle), -std::cos(base_angle));
}

Vec2 head_position(const HumanoidState& state, const HumanoidModel& model) {
  return state.base_position + rot(state.base_angle) * model.head_offset;
}

double head_height(const HumanoidState& state, const HumanoidModel& model) {
  return head_position(state, model).y();
}

namespace {

// Per-link spatial quantities shared by the mass matrix, bias and contact
// assembly of one substep.
struct LinkKin {
  double angle, omega;
  Vec2 origin, v_origin;
  Vec2 a0_origin;  // convective acceleration (qdd = 0)
  Vec2 com, v_com, a0_com;
};

struct Scratch {
  std::vector<LinkKin> kin;
  Eigen::MatrixXd M;
  Eigen::VectorXd rhs, qdd, vel;
};

}  // namespace

double total_energy(const HumanoidModel& model, const HumanoidState& state) {
  const auto fk = forward_kinematics(model, state.base_position, state.base_angle, state.joint_pos);
  const auto anc = model.ancestor_joints();
  double e = 0.0;
  // recompute per-link velocities from the generalized state
  std::vector<double> omega(model.n_links());
  std::vector<Vec2> v_origin(model.n_links());
  omega[0] = state.base_ang_vel;
  v_origin[0] = state.base_lin_vel;
  for (int j = 0; j < model.n_joints(); ++j) {
    const auto& jt = model.joints[j];
    const Vec2 anchor = fk.link_origin[jt.child];
    v_origin[jt.child] =
        v_origin[jt.parent] + omega[jt.parent] * perp(anchor - fk.link_origin[jt.parent]);
    omega[jt.child] = omega[jt.parent] + state.joint_vel[j];
  }
  for (int k = 0; k < model.n_links(); ++k) {
    const auto& l = model.links[k];
    const Vec2 com = fk.link_origin[k] + rot(fk.link_angle[k]) * l.com_local;
    const Vec2 v_com = v_origin[k] + omega[k] * perp(com - fk.link_origin[k]);
    e += 0.5 * l.mass * v_com.squaredNorm() + 0.5 * l.inertia * omega[k] * omega[k] +
         l.mass * kGravity * com.y();
  }
  return e;
}

Vec2 linear_momentum(const HumanoidModel& model, const HumanoidState& state) {
  const auto fk = forward_kinematics(model, state.base_position, state.base_angle, state.joint_pos);
  std::vector<double> omega(model.n_links());
  std::vector<Vec2> v_origin(model.n_links());
  omega[0] = state.base_ang_vel;
  v_origin[0] = state.base_lin_vel;
  Vec2 p(0.0, 0.0);
  for (int j = 0; j < model.n_joints(); ++j) {
    const auto& jt = model.joints[j];
    v_origin[jt.child] =
        v_origin[jt.parent] + omega[jt.parent] * perp(fk.link_origin[jt.child] - fk.link_origin[jt.parent]);
    omega[jt.child] = omega[jt.parent] + state.joint_vel[j];
  }
  for (int k = 0; k < model.n_links(); ++k) {
    const auto& l = model.links[k];
    const Vec2 com = fk.link_origin[k] + rot(fk.link_angle[k]) * l.com_local;
    p += l.mass * (v_origin[k] + omega[k] * perp(com - fk.link_origin[k]));
  }
  return p;
}

PhysicsWorld::PhysicsWorld(const HumanoidModel& model, ContactParams contact)
    : model_(model), contact_(contact) {
  model_.validate();
  ancestors_ = model_.ancestor_joints();
}

std::pair<HumanoidState, ContactSet> PhysicsWorld::step(const HumanoidState& state,
                                                        const Eigen::VectorXd& torques,
                                                        const Heightfield& terrain,
                                                        double dt_control, int substeps) const {
  const int nj = model_.n_joints();
  const int nl = model_.n_links();
  if (torques.size() != nj) throw std::invalid_argument("step: torque width mismatch");
  if (!torques.allFinite()) throw std::invalid_argument("step: non-finite torques");
  const bool floating = !model_.fixed_base;
  const int dof = model_.dof();
  const int jbase = floating ? 3 : 0;  // first joint column
  const double h = dt_control / double(substeps);

  HumanoidState s = state;
  ContactSet contacts;

  Eigen::MatrixXd M(dof, dof);
  Eigen::VectorXd rhs(dof), vel(dof);
  std::vector<LinkKin> kin(nl);
  // Jacobian of one attached point: columns for base dofs + ancestor joints.
  // Held flat; only ancestor columns are touched per link.
  Eigen::Matrix<double, 2, Eigen::Dynamic> J(2, dof);

  for (int sub = 0; sub < substeps; ++sub) {
    // kinematics sweep
    kin[0].angle = s.base_angle;
    kin[0].origin = s.base_position;
    kin[0].omega = floating ? s.base_ang_vel : 0.0;
    kin[0].v_origin = floating ? s.base_lin_vel : Vec2(0.0, 0.0);
    kin[0].a0_origin = Vec2(0.0, 0.0);
    for (int j = 0; j < nj; ++j) {
      const auto& jt = model_.joints[j];
      const LinkKin& p = kin[jt.parent];
      LinkKin& c = kin[jt.child];
      const Vec2 r = rot(p.angle) * jt.anchor_in_parent;
      c.origin = p.origin + r;
      c.v_origin = p.v_origin + p.omega * perp(r);
      c.a0_origin = p.a0_origin - p.omega * p.omega * r;
      c.angle = p.angle + jt.rest_angle + s.joint_pos[j];
      c.omega = p.omega + s.joint_vel[j];
    }
    for (int k = 0; k < nl; ++k) {
      LinkKin& lk = kin[k];
      const Vec2 rc = rot(lk.angle) * model_.links[k].com_local;
      lk.com = lk.origin + rc;
      lk.v_com = lk.v_origin + lk.omega * perp(rc);
      lk.a0_com = lk.a0_origin - lk.omega * lk.omega * rc;
    }

    M.setZero();
    rhs.setZero();

    // actuation, joint limits, bearing damping
    for (int j = 0; j < nj; ++j) {
      const auto& jt = model_.joints[j];
      double tau = torques[j] - joint_damping * s.joint_vel[j];
      const double q = s.joint_pos[j];
      if (q > jt.q_max)
        tau += -limit_stiffness * (q - jt.q_max) - limit_damping * std::max(0.0, s.joint_vel[j]);
      else if (q < jt.q_min)
        tau += -limit_stiffness * (q - jt.q_min) - limit_damping * std::min(0.0, s.joint_vel[j]);
      rhs[jbase + j] += tau;
    }

    // per-link mass matrix and bias/gravity terms
    for (int k = 0; k < nl; ++k) {
      const auto& l = model_.links[k];
      const LinkKin& lk = kin[k];
      const auto& anc = ancestors_[k];
      J.setZero();
      if (floating) {
        J(0, 0) = 1.0;
        J(1, 1) = 1.0;
        const Vec2 pb = perp(lk.com - s.base_position);
        J(0, 2) = pb.x();
        J(1, 2) = pb.y();
      }
      for (int aj : anc) {
        const Vec2 pa = perp(lk.com - kin[model_.joints[aj].child].origin);
        J(0, jbase + aj) = pa.x();
        J(1, jbase + aj) = pa.y();
      }
      // columns with angular contribution: base angle + ancestors
      const Vec2 f = l.mass * (Vec2(0.0, -kGravity) - lk.a0_com);
      // accumulate M += m J^T J + I jw^T jw over the sparse column set
      auto add_cols = [&](int ci, int cj) {
        M(ci, cj) += l.mass * (J(0, ci) * J(0, cj) + J(1, ci) * J(1, cj));
      };
      std::array<int, 16> cols;
      int nc = 0;
      if (floating) {
        cols[nc++] = 0;
        cols[nc++] = 1;
        cols[nc++] = 2;
      }
      for (int aj : anc) cols[nc++] = jbase + aj;
      for (int a = 0; a < nc; ++a) {
        rhs[cols[a]] += J(0, cols[a]) * f.x() + J(1, cols[a]) * f.y();
        for (int b = a; b < nc; ++b) add_cols(cols[a], cols[b]);
      }
      // rotational inertia couples every pair of angular columns (jw = 1)
      int first_ang = floating ? 2 : -1;
      std::array<int, 16> acols;
      int na = 0;
      if (first_ang >= 0) acols[na++] = 2;
      for (int aj : anc) acols[na++] = jbase + aj;
      for (int a = 0; a < na; ++a)
        for (int b = a; b < na; ++b) M(acols[a], acols[b]) += l.inertia;
    }

    // Factor the contact-free mass matrix first: the penalty forces below
    // are bounded by per-contact stopping impulses, which need M^-1.
    const auto ldlt = M.selfadjointView<Eigen::Upper>().ldlt();

    // contact penalties
    const bool last_sub = (sub == substeps - 1);
    if (last_sub) contacts.clear();
    Eigen::VectorXd jtn(dof), jtt(dof);
    for (int k = 0; k < nl; ++k) {
      const auto& l = model_.links[k];
      const LinkKin& lk = kin[k];
      const Eigen::Matrix2d R = rot(lk.angle);
      for (const auto& cp_local : l.contact_points) {
        const Vec2 rc = R * cp_local;
        const Vec2 p = lk.origin + rc;
        const double ground = terrain.height_at(p.x());
        const double pen = ground - p.y();
        if (pen <= 0.0) continue;
        const Vec2 v = lk.v_origin + lk.omega * perp(rc);
        double slope = std::clamp(terrain.slope_at(p.x()), -contact_.max_surface_slope,
                                  contact_.max_surface_slope);
        const double inv_len = 1.0 / std::sqrt(1.0 + slope * slope);
        const Vec2 n(-slope * inv_len, inv_len);
        const Vec2 t(inv_len, slope * inv_len);
        const double vn = n.dot(v);
        const double vt = t.dot(v);

        // point Jacobian transposed against n and t (sparse columns)
        jtn.setZero();
        jtt.setZero();
        if (floating) {
          jtn[0] = n.x();
          jtn[1] = n.y();
          jtn[2] = perp(p - s.base_position).dot(n);
          jtt[0] = t.x();
          jtt[1] = t.y();
          jtt[2] = perp(p - s.base_position).dot(t);
        }
        for (int aj : ancestors_[k]) {
          const Vec2 pa = perp(p - kin[model_.joints[aj].child].origin);
          jtn[jbase + aj] = pa.dot(n);
          jtt[jbase + aj] = pa.dot(t);
        }
        const double wn = jtn.dot(ldlt.solve(jtn));  // inverse effective mass
        const double wt = jtt.dot(ldlt.solve(jtt));
        const double m_eff_n = wn > 1e-12 ? 1.0 / wn : 0.0;
        const double m_eff_t = wt > 1e-12 ? 1.0 / wt : 0.0;

        // spring-damper capped by the stopping impulse: the normal force may
        // cancel the approach velocity and push out at pen/(4h) (plus the
        // configured restitution share), never more
        const double want_fn = contact_.stiffness * pen * n.y() - contact_.damping * vn;
        const double exit_vel = 0.25 * pen / h + contact_.restitution * std::max(0.0, -vn);
        const double fn_cap = m_eff_n / h * std::max(0.0, exit_vel - vn);
        const double fn = std::clamp(want_fn, 0.0, fn_cap);
        const double cone = contact_.friction * fn;
        const double stop_ft = m_eff_t / h * std::abs(vt);
        const double ft = std::clamp(-contact_.tangent_damping * vt,
                                     -std::min(cone, stop_ft), std::min(cone, stop_ft));
        rhs += fn * jtn + ft * jtt;
        if (last_sub) contacts.push_back({p, fn, ft, pen, k});
      }
    }

    const Eigen::VectorXd qdd = ldlt.solve(rhs);

    // velocity kick then average-velocity position update (exact on
    // ballistic segments, symplectic flavor elsewhere)
    vel.setZero();
    if (floating) {
      vel[0] = s.base_lin_vel.x();
      vel[1] = s.base_lin_vel.y();
      vel[2] = s.base_ang_vel;
    }
    for (int j = 0; j < nj; ++j) vel[jbase + j] = s.joint_vel[j];
    const Eigen::VectorXd vel_new = vel + h * qdd;
    const Eigen::VectorXd dx = 0.5 * h * (vel + vel_new);
    if (floating) {
      s.base_lin_vel = Vec2(vel_new[0], vel_new[1]);
      s.base_ang_vel = vel_new[2];
      s.base_position += Vec2(dx[0], dx[1]);
      s.base_angle += dx[2];
    }
    for (int j = 0; j < nj; ++j) {
      s.joint_vel[j] = vel_new[jbase + j];
      s.joint_pos[j] += dx[jbase + j];
    }
  }

  s.time = state.time + dt_control;
  s.link_world_positions =
      forward_kinematics(model_, s.base_position, s.base_angle, s.joint_pos).keypoint;

  auto check = [&](double v, const char* what) {
    if (!std::isfinite(v) || std::abs(v) > 1e6) {
      std::ostringstream os;
      os << "simulation diverged: " << what << " = " << v << " at t = " << s.time;
      throw SimulationDiverged(os.str());
    }
  };
  check(s.base_position.x(), "base x");
  check(s.base_position.y(), "base z");
  check(s.base_angle, "base angle");
  check(s.base_lin_vel.x(), "base vx");
  check(s.base_lin_vel.y(), "base vz");
  check(s.base_ang_vel, "base omega");
  for (int j = 0; j < nj; ++j) {
    check(s.joint_pos[j], model_.joints[j].name.c_str());
    check(s.joint_vel[j], model_.joints[j].name.c_str());
  }
  return {std::move(s), std::move(contacts)};
}

}  // namespace upright

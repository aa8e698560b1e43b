#include "upright/episode_log.hpp"

#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace upright {

// Step line layout:
//   time phase standing_instant standing_sustained
//   base(x z angle vx vz omega) nj q[..] qd[..]
//   nl kp[x z ..] action[..] torques[..]
//   head_height ground_under_head
//   20 reward values, total
//   nerr err[x z ..]
//   nc contacts(x z fn ft pen link)...
void EpisodeLog::save(std::ostream& os) const {
  os.precision(17);
  os << "# upright-episode v1\n";
  os << "# clip " << clip_id << " mirrored " << int(mirrored) << '\n';
  os << "# terrain " << terrain_family << ' ' << terrain_difficulty << ' ' << terrain_seed << '\n';
  os << "# seed " << seed << " dt " << dt << " horizon " << horizon << " digest " << config_digest
     << '\n';
  os << "# diverged " << int(diverged) << ' ' << (diverged ? divergence_reason : std::string("-"))
     << '\n';
  os << "# steps " << steps.size() << '\n';
  for (const auto& s : steps) {
    os << s.time << ' ' << s.phase << ' ' << int(s.standing_instant) << ' '
       << int(s.standing_sustained);
    os << ' ' << s.state.base_position.x() << ' ' << s.state.base_position.y() << ' '
       << s.state.base_angle << ' ' << s.state.base_lin_vel.x() << ' ' << s.state.base_lin_vel.y()
       << ' ' << s.state.base_ang_vel;
    os << ' ' << s.state.joint_pos.size();
    for (int j = 0; j < s.state.joint_pos.size(); ++j) os << ' ' << s.state.joint_pos[j];
    for (int j = 0; j < s.state.joint_vel.size(); ++j) os << ' ' << s.state.joint_vel[j];
    os << ' ' << s.state.link_world_positions.size();
    for (const auto& p : s.state.link_world_positions) os << ' ' << p.x() << ' ' << p.y();
    for (int j = 0; j < s.action.size(); ++j) os << ' ' << s.action[j];
    for (int j = 0; j < s.torques.size(); ++j) os << ' ' << s.torques[j];
    os << ' ' << s.head_height << ' ' << s.ground_under_head;
    for (int i = 0; i < kNumRewardTerms; ++i) os << ' ' << s.reward.value[i];
    os << ' ' << s.reward.total;
    os << ' ' << s.reference_error.size();
    for (const auto& e : s.reference_error) os << ' ' << e.x() << ' ' << e.y();
    os << ' ' << s.contacts.size();
    for (const auto& c : s.contacts)
      os << ' ' << c.position.x() << ' ' << c.position.y() << ' ' << c.normal_force << ' '
         << c.tangent_force << ' ' << c.penetration << ' ' << c.link;
    os << '\n';
  }
}

EpisodeLog EpisodeLog::load(std::istream& is) {
  EpisodeLog log;
  std::string line;
  auto expect = [&](const std::string& tag) {
    if (!std::getline(is, line) || line.rfind(tag, 0) != 0)
      throw std::runtime_error("episode log: expected '" + tag + "'");
    return std::istringstream(line.substr(tag.size()));
  };
  expect("# upright-episode v1");
  {
    auto ss = expect("# clip ");
    int m = 0;
    std::string kw;
    ss >> log.clip_id >> kw >> m;
    log.mirrored = m != 0;
  }
  {
    auto ss = expect("# terrain ");
    ss >> log.terrain_family >> log.terrain_difficulty >> log.terrain_seed;
  }
  {
    auto ss = expect("# seed ");
    std::string kw;
    ss >> log.seed >> kw >> log.dt >> kw >> log.horizon >> kw >> log.config_digest;
  }
  {
    auto ss = expect("# diverged ");
    int d = 0;
    ss >> d >> log.divergence_reason;
    log.diverged = d != 0;
    if (!log.diverged) log.divergence_reason.clear();
  }
  size_t n = 0;
  {
    auto ss = expect("# steps ");
    ss >> n;
  }
  log.steps.resize(n);
  for (auto& s : log.steps) {
    if (!std::getline(is, line)) throw std::runtime_error("episode log: truncated");
    std::istringstream ss(line);
    int inst = 0, sus = 0;
    ss >> s.time >> s.phase >> inst >> sus;
    s.standing_instant = inst != 0;
    s.standing_sustained = sus != 0;
    ss >> s.state.base_position.x() >> s.state.base_position.y() >> s.state.base_angle >>
        s.state.base_lin_vel.x() >> s.state.base_lin_vel.y() >> s.state.base_ang_vel;
    long nj = 0;
    ss >> nj;
    s.state.joint_pos.resize(nj);
    s.state.joint_vel.resize(nj);
    for (long j = 0; j < nj; ++j) ss >> s.state.joint_pos[j];
    for (long j = 0; j < nj; ++j) ss >> s.state.joint_vel[j];
    size_t nl = 0;
    ss >> nl;
    s.state.link_world_positions.resize(nl);
    for (auto& p : s.state.link_world_positions) ss >> p.x() >> p.y();
    s.action.resize(nj);
    s.torques.resize(nj);
    for (long j = 0; j < nj; ++j) ss >> s.action[j];
    for (long j = 0; j < nj; ++j) ss >> s.torques[j];
    ss >> s.head_height >> s.ground_under_head;
    s.reward = RewardBreakdown{};
    for (int i = 0; i < kNumRewardTerms; ++i) {
      ss >> s.reward.value[i];
      s.reward.present[i] = true;
    }
    ss >> s.reward.total;
    size_t ne = 0;
    ss >> ne;
    s.reference_error.resize(ne);
    for (auto& e : s.reference_error) ss >> e.x() >> e.y();
    size_t nc = 0;
    ss >> nc;
    s.contacts.resize(nc);
    for (auto& c : s.contacts)
      ss >> c.position.x() >> c.position.y() >> c.normal_force >> c.tangent_force >>
          c.penetration >> c.link;
    if (!ss) throw std::runtime_error("episode log: malformed step line");
    s.state.time = s.time;
  }
  return log;
}

}  // namespace upright

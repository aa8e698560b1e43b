#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "upright/physics.hpp"
#include "upright/rewards.hpp"

namespace upright {

// One control step of a finished or running episode. Everything the metrics
// need is recorded here so evaluation replays never touch the simulator.
struct LogStep {
  double time = 0.0;
  HumanoidState state;
  Eigen::VectorXd action;
  Eigen::VectorXd torques;
  RewardBreakdown reward;
  ContactSet contacts;
  double head_height = 0.0;
  double ground_under_head = 0.0;
  std::vector<Vec2> reference_error;  // root-relative, per link
  double phase = 0.0;
  bool standing_instant = false;
  bool standing_sustained = false;
};

struct EpisodeLog {
  // metadata
  std::string clip_id;
  bool mirrored = false;
  std::string terrain_family;
  double terrain_difficulty = 0.0;
  uint64_t terrain_seed = 0;
  uint64_t seed = 0;
  double dt = 0.02;
  double horizon = 7.5;
  uint64_t config_digest = 0;
  bool diverged = false;
  std::string divergence_reason;

  std::vector<LogStep> steps;

  // Line-oriented serialization: a '#' metadata header, then one step per
  // line with the documented field order (see save()).
  void save(std::ostream& os) const;
  static EpisodeLog load(std::istream& is);
};

}  // namespace upright

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "upright/domain_rand.hpp"
#include "upright/env.hpp"
#include "upright/nets.hpp"
#include "upright/rewards.hpp"

namespace upright {

struct PpoConfig {
  int n_envs = 256;  // paper scale 4096; desk default
  int epochs = 5;
  int steps_per_env = 24;
  int minibatch_size = 1536;
  double gamma = 0.99;
  double lam = 0.95;
  double clip_eps = 0.2;
  double entropy_coef = 0.005;
  double value_loss_coef = 1.0;
  double lr = 1e-3;
  bool adaptive_lr = true;
  double target_kl = 0.01;
  double lr_min = 1e-6, lr_max = 1e-2;
  double max_grad_norm = 1.0;
  int iterations = 400;
  double flat_fraction = 0.5;  // stage switch point
  int checkpoint_every = 100;
};

struct DistillConfig {
  int n_envs = 128;  // paper scale 512; desk default
  int steps_per_env = 4;
  int minibatch_size = 512;
  double lr = 1e-4;
  double latent_weight = 1.0;
  double bc_weight = 1.0;
  double beta_decay_fraction = 0.6;  // linear 1 -> 0 over this share of iterations
  int iterations = 600;
  double max_grad_norm = 1.0;
  int checkpoint_every = 200;
  bool flat_stage = true;
};

struct EvalConfig {
  int trials = 50;
  std::vector<std::string> terrains{"flat"};
  std::string regime = "standup";  // standup | fall
  std::vector<std::string> clips;  // empty = all matching the regime
  double difficulty_min = 0.0, difficulty_max = 14.0;
  bool stochastic = false;
};

struct RunConfig {
  std::string model_json;  // empty = built-in default humanoid
  std::vector<std::string> clip_filter;  // restrict training clips by style name
  EnvConfig env;
  RewardWeights rewards;
  RandomizationRanges dr;
  NetConfig net;
  PpoConfig ppo;
  DistillConfig distill;
  EvalConfig eval;
  int threads = 0;  // 0 = hardware
  std::string kernels = "auto";  // auto | scalar | avx2

  uint64_t digest() const;
  std::string to_json() const;  // canonical, includes every effective value

  HumanoidModel make_model() const;
};

// Parses and validates; every violation is reported, not just the first.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what, std::vector<std::string> v)
      : std::runtime_error(what), violations(std::move(v)) {}
  std::vector<std::string> violations;
};
RunConfig parse_config(const std::string& path);           // empty/missing keys -> defaults
RunConfig parse_config_text(const std::string& json_text);

}  // namespace upright

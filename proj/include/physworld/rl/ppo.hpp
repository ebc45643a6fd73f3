#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "physworld/rl/env.hpp"
#include "physworld/rl/policy.hpp"

namespace physworld::rl {

struct PpoConfig {
  double clip = 0.2;
  double gae_lambda = 0.95;
  double gamma = 0.99;
  double learning_rate = 3e-4;
  int epochs = 4;
  std::size_t minibatch = 256;
  std::size_t num_envs = 8;
  std::size_t rollout_steps = 256;
  int iterations = 500;
  double entropy_coef = 0.003;
  double value_coef = 0.5;
  double max_grad_norm = 0.5;
  double init_log_std = -1.0;
  std::uint64_t seed = 0;
  std::size_t threads = 1;

  void validate() const;
  LossConfig loss() const { return {clip, value_coef, entropy_coef}; }
};

// Advantages by generalized advantage estimation over one environment's
// segment. dones[t] marks that step t ended its episode; bootstrap is V of
// the state following the last step.
std::vector<double> compute_gae(std::span<const double> rewards, std::span<const double> values,
                                std::span<const std::uint8_t> dones, double bootstrap,
                                double gamma, double lambda);

struct IterationStats {
  int iteration = 0;
  double mean_return = 0.0;
  double mean_r_trk = 0.0;  // per step
  double mean_r_grasp = 0.0;
  double mean_r_plan = 0.0;
  double success_rate = 0.0;
  std::size_t episodes = 0;
  LossTerms loss;
};

struct TrainingResult {
  PolicyParameters params;
  std::vector<IterationStats> curve;
};

using IterationCallback = std::function<void(const IterationStats&)>;

TrainingResult ppo_train(const EnvFactory& factory, const PpoConfig& config,
                         const IterationCallback& on_iteration = {});

// Applies one Adam step of the given gradient (global-norm clipped).
class Adam {
 public:
  Adam(std::size_t size, double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
       double epsilon = 1e-8);
  void step(std::vector<double>& params, std::vector<double>& grad, double max_grad_norm);

 private:
  double lr_;
  double beta1_;
  double beta2_;
  double epsilon_;
  std::int64_t t_ = 0;
  std::vector<double> m_;
  std::vector<double> v_;
};

struct SuccessReport {
  std::size_t episodes = 0;
  double success_rate = 0.0;
  double mean_position_error = 0.0;
  double mean_rotation_error = 0.0;
  double mean_episode_reward = 0.0;
  std::vector<bool> successes;
};

// Mean-action rollouts; episode i resets with seed base_seed + i.
SuccessReport evaluate(const PolicyParameters& params, const EnvFactory& factory,
                       std::size_t episodes, std::uint64_t base_seed = 1000);

}  // namespace physworld::rl

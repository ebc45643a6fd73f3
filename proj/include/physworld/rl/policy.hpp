#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "physworld/rl/observation.hpp"

namespace physworld::rl {

// Flat parameter vector holding the actor MLP, the state-independent
// log-std and the critic MLP. Dense weights are stored input-major
// (w[i * out + o]) so a forward pass is a sequence of row AXPYs.
class PolicyParameters {
 public:
  static constexpr double kMinLogStd = -4.0;
  static constexpr double kMaxLogStd = 1.0;

  struct Layer {
    std::size_t in = 0;
    std::size_t out = 0;
    std::size_t weights = 0;  // offset into values
    std::size_t bias = 0;
    friend bool operator==(const Layer&, const Layer&) = default;
  };

  PolicyParameters();
  PolicyParameters(std::vector<std::size_t> actor_dims, std::vector<std::size_t> critic_dims);

  // Scaled Gaussian init; the actor output layer starts near zero.
  static PolicyParameters initialize(std::uint64_t seed, double init_log_std = -1.0);

  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }
  std::size_t size() const { return values_.size(); }

  const std::vector<Layer>& actor() const { return actor_; }
  const std::vector<Layer>& critic() const { return critic_; }
  const std::vector<std::size_t>& actor_dims() const { return actor_dims_; }
  const std::vector<std::size_t>& critic_dims() const { return critic_dims_; }
  std::size_t log_std_offset() const { return log_std_; }
  std::span<const double> log_std() const { return {values_.data() + log_std_, kActionSize}; }
  double clamped_log_std(std::size_t i) const;

  void clamp_log_std();
  bool finite() const;

  friend bool operator==(const PolicyParameters&, const PolicyParameters&) = default;

 private:
  std::vector<std::size_t> actor_dims_;
  std::vector<std::size_t> critic_dims_;
  std::vector<Layer> actor_;
  std::vector<Layer> critic_;
  std::size_t log_std_ = 0;
  std::vector<double> values_;
};

Action actor_mean(const PolicyParameters& params, const Observation& obs);
double critic_value(const PolicyParameters& params, const Observation& obs);
double log_prob(const PolicyParameters& params, const Action& mean, const Action& action);
double entropy(const PolicyParameters& params);

// One transition as consumed by the surrogate loss.
struct Sample {
  Observation obs{};
  Action action{};
  double log_prob = 0.0;
  double advantage = 0.0;
  double ret = 0.0;
};

struct LossTerms {
  double policy = 0.0;
  double value = 0.0;
  double entropy = 0.0;
  double total = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
};

struct LossConfig {
  double clip = 0.2;
  double value_coef = 0.5;
  double entropy_coef = 0.003;
};

// Clipped surrogate + value_coef * MSE(value) - entropy_coef * entropy,
// averaged over the batch. Accumulates d(total)/d(params) into grad when given.
LossTerms ppo_loss(const PolicyParameters& params, std::span<const Sample> batch,
                   const LossConfig& config, std::vector<double>* grad);

// Same value and entropy terms with the plain score-function policy loss
// -mean(log pi(a|s) * A).
LossTerms vanilla_pg_loss(const PolicyParameters& params, std::span<const Sample> batch,
                          const LossConfig& config, std::vector<double>* grad);

}  // namespace physworld::rl

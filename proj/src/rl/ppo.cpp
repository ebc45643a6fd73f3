#include "physworld/rl/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <random>
#include <thread>

#include "physworld/error.hpp"
#include "physworld/kernels.hpp"

namespace physworld::rl {
namespace {

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::size_t worker_count(std::size_t requested, std::size_t envs) {
  std::size_t n = std::max<std::size_t>(requested, 1);
  if (const char* env = std::getenv("PW_THREADS")) {
    const long cap = std::strtol(env, nullptr, 10);
    if (cap >= 1) n = std::min(n, static_cast<std::size_t>(cap));
  }
  return std::min(n, envs);
}

// One environment's share of the rollout plus its persistent episode state.
struct Worker {
  std::unique_ptr<Environment> env;
  std::mt19937_64 noise;
  std::uint64_t episode_seed_base = 0;
  std::uint64_t episodes_started = 0;
  Observation obs{};
  double episode_return = 0.0;

  std::vector<Sample> samples;
  std::vector<double> rewards, values;
  std::vector<std::uint8_t> dones;
  double bootstrap = 0.0;
  double sum_trk = 0.0, sum_grasp = 0.0, sum_plan = 0.0;
  std::vector<double> returns;
  std::size_t successes = 0;

  void new_episode() { obs = env->reset(mix(episode_seed_base, episodes_started++)); }

  void collect(const PolicyParameters& params, std::size_t steps) {
    samples.clear();
    rewards.clear();
    values.clear();
    dones.clear();
    returns.clear();
    sum_trk = sum_grasp = sum_plan = 0.0;
    successes = 0;
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (std::size_t t = 0; t < steps; ++t) {
      Sample s;
      s.obs = obs;
      const Action mean = actor_mean(params, obs);
      for (std::size_t i = 0; i < kActionSize; ++i) {
        s.action[i] = mean[i] + std::exp(params.clamped_log_std(i)) * gauss(noise);
      }
      s.log_prob = log_prob(params, mean, s.action);
      values.push_back(critic_value(params, obs));
      const StepResult r = env->step(s.action);
      samples.push_back(s);
      rewards.push_back(r.reward);
      dones.push_back(r.done ? 1 : 0);
      sum_trk += r.r_trk;
      sum_grasp += r.r_grasp;
      sum_plan += r.r_plan;
      episode_return += r.reward;
      if (r.done) {
        returns.push_back(episode_return);
        successes += r.success ? 1 : 0;
        episode_return = 0.0;
        new_episode();
      } else {
        obs = r.obs;
      }
    }
    bootstrap = dones.back() ? 0.0 : critic_value(params, obs);
  }
};

double global_norm(const std::vector<double>& g) {
  return std::sqrt(kernels::active().dot(g.data(), g.data(), g.size()));
}

}  // namespace

void PpoConfig::validate() const {
  auto bad = [](const char* what) { throw Error(ErrorCode::kInvalidArgument, what); };
  if (!(clip > 0.0)) bad("clip must be > 0");
  if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) bad("gae lambda must lie in [0, 1]");
  if (!(gamma >= 0.0 && gamma <= 1.0)) bad("gamma must lie in [0, 1]");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) bad("learning rate must be > 0");
  if (epochs < 1) bad("epochs must be >= 1");
  if (minibatch < 1) bad("minibatch must be >= 1");
  if (num_envs < 1) bad("num_envs must be >= 1");
  if (rollout_steps < 1) bad("rollout_steps must be >= 1");
  if (iterations < 0) bad("iterations must be >= 0");
  if (!(entropy_coef >= 0.0) || !(value_coef >= 0.0)) bad("loss coefficients must be >= 0");
  if (!(max_grad_norm > 0.0)) bad("max_grad_norm must be > 0");
  if (!std::isfinite(init_log_std)) bad("init_log_std must be finite");
}

std::vector<double> compute_gae(std::span<const double> rewards, std::span<const double> values,
                                std::span<const std::uint8_t> dones, double bootstrap,
                                double gamma, double lambda) {
  const std::size_t n = rewards.size();
  if (values.size() != n || dones.size() != n) {
    throw Error(ErrorCode::kInvalidArgument, "gae inputs differ in length");
  }
  std::vector<double> adv(n);
  double next_value = bootstrap;
  double next_adv = 0.0;
  for (std::size_t t = n; t-- > 0;) {
    const double live = dones[t] ? 0.0 : 1.0;
    const double delta = rewards[t] + gamma * live * next_value - values[t];
    next_adv = delta + gamma * lambda * live * next_adv;
    adv[t] = next_adv;
    next_value = values[t];
  }
  return adv;
}

Adam::Adam(std::size_t size, double learning_rate, double beta1, double beta2, double epsilon)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), epsilon_(epsilon), m_(size, 0.0),
      v_(size, 0.0) {}

void Adam::step(std::vector<double>& params, std::vector<double>& grad, double max_grad_norm) {
  if (params.size() != m_.size() || grad.size() != m_.size()) {
    throw Error(ErrorCode::kInvalidArgument, "adam size mismatch");
  }
  const double norm = global_norm(grad);
  if (!std::isfinite(norm)) throw Error(ErrorCode::kNonFiniteLoss, "non-finite gradient");
  if (norm > max_grad_norm) {
    const double s = max_grad_norm / norm;
    for (auto& g : grad) g *= s;
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, double(t_));
  const double c2 = 1.0 - std::pow(beta2_, double(t_));
  kernels::active().adam(params.data(), m_.data(), v_.data(), grad.data(), params.size(), beta1_,
                         beta2_, lr_ / c1, 1.0 / c2, epsilon_);
}

TrainingResult ppo_train(const EnvFactory& factory, const PpoConfig& config,
                         const IterationCallback& on_iteration) {
  config.validate();
  TrainingResult result{PolicyParameters::initialize(mix(config.seed, 0x706f6c), config.init_log_std),
                        {}};
  PolicyParameters& params = result.params;

  std::vector<Worker> workers(config.num_envs);
  for (std::size_t e = 0; e < workers.size(); ++e) {
    auto& w = workers[e];
    w.env = factory();
    if (!w.env) throw Error(ErrorCode::kInvalidArgument, "environment factory returned null");
    w.noise.seed(mix(config.seed, 0x10000 + e));
    w.episode_seed_base = mix(config.seed, 0x20000 + e);
    w.new_episode();
  }
  const std::size_t threads = worker_count(config.threads, workers.size());

  Adam adam(params.size(), config.learning_rate);
  std::mt19937_64 shuffle_rng(mix(config.seed, 0x73687566));
  std::vector<Sample> batch;
  std::vector<double> grad;

  for (int it = 0; it < config.iterations; ++it) {
    if (threads <= 1) {
      for (auto& w : workers) w.collect(params, config.rollout_steps);
    } else {
      std::vector<std::thread> pool;
      std::vector<std::exception_ptr> errors(threads);
      for (std::size_t k = 0; k < threads; ++k) {
        pool.emplace_back([&, k] {
          try {
            for (std::size_t e = k; e < workers.size(); e += threads) {
              workers[e].collect(params, config.rollout_steps);
            }
          } catch (...) {
            errors[k] = std::current_exception();
          }
        });
      }
      for (auto& th : pool) th.join();
      for (auto& err : errors) {
        if (err) std::rethrow_exception(err);
      }
    }

    IterationStats stats;
    stats.iteration = it;
    batch.clear();
    double all_returns = 0.0, all_rewards = 0.0;
    std::size_t successes = 0;
    for (auto& w : workers) {
      const auto adv = compute_gae(w.rewards, w.values, w.dones, w.bootstrap, config.gamma,
                                   config.gae_lambda);
      for (std::size_t t = 0; t < w.samples.size(); ++t) {
        w.samples[t].advantage = adv[t];
        w.samples[t].ret = adv[t] + w.values[t];
        batch.push_back(w.samples[t]);
      }
      stats.mean_r_trk += w.sum_trk;
      stats.mean_r_grasp += w.sum_grasp;
      stats.mean_r_plan += w.sum_plan;
      all_rewards += std::accumulate(w.rewards.begin(), w.rewards.end(), 0.0);
      all_returns += std::accumulate(w.returns.begin(), w.returns.end(), 0.0);
      stats.episodes += w.returns.size();
      successes += w.successes;
    }
    const double n = double(batch.size());
    stats.mean_r_trk /= n;
    stats.mean_r_grasp /= n;
    stats.mean_r_plan /= n;
    if (stats.episodes > 0) {
      stats.mean_return = all_returns / double(stats.episodes);
      stats.success_rate = double(successes) / double(stats.episodes);
    } else {
      // No episode finished: report the per-step reward scaled to an episode.
      stats.mean_return = all_rewards / n * double(workers.front().env->episode_length());
    }

    double mean = 0.0, sq = 0.0;
    for (const auto& s : batch) mean += s.advantage;
    mean /= n;
    for (const auto& s : batch) sq += (s.advantage - mean) * (s.advantage - mean);
    const double std_dev = std::sqrt(sq / n) + 1e-8;
    for (auto& s : batch) s.advantage = (s.advantage - mean) / std_dev;

    std::vector<std::size_t> order(batch.size());
    std::vector<Sample> mini;
    LossTerms sum{};
    std::size_t updates = 0;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), shuffle_rng);
      for (std::size_t start = 0; start < order.size(); start += config.minibatch) {
        const std::size_t end = std::min(order.size(), start + config.minibatch);
        mini.clear();
        for (std::size_t i = start; i < end; ++i) mini.push_back(batch[order[i]]);
        const LossTerms terms = ppo_loss(params, mini, config.loss(), &grad);
        if (!std::isfinite(terms.total)) {
          throw Error(ErrorCode::kNonFiniteLoss,
                      "non-finite loss at iteration " + std::to_string(it));
        }
        adam.step(params.values(), grad, config.max_grad_norm);
        params.clamp_log_std();
        sum.policy += terms.policy;
        sum.value += terms.value;
        sum.entropy += terms.entropy;
        sum.total += terms.total;
        sum.approx_kl += terms.approx_kl;
        sum.clip_fraction += terms.clip_fraction;
        ++updates;
      }
    }
    if (!params.finite()) {
      throw Error(ErrorCode::kNonFiniteLoss, "parameters became non-finite");
    }
    const double u = double(updates);
    stats.loss = {sum.policy / u,    sum.value / u,     sum.entropy / u,
                  sum.total / u,     sum.approx_kl / u, sum.clip_fraction / u};
    result.curve.push_back(stats);
    if (on_iteration) on_iteration(stats);
  }
  return result;
}

SuccessReport evaluate(const PolicyParameters& params, const EnvFactory& factory,
                       std::size_t episodes, std::uint64_t base_seed) {
  SuccessReport report;
  if (episodes == 0) return report;
  auto env = factory();
  if (!env) throw Error(ErrorCode::kInvalidArgument, "environment factory returned null");
  std::size_t wins = 0;
  for (std::size_t i = 0; i < episodes; ++i) {
    Observation obs = env->reset(base_seed + i);
    double total = 0.0;
    for (;;) {
      const StepResult r = env->step(actor_mean(params, obs));
      total += r.reward;
      obs = r.obs;
      if (r.done) {
        report.successes.push_back(r.success);
        wins += r.success ? 1 : 0;
        report.mean_position_error += r.final_position_error;
        report.mean_rotation_error += r.final_rotation_error;
        break;
      }
    }
    report.mean_episode_reward += total;
  }
  const double n = double(episodes);
  report.episodes = episodes;
  report.success_rate = double(wins) / n;
  report.mean_position_error /= n;
  report.mean_rotation_error /= n;
  report.mean_episode_reward /= n;
  return report;
}

}  // namespace physworld::rl

#include "physworld/rl/policy.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "physworld/error.hpp"
#include "physworld/kernels.hpp"

namespace physworld::rl {
namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

std::vector<PolicyParameters::Layer> lay_out(const std::vector<std::size_t>& dims,
                                             std::size_t& offset) {
  std::vector<PolicyParameters::Layer> layers;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    PolicyParameters::Layer layer;
    layer.in = dims[l];
    layer.out = dims[l + 1];
    layer.weights = offset;
    offset += layer.in * layer.out;
    layer.bias = offset;
    offset += layer.out;
    layers.push_back(layer);
  }
  return layers;
}

// Activations of every layer: acts[0] is the input, acts[l + 1] the output
// of layer l (tanh on hidden layers, identity on the last).
struct Trace {
  std::vector<std::vector<double>> acts;
};

void forward(const std::vector<double>& w, const std::vector<PolicyParameters::Layer>& layers,
             const double* input, Trace& trace) {
  const auto& k = kernels::active();
  trace.acts.resize(layers.size() + 1);
  trace.acts[0].assign(input, input + layers.front().in);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    auto& out = trace.acts[l + 1];
    out.assign(w.begin() + static_cast<std::ptrdiff_t>(layer.bias),
               w.begin() + static_cast<std::ptrdiff_t>(layer.bias + layer.out));
    const auto& x = trace.acts[l];
    for (std::size_t i = 0; i < layer.in; ++i) {
      if (x[i] != 0.0) k.axpy(x[i], w.data() + layer.weights + i * layer.out, out.data(), layer.out);
    }
    if (l + 1 < layers.size()) {
      for (auto& v : out) v = std::tanh(v);
    }
  }
}

// Back-propagates d(loss)/d(output) through the layers into grad.
void backward(const std::vector<double>& w, const std::vector<PolicyParameters::Layer>& layers,
              const Trace& trace, std::vector<double> dout, std::vector<double>& grad) {
  const auto& k = kernels::active();
  std::vector<double> din;
  for (std::size_t l = layers.size(); l-- > 0;) {
    const auto& layer = layers[l];
    const auto& x = trace.acts[l];
    k.axpy(1.0, dout.data(), grad.data() + layer.bias, layer.out);
    for (std::size_t i = 0; i < layer.in; ++i) {
      if (x[i] != 0.0) k.axpy(x[i], dout.data(), grad.data() + layer.weights + i * layer.out, layer.out);
    }
    if (l == 0) break;
    din.resize(layer.in);
    for (std::size_t i = 0; i < layer.in; ++i) {
      din[i] = k.dot(w.data() + layer.weights + i * layer.out, dout.data(), layer.out);
      din[i] *= 1.0 - x[i] * x[i];  // x is the tanh output of the previous layer
    }
    dout.swap(din);
  }
}

struct Evaluation {
  Trace actor;
  Trace critic;
  Action mean{};
  double value = 0.0;
};

void evaluate(const PolicyParameters& p, const Observation& obs, Evaluation& e) {
  forward(p.values(), p.actor(), obs.data(), e.actor);
  forward(p.values(), p.critic(), obs.data(), e.critic);
  std::copy_n(e.actor.acts.back().begin(), kActionSize, e.mean.begin());
  e.value = e.critic.acts.back()[0];
}

bool log_std_free(const PolicyParameters& p, std::size_t i) {
  const double s = p.values()[p.log_std_offset() + i];
  return s > PolicyParameters::kMinLogStd && s < PolicyParameters::kMaxLogStd;
}

// Shared body of both losses; `surrogate` maps (ratio, advantage, logp) to
// the per-sample policy loss and d(loss)/d(logp).
template <typename Surrogate>
LossTerms batch_loss(const PolicyParameters& params, std::span<const Sample> batch,
                     const LossConfig& cfg, std::vector<double>* grad, Surrogate surrogate) {
  if (batch.empty()) throw Error(ErrorCode::kInvalidArgument, "empty batch");
  if (grad) grad->assign(params.size(), 0.0);
  const double n = double(batch.size());
  std::array<double, kActionSize> sigma{}, log_sigma{};
  for (std::size_t i = 0; i < kActionSize; ++i) {
    log_sigma[i] = params.clamped_log_std(i);
    sigma[i] = std::exp(log_sigma[i]);
  }
  LossTerms terms;
  Evaluation e;
  std::vector<double> dmean(kActionSize), dvalue(1);
  for (const auto& s : batch) {
    evaluate(params, s.obs, e);
    const double lp = log_prob(params, e.mean, s.action);
    const double ratio = std::exp(lp - s.log_prob);
    const auto [loss, dlogp] = surrogate(ratio, s.advantage, lp, cfg.clip);
    terms.policy += loss / n;
    const double err = e.value - s.ret;
    terms.value += err * err / n;
    terms.approx_kl += (s.log_prob - lp) / n;
    terms.clip_fraction += (std::abs(ratio - 1.0) > cfg.clip ? 1.0 : 0.0) / n;
    if (!grad) continue;
    const double g = dlogp / n;
    for (std::size_t i = 0; i < kActionSize; ++i) {
      const double z = (s.action[i] - e.mean[i]) / sigma[i];
      dmean[i] = g * z / sigma[i];
      if (log_std_free(params, i)) (*grad)[params.log_std_offset() + i] += g * (z * z - 1.0);
    }
    backward(params.values(), params.actor(), e.actor, dmean, *grad);
    dvalue[0] = cfg.value_coef * 2.0 * err / n;
    backward(params.values(), params.critic(), e.critic, dvalue, *grad);
  }
  terms.entropy = entropy(params);
  if (grad) {
    for (std::size_t i = 0; i < kActionSize; ++i) {
      if (log_std_free(params, i)) (*grad)[params.log_std_offset() + i] -= cfg.entropy_coef;
    }
  }
  terms.total = terms.policy + cfg.value_coef * terms.value - cfg.entropy_coef * terms.entropy;
  return terms;
}

}  // namespace

PolicyParameters::PolicyParameters()
    : PolicyParameters({kObservationSize, 64, 64, kActionSize}, {kObservationSize, 64, 64, 1}) {}

PolicyParameters::PolicyParameters(std::vector<std::size_t> actor_dims,
                                   std::vector<std::size_t> critic_dims)
    : actor_dims_(std::move(actor_dims)), critic_dims_(std::move(critic_dims)) {
  if (actor_dims_.size() < 2 || critic_dims_.size() < 2 ||
      actor_dims_.front() != kObservationSize || actor_dims_.back() != kActionSize ||
      critic_dims_.front() != kObservationSize || critic_dims_.back() != 1 ||
      std::find(actor_dims_.begin(), actor_dims_.end(), 0u) != actor_dims_.end() ||
      std::find(critic_dims_.begin(), critic_dims_.end(), 0u) != critic_dims_.end()) {
    throw Error(ErrorCode::kInvalidArgument, "policy layer dimensions do not match the task");
  }
  std::size_t offset = 0;
  actor_ = lay_out(actor_dims_, offset);
  log_std_ = offset;
  offset += kActionSize;
  critic_ = lay_out(critic_dims_, offset);
  values_.assign(offset, 0.0);
}

PolicyParameters PolicyParameters::initialize(std::uint64_t seed, double init_log_std) {
  PolicyParameters p;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  auto fill = [&](const std::vector<Layer>& layers, double last_gain) {
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const auto& layer = layers[l];
      const double gain = l + 1 == layers.size() ? last_gain : 1.0;
      const double scale = gain / std::sqrt(double(layer.in));
      for (std::size_t i = 0; i < layer.in * layer.out; ++i) {
        p.values_[layer.weights + i] = scale * g(rng);
      }
    }
  };
  fill(p.actor_, 0.01);
  fill(p.critic_, 1.0);
  for (std::size_t i = 0; i < kActionSize; ++i) p.values_[p.log_std_ + i] = init_log_std;
  p.clamp_log_std();
  return p;
}

double PolicyParameters::clamped_log_std(std::size_t i) const {
  return std::clamp(values_[log_std_ + i], kMinLogStd, kMaxLogStd);
}

void PolicyParameters::clamp_log_std() {
  for (std::size_t i = 0; i < kActionSize; ++i) values_[log_std_ + i] = clamped_log_std(i);
}

bool PolicyParameters::finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

Action actor_mean(const PolicyParameters& params, const Observation& obs) {
  Trace t;
  forward(params.values(), params.actor(), obs.data(), t);
  Action a{};
  std::copy_n(t.acts.back().begin(), kActionSize, a.begin());
  return a;
}

double critic_value(const PolicyParameters& params, const Observation& obs) {
  Trace t;
  forward(params.values(), params.critic(), obs.data(), t);
  return t.acts.back()[0];
}

double log_prob(const PolicyParameters& params, const Action& mean, const Action& action) {
  double lp = 0.0;
  for (std::size_t i = 0; i < kActionSize; ++i) {
    const double s = params.clamped_log_std(i);
    const double z = (action[i] - mean[i]) / std::exp(s);
    lp += -0.5 * z * z - s - 0.5 * kLog2Pi;
  }
  return lp;
}

double entropy(const PolicyParameters& params) {
  double h = 0.0;
  for (std::size_t i = 0; i < kActionSize; ++i) h += params.clamped_log_std(i) + 0.5 * (kLog2Pi + 1.0);
  return h;
}

LossTerms ppo_loss(const PolicyParameters& params, std::span<const Sample> batch,
                   const LossConfig& config, std::vector<double>* grad) {
  return batch_loss(params, batch, config, grad,
                    [](double ratio, double adv, double, double clip) {
                      const double unclipped = ratio * adv;
                      const double clipped = std::clamp(ratio, 1.0 - clip, 1.0 + clip) * adv;
                      const bool inside = ratio >= 1.0 - clip && ratio <= 1.0 + clip;
                      const double d = (unclipped <= clipped || inside) ? -ratio * adv : 0.0;
                      return std::pair{-std::min(unclipped, clipped), d};
                    });
}

LossTerms vanilla_pg_loss(const PolicyParameters& params, std::span<const Sample> batch,
                          const LossConfig& config, std::vector<double>* grad) {
  return batch_loss(params, batch, config, grad, [](double, double adv, double lp, double) {
    return std::pair{-lp * adv, -adv};
  });
}

}  // namespace physworld::rl

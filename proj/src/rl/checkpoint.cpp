#include "physworld/rl/checkpoint.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "binary_io.hpp"
#include "physworld/error.hpp"

namespace physworld::rl {
namespace {

constexpr std::array<char, 4> kMagic{'P', 'W', 'P', 'L'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kMaxLayers = 64;
constexpr std::uint32_t kMaxWidth = 1u << 16;

void write_dims(io::Writer& out, const std::vector<std::size_t>& dims) {
  out.u32(static_cast<std::uint32_t>(dims.size()));
  for (auto d : dims) out.u32(static_cast<std::uint32_t>(d));
}

std::vector<std::size_t> read_dims(io::Reader& in) {
  const std::uint32_t n = in.u32();
  if (n < 2 || n > kMaxLayers) throw Error(ErrorCode::kFormat, "checkpoint: bad layer count");
  std::vector<std::size_t> dims(n);
  for (auto& d : dims) {
    d = in.u32();
    if (d == 0 || d > kMaxWidth) throw Error(ErrorCode::kFormat, "checkpoint: bad layer width");
  }
  return dims;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
  io::Writer out(path);
  out.magic(kMagic);
  out.u32(kVersion);
  out.u32(c.mode == ActionMode::kResidual ? 0 : 1);
  write_dims(out, c.params.actor_dims());
  write_dims(out, c.params.critic_dims());
  out.u64(c.params.size());
  out.bytes(c.params.values().data(), c.params.size() * sizeof(double));

  const PpoConfig& p = c.config;
  for (double v : {p.clip, p.gae_lambda, p.gamma, p.learning_rate, double(p.epochs),
                   double(p.minibatch), double(p.num_envs), double(p.rollout_steps),
                   double(p.iterations), p.entropy_coef, p.value_coef, p.max_grad_norm,
                   p.init_log_std}) {
    out.f64(v);
  }
  out.u64(p.seed);
  const RewardWeights& w = c.weights;
  for (double v : {w.w_pos, w.k_pos, w.w_ori, w.k_ori, w.w_grasp, w.grasp_distance, w.w_plan}) {
    out.f64(v);
  }
  out.finish();
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  io::Reader in(path);
  in.expect_magic(kMagic);
  if (const auto v = in.u32(); v != kVersion) {
    throw Error(ErrorCode::kFormat, "checkpoint: unsupported version " + std::to_string(v));
  }
  const std::uint32_t mode = in.u32();
  if (mode > 1) throw Error(ErrorCode::kFormat, "checkpoint: unknown action mode");
  auto actor = read_dims(in);
  auto critic = read_dims(in);
  Checkpoint c;
  c.mode = mode == 0 ? ActionMode::kResidual : ActionMode::kScratch;
  try {
    c.params = PolicyParameters(std::move(actor), std::move(critic));
  } catch (const Error& e) {
    throw Error(ErrorCode::kFormat, std::string("checkpoint: ") + e.what());
  }
  if (in.u64() != c.params.size()) {
    throw Error(ErrorCode::kFormat, "checkpoint: parameter count does not match the layers");
  }
  in.bytes(c.params.values().data(), c.params.size() * sizeof(double));
  if (!c.params.finite()) throw Error(ErrorCode::kFormat, "checkpoint: non-finite parameters");

  PpoConfig& p = c.config;
  p.clip = in.f64();
  p.gae_lambda = in.f64();
  p.gamma = in.f64();
  p.learning_rate = in.f64();
  p.epochs = static_cast<int>(in.f64());
  p.minibatch = static_cast<std::size_t>(in.f64());
  p.num_envs = static_cast<std::size_t>(in.f64());
  p.rollout_steps = static_cast<std::size_t>(in.f64());
  p.iterations = static_cast<int>(in.f64());
  p.entropy_coef = in.f64();
  p.value_coef = in.f64();
  p.max_grad_norm = in.f64();
  p.init_log_std = in.f64();
  p.seed = in.u64();
  RewardWeights& w = c.weights;
  w.w_pos = in.f64();
  w.k_pos = in.f64();
  w.w_ori = in.f64();
  w.k_ori = in.f64();
  w.w_grasp = in.f64();
  w.grasp_distance = in.f64();
  w.w_plan = in.f64();
  in.expect_end();
  try {
    p.validate();
    w.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::kFormat, std::string("checkpoint: ") + e.what());
  }
  return c;
}

void write_curve_csv(const std::filesystem::path& path, const std::vector<IterationStats>& curve) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot open for writing: " + path.string());
  out << "iteration,mean_return,mean_r_trk,mean_r_grasp,mean_r_plan,success_rate,episodes\n";
  char line[256];
  for (const auto& s : curve) {
    std::snprintf(line, sizeof line, "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%zu\n", s.iteration,
                  s.mean_return, s.mean_r_trk, s.mean_r_grasp, s.mean_r_plan, s.success_rate,
                  s.episodes);
    out << line;
  }
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + path.string());
}

}  // namespace physworld::rl

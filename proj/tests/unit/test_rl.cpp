#include <doctest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "physworld/error.hpp"
#include "physworld/rl/checkpoint.hpp"
#include "physworld/rl/ppo.hpp"
#include "support/scenes.hpp"

using namespace physworld;
using namespace physworld::rl;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kIo;
}

Quat random_quat(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  return Quat(g(rng), g(rng), g(rng), g(rng)).normalized();
}

// Field-by-field observation assembled without the layout constants.
std::vector<double> observation_oracle(const sim::WorldState& w, const traj::PoseTrajectory& target,
                                       const traj::BaselinePlan& plan, std::size_t t) {
  std::vector<double> o;
  auto add = [&](const Pose& p) {
    const Quat q = canonical(p.q);
    for (double v : {p.p.x(), p.p.y(), p.p.z(), q.w(), q.x(), q.y(), q.z()}) o.push_back(v);
  };
  add(w.gripper.pose);
  add(w.bodies[0].pose);
  o.push_back(double(t) / double(plan.steps() - 1));
  add(target.nearest(double(target.frames()[std::size_t(plan.target_frame[t])].t)));
  add(plan.grasp);
  o.push_back(plan.pre_grasp_offset);
  add(plan.planned[t]);
  return o;
}

std::vector<Sample> random_batch(const PolicyParameters& p, std::size_t n, std::uint64_t seed,
                                 bool on_policy) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<Sample> batch(n);
  for (auto& s : batch) {
    for (auto& v : s.obs) v = g(rng);
    const Action mean = actor_mean(p, s.obs);
    for (std::size_t i = 0; i < kActionSize; ++i) {
      s.action[i] = mean[i] + std::exp(p.clamped_log_std(i)) * g(rng);
    }
    s.log_prob = log_prob(p, mean, s.action) + (on_policy ? 0.0 : 0.3 * g(rng));
    s.advantage = g(rng);
    s.ret = g(rng);
  }
  return batch;
}

// Gripper drags a point along a line; the reward only scores its distance
// to the origin.
class LineEnv : public Environment {
 public:
  Observation reset(std::uint64_t seed) override {
    std::mt19937_64 rng(seed);
    const double side = (rng() & 1) ? 1.0 : -1.0;
    x_ = side * std::uniform_real_distribution<double>(0.2, 0.4)(rng);
    t_ = 0;
    return obs();
  }
  StepResult step(const Action& raw) override {
    x_ += 0.05 * std::clamp(raw[0], -1.0, 1.0);
    ++t_;
    StepResult r;
    r.r_trk = std::exp(-10.0 * std::abs(x_));
    r.reward = r.r_trk;
    r.done = t_ == kLength;
    r.obs = obs();
    return r;
  }
  std::size_t episode_length() const override { return kLength; }

 private:
  static constexpr std::size_t kLength = 20;
  Observation obs() const {
    Observation o{};
    o[obs_layout::kEe] = x_;
    o[obs_layout::kObject] = x_;
    o[obs_layout::kTime] = double(t_) / double(kLength - 1);
    return o;
  }
  double x_ = 0.0;
  std::size_t t_ = 0;
};

PpoConfig small_config(int iterations) {
  PpoConfig c;
  c.iterations = iterations;
  c.num_envs = 4;
  c.rollout_steps = 64;
  c.minibatch = 128;
  c.seed = 7;
  return c;
}

}  // namespace

TEST_CASE("observation matches a hand-assembled vector") {
  auto task = testing::make_pick_place_task();
  auto state = sim::reset(task->context, 3, true);
  for (int k = 0; k < 7; ++k) sim::step(state, {task->plan.planned[std::size_t(k)], false});
  const std::size_t last = task->plan.steps() - 1;
  for (std::size_t t : {std::size_t(0), std::size_t(23), last}) {
    const auto o = build_observation(state, 0, task->target, task->plan, t);
    const auto oracle = observation_oracle(state, task->target, task->plan, t);
    REQUIRE(oracle.size() == kObservationSize);
    for (std::size_t i = 0; i < kObservationSize; ++i) CHECK(o[i] == oracle[i]);
  }
  CHECK(build_observation(state, 0, task->target, task->plan, 0)[obs_layout::kTime] == 0.0);
  CHECK(build_observation(state, 0, task->target, task->plan, last)[obs_layout::kTime] == 1.0);
  CHECK(code_of([&] { build_observation(state, 0, task->target, task->plan, last + 1); }) ==
        ErrorCode::kStepOutOfRange);
}

TEST_CASE("scratch observations hide the baseline") {
  auto task = testing::make_pick_place_task();
  EnvConfig cfg;
  cfg.mode = ActionMode::kScratch;
  auto env = task->factory(cfg)();
  const auto o = env->reset(1);
  for (std::size_t i = obs_layout::kGrasp; i < kObservationSize; ++i) CHECK(o[i] == 0.0);
  CHECK(o[obs_layout::kEe + 2] != 0.0);
}

TEST_CASE("apply_residual") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  SUBCASE("zero action reproduces the baseline") {
    for (int k = 0; k < 1000; ++k) {
      const Pose base(Vec3(u(rng), u(rng), u(rng)), random_quat(rng));
      for (bool close : {false, true}) {
        const auto cmd = apply_residual(base, to_residual(Action{}), close);
        CHECK(std::memcmp(cmd.target.p.data(), base.p.data(), sizeof(double) * 3) == 0);
        CHECK(quat_distance(cmd.target.q, base.q) <= 1e-12);
        CHECK(std::abs(cmd.target.q.coeffs().dot(base.q.coeffs())) == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(cmd.close == close);
      }
    }
  }
  SUBCASE("translation only") {
    const Pose base(Vec3(0.1, 0.2, 0.3), top_down(0.4));
    ResidualAction a;
    a.translation = Vec3(0.01, 0.0, 0.0);
    const auto cmd = apply_residual(base, a, false);
    CHECK(cmd.target.p.x() == doctest::Approx(0.11).epsilon(1e-15));
    CHECK(cmd.target.p.y() == 0.2);
    CHECK(quat_distance(cmd.target.q, base.q) <= 1e-15);
  }
  SUBCASE("rotation on identity base") {
    ResidualAction a;
    a.rotation = Vec3(0.0, 0.0, 0.1);
    const auto cmd = apply_residual(Pose(), a, false);
    const Quat oracle(std::cos(0.05), 0.0, 0.0, std::sin(0.05));
    CHECK((cmd.target.q.coeffs() - oracle.coeffs()).norm() <= 1e-12);
  }
  SUBCASE("raw actions are scaled then clamped") {
    const auto a = to_residual(Action{0.5, -3.0, 1.0, 0.25, 9.0, -9.0});
    CHECK(a.translation.x() == doctest::Approx(0.025));
    CHECK(a.translation.y() == -0.05);
    CHECK(a.translation.z() == 0.05);
    CHECK(a.rotation.x() == doctest::Approx(0.05));
    CHECK(a.rotation.y() == 0.2);
    CHECK(a.rotation.z() == -0.2);
  }
}

TEST_CASE("reward examples") {
  const RewardWeights w;
  const Pose p(Vec3(0.1, 0.2, 0.0), top_down(0.3));
  CHECK(reward_tracking(p, p, w) == doctest::Approx(1.5).epsilon(1e-15));
  const Pose far(p.p + Vec3(10.0, 0.0, 0.0), p.q);
  CHECK(reward_tracking(far, p, w) - 0.5 < 1e-6);
  const Pose near(p.p + Vec3(0.0, 0.1, 0.0), p.q);
  CHECK(reward_tracking(near, p, w) == doctest::Approx(std::exp(-1.0) + 0.5).epsilon(1e-14));
  CHECK(reward_tracking(near, p, w) == doctest::Approx(0.8679).epsilon(1e-4));

  const Vec3 o(0.0, 0.0, 0.0);
  CHECK(reward_grasp(o, o, true, w) == 0.0);
  CHECK(reward_grasp(Vec3(0.2, 0.0, 0.0), o, true, w) == -0.5);
  CHECK(reward_grasp(Vec3(0.2, 0.0, 0.0), o, false, w) == 0.0);
  CHECK(reward_grasp(Vec3(0.1, 0.0, 0.0), o, true, w) == 0.0);  // at the threshold
  CHECK(reward_plan(true, w) == 0.0);
  CHECK(reward_plan(false, w) == -0.1);
  double total = 0.0;
  const bool flags[] = {true, false, false, true, false};
  for (bool f : flags) total += reward_plan(f, w);
  CHECK(total == doctest::Approx(-0.3).epsilon(1e-15));

  RewardWeights bad;
  bad.w_pos = -1.0;
  CHECK(code_of([&] { bad.validate(); }) == ErrorCode::kInvalidArgument);
  bad = {};
  bad.grasp_distance = 0.0;
  CHECK(code_of([&] { bad.validate(); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("reward_tracking properties") {
  const RewardWeights w;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (int k = 0; k < 10000; ++k) {
    const Pose a(Vec3(u(rng), u(rng), u(rng)), random_quat(rng));
    const Pose b(Vec3(u(rng), u(rng), u(rng)), random_quat(rng));
    const double r = reward_tracking(a, b, w);
    CHECK(r > 0.0);
    CHECK(r <= 1.5);
    Pose flipped = a;
    flipped.q.coeffs() = -a.q.coeffs();  // bypasses canonicalization
    CHECK(reward_tracking(flipped, b, w) == r);
    const Pose further(b.p + 1.5 * (a.p - b.p), a.q);
    CHECK(reward_tracking(further, b, w) < r);
  }
}

TEST_CASE("gae hand-computed sequences") {
  const std::vector<double> r{1.0, 2.0, 3.0}, v{0.5, 1.0, 1.5};
  SUBCASE("lambda 0 is the one-step TD error") {
    const std::vector<std::uint8_t> d{0, 0, 0};
    const auto a = compute_gae(r, v, d, 2.0, 0.9, 0.0);
    CHECK(a[0] == doctest::Approx(1.4).epsilon(1e-15));
    CHECK(a[1] == doctest::Approx(2.35).epsilon(1e-15));
    CHECK(a[2] == doctest::Approx(3.3).epsilon(1e-15));
  }
  SUBCASE("lambda 1 gamma 1 is return minus value") {
    const std::vector<std::uint8_t> d{0, 0, 1};
    const auto a = compute_gae(r, v, d, 100.0, 1.0, 1.0);
    CHECK(a[0] == doctest::Approx(5.5).epsilon(1e-15));
    CHECK(a[1] == doctest::Approx(4.0).epsilon(1e-15));
    CHECK(a[2] == doctest::Approx(1.5).epsilon(1e-15));
  }
  SUBCASE("episode boundary inside the segment") {
    const std::vector<std::uint8_t> d{1, 0, 0};
    const auto a = compute_gae(r, v, d, 2.0, 1.0, 1.0);
    CHECK(a[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(a[1] == doctest::Approx(2.0 + 3.0 + 2.0 - 1.0).epsilon(1e-15));
    CHECK(a[2] == doctest::Approx(3.0 + 2.0 - 1.5).epsilon(1e-15));
  }
  const std::vector<std::uint8_t> short_dones{0};
  CHECK(code_of([&] { compute_gae(r, v, short_dones, 0.0, 0.9, 0.9); }) ==
        ErrorCode::kInvalidArgument);
}

TEST_CASE("policy parameters") {
  const auto p = PolicyParameters::initialize(3);
  CHECK(p.size() == (37 * 64 + 64 + 64 * 64 + 64 + 64 * 6 + 6) + 6 + (37 * 64 + 64 + 64 * 64 + 64 + 64 + 1));
  CHECK(p.finite());
  for (double s : p.log_std()) CHECK(s == -1.0);
  CHECK(PolicyParameters::initialize(3) == p);
  CHECK_FALSE(PolicyParameters::initialize(4) == p);
  // Near-zero actor output keeps the initial policy close to the baseline.
  Observation o{};
  o.fill(0.5);
  for (double a : actor_mean(p, o)) CHECK(std::abs(a) < 0.1);
  auto q = PolicyParameters::initialize(3, 7.0);
  for (double s : q.log_std()) CHECK(s == PolicyParameters::kMaxLogStd);
  CHECK(code_of([] { PolicyParameters({36, 64, 6}, {37, 64, 1}); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("gaussian log-prob and entropy") {
  auto p = PolicyParameters::initialize(1, -0.7);
  const Action mean{0.1, -0.2, 0.3, 0.0, 0.5, -0.5};
  const Action a{0.2, -0.1, 0.0, 0.3, 0.5, -0.9};
  double oracle = 0.0;
  const double s = std::exp(-0.7);
  for (std::size_t i = 0; i < kActionSize; ++i) {
    oracle += std::log(std::exp(-0.5 * std::pow((a[i] - mean[i]) / s, 2)) / (s * std::sqrt(2 * M_PI)));
  }
  CHECK(log_prob(p, mean, a) == doctest::Approx(oracle).epsilon(1e-13));
  CHECK(entropy(p) == doctest::Approx(6 * (0.5 * std::log(2 * M_PI * M_E) - 0.7)).epsilon(1e-14));
}

TEST_CASE("surrogate gradient matches central differences") {
  auto p = PolicyParameters::initialize(21, -0.5);
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g;
  for (auto& v : p.values()) v += 0.05 * g(rng);  // move off the near-zero output init
  p.clamp_log_std();
  const auto batch = random_batch(p, 16, 9, false);
  LossConfig cfg;
  std::vector<double> grad;
  ppo_loss(p, batch, cfg, &grad);

  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < kActionSize; ++i) idx.push_back(p.log_std_offset() + i);
  std::uniform_int_distribution<std::size_t> pick(0, p.size() - 1);
  while (idx.size() < 20) idx.push_back(pick(rng));
  for (std::size_t i : idx) {
    const double h = 1e-6;
    auto plus = p, minus = p;
    plus.values()[i] += h;
    minus.values()[i] -= h;
    const double fd = (ppo_loss(plus, batch, cfg, nullptr).total -
                       ppo_loss(minus, batch, cfg, nullptr).total) / (2 * h);
    const double rel = std::abs(grad[i] - fd) / std::max({std::abs(grad[i]), std::abs(fd), 1e-8});
    CAPTURE(i);
    CHECK(rel <= 1e-4);
  }
}

TEST_CASE("unbounded clip reduces to vanilla policy gradient") {
  const auto p = PolicyParameters::initialize(4, -0.8);
  const auto batch = random_batch(p, 64, 10, true);
  LossConfig cfg;
  cfg.clip = 1e300;
  std::vector<double> g_ppo, g_pg;
  const auto a = ppo_loss(p, batch, cfg, &g_ppo);
  const auto b = vanilla_pg_loss(p, batch, cfg, &g_pg);
  CHECK(a.value == b.value);
  double worst = 0.0;
  for (std::size_t i = 0; i < g_ppo.size(); ++i) worst = std::max(worst, std::abs(g_ppo[i] - g_pg[i]));
  CHECK(worst <= 1e-10);

  auto x = p.values(), y = p.values();
  Adam ax(x.size(), 3e-4), ay(y.size(), 3e-4);
  ax.step(x, g_ppo, 0.5);
  ay.step(y, g_pg, 0.5);
  worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, std::abs(x[i] - y[i]));
  CHECK(worst <= 1e-10);
}

TEST_CASE("adam clips by global norm") {
  std::vector<double> p{0.0, 0.0}, g{30.0, 40.0};
  Adam adam(2, 0.1);
  adam.step(p, g, 5.0);
  CHECK(g[0] == doctest::Approx(3.0));
  CHECK(g[1] == doctest::Approx(4.0));
  // First bias-corrected step moves each coordinate by lr * sign(g).
  CHECK(p[0] == doctest::Approx(-0.1).epsilon(1e-6));
  CHECK(p[1] == doctest::Approx(-0.1).epsilon(1e-6));
  std::vector<double> bad{NAN, 0.0};
  CHECK(code_of([&] { adam.step(p, bad, 1.0); }) == ErrorCode::kNonFiniteLoss);
}

TEST_CASE("ppo config validation") {
  PpoConfig c;
  CHECK_NOTHROW(c.validate());
  c.gamma = 0.0;
  CHECK_NOTHROW(c.validate());
  c.gamma = 1.01;
  CHECK(code_of([&] { c.validate(); }) == ErrorCode::kInvalidArgument);
  c = {};
  c.gae_lambda = -0.1;
  CHECK(code_of([&] { c.validate(); }) == ErrorCode::kInvalidArgument);
  c = {};
  c.clip = 0.0;
  CHECK(code_of([&] { c.validate(); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("zero-reward environment") {
  auto task = testing::make_pick_place_task();
  EnvConfig cfg;
  cfg.weights = {0, 0, 0, 0, 0, 0.1, 0};
  auto result = ppo_train(task->factory(cfg), small_config(3));
  REQUIRE(result.curve.size() == 3);
  for (const auto& s : result.curve) {
    CHECK(s.mean_return == 0.0);
    CHECK(s.mean_r_trk == 0.0);
  }
  for (double s : result.params.log_std()) {
    CHECK(s >= PolicyParameters::kMinLogStd);
    CHECK(s <= PolicyParameters::kMaxLogStd);
  }
}

TEST_CASE("synthetic tracking task improves and is reproducible") {
  const EnvFactory factory = [] { return std::make_unique<LineEnv>(); };
  const auto config = small_config(200);
  const auto a = ppo_train(factory, config);
  const double first = a.curve.front().mean_return;
  const double last = a.curve.back().mean_return;
  MESSAGE("mean return " << first << " -> " << last);
  CHECK(last >= 1.5 * first);

  auto short_config = config;
  short_config.iterations = 20;
  const auto b = ppo_train(factory, short_config);
  const auto c = ppo_train(factory, short_config);
  REQUIRE(b.curve.size() == c.curve.size());
  for (std::size_t i = 0; i < b.curve.size(); ++i) CHECK(b.curve[i].mean_return == c.curve[i].mean_return);
  CHECK(b.params == c.params);
  for (std::size_t i = 0; i < b.curve.size(); ++i) CHECK(b.curve[i].mean_return == a.curve[i].mean_return);

  auto threaded = short_config;
  threaded.threads = 3;
  CHECK(ppo_train(factory, threaded).params == b.params);
}

TEST_CASE("environment feasibility fallback and plan penalty") {
  auto task = testing::make_pick_place_task();
  ManipulationEnv env(task->context, 0, &task->target, &task->plan, {});
  env.reset(2);
  EnvConfig scratch;
  scratch.mode = ActionMode::kScratch;
  ManipulationEnv far(task->context, 0, &task->target, &task->plan, scratch);
  far.reset(2);
  const Pose before = far.world().gripper.pose;
  // An absolute command to the edge of the range breaks the rate limit.
  const auto r = far.step(Action{1.0, 1.0, -1.0, 0.0, 0.0, 0.0});
  CHECK_FALSE(far.last_feasible());
  CHECK(r.r_plan == -0.1);
  CHECK(far.last_command().target.p == before.p);
  const auto ok = env.step(Action{});
  CHECK(env.last_feasible());
  CHECK(ok.r_plan == 0.0);
  CHECK(env.last_command().target.p == task->plan.planned[0].p);
}

TEST_CASE("evaluate") {
  SUBCASE("zero residual on a perfect baseline succeeds") {
    auto task = testing::make_pick_place_task();
    const auto report = evaluate(PolicyParameters{}, task->factory(), 10);
    CHECK(report.episodes == 10);
    CHECK(report.success_rate == 1.0);
    CHECK(report.mean_position_error < 0.03);
  }
  SUBCASE("an injected grasp offset fails") {
    auto task = testing::make_pick_place_task(Vec3(0.04, 0.0, 0.0));
    const auto report = evaluate(PolicyParameters{}, task->factory(), 10);
    CHECK(report.success_rate == 0.0);
    CHECK(report.mean_position_error > 0.03);
  }
}

TEST_CASE("checkpoint round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "physworld_test_rl";
  std::filesystem::create_directories(dir);
  Checkpoint c;
  c.params = PolicyParameters::initialize(12);
  c.config.seed = 99;
  c.config.iterations = 17;
  c.weights.w_plan = 0.25;
  c.mode = ActionMode::kScratch;
  save_checkpoint(dir / "p.pwpl", c);
  const auto back = load_checkpoint(dir / "p.pwpl");
  CHECK(back.params == c.params);
  CHECK(back.config.seed == 99);
  CHECK(back.config.iterations == 17);
  CHECK(back.config.learning_rate == c.config.learning_rate);
  CHECK(back.weights.w_plan == 0.25);
  CHECK(back.mode == ActionMode::kScratch);

  {
    std::ofstream bad(dir / "bad.pwpl", std::ios::binary);
    bad << "PWPX";
  }
  CHECK(code_of([&] { load_checkpoint(dir / "bad.pwpl"); }) == ErrorCode::kFormat);
  std::filesystem::resize_file(dir / "p.pwpl", std::filesystem::file_size(dir / "p.pwpl") - 3);
  CHECK(code_of([&] { load_checkpoint(dir / "p.pwpl"); }) == ErrorCode::kFormat);
  CHECK(code_of([&] { load_checkpoint(dir / "missing.pwpl"); }) == ErrorCode::kIo);

  write_curve_csv(dir / "curve.csv", {{0, 1.5, 0.5, -0.25, 0.0, 0.5, 4, {}}});
  std::ifstream in(dir / "curve.csv");
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  CHECK(header == "iteration,mean_return,mean_r_trk,mean_r_grasp,mean_r_plan,success_rate,episodes");
  CHECK(row == "0,1.5,0.5,-0.25,0,0.5,4");
  std::filesystem::remove_all(dir);
}

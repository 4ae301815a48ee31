#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <doctest.h>

#include "slide/environment.hpp"
#include "slide/optimal.hpp"
#include "support.hpp"

using namespace slide;

namespace {

SlideResult result_with_rom(double rom) {
  SlideResult r(build_velocity_profile(validate_action({3.0, -4.2, 0.5})));
  r.rom = rom;
  return r;
}

std::vector<EpisodeStats> constant_window(int n, double accuracy, double imitation) {
  return std::vector<EpisodeStats>(static_cast<std::size_t>(n), EpisodeStats{accuracy, imitation});
}

}  // namespace

TEST_CASE("reset per stage") {
  const Environment env;
  std::mt19937_64 rng(1);

  SUBCASE("early stages use the fixed task") {
    for (Stage s : {Stage::Imitation, Stage::PerfFixed}) {
      const auto [state, cfg] = env.reset(s, rng);
      CHECK(cfg.d_des == 0.08);
      CHECK(cfg.mu_e_given == cfg.mu_k_true);
      CHECK(state.d_remaining == 0.08);
      CHECK(state.history_len == 0);
    }
  }
  SUBCASE("distance stage samples the distance range") {
    double lo = 1.0, hi = 0.0;
    for (int i = 0; i < 10000; ++i) {
      const auto cfg = env.reset(Stage::PerfDistances, rng).second;
      lo = std::min(lo, cfg.d_des);
      hi = std::max(hi, cfg.d_des);
      CHECK(cfg.mu_k_true == 0.24);
    }
    CHECK(lo >= 0.02);
    CHECK(hi <= 0.2);
    CHECK(hi - lo > 0.17);
  }
  SUBCASE("friction stage samples the friction range") {
    double lo = 1.0, hi = 0.0;
    for (int i = 0; i < 10000; ++i) {
      const auto cfg = env.reset(Stage::PerfFrictions, rng).second;
      lo = std::min(lo, cfg.mu_k_true);
      hi = std::max(hi, cfg.mu_k_true);
      CHECK(cfg.mu_e_given == cfg.mu_k_true);
    }
    CHECK(lo >= 0.05);
    CHECK(hi <= 0.45);
  }
  SUBCASE("randomized stages perturb only the estimate") {
    for (int i = 0; i < 10000; ++i) {
      const auto [state, cfg] = env.reset(Stage::DR1, rng);
      const double gap = std::abs(cfg.mu_e_given - cfg.mu_k_true);
      if (cfg.mu_e_given > 0.01) {
        CHECK(gap >= 0.05 - 1e-12);
        CHECK(gap <= 0.1 + 1e-12);
      }
      CHECK(state.mu_e == cfg.mu_e_given);
    }
    for (int i = 0; i < 10000; ++i) {
      const auto cfg = env.reset(Stage::DR2, rng).second;
      if (cfg.mu_e_given > 0.01) CHECK(std::abs(cfg.mu_e_given - cfg.mu_k_true) <= 0.15 + 1e-12);
    }
  }
}

TEST_CASE("randomize_mu") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 200; ++i) {
    const double m = randomize_mu(0.24, {0.1, 0.1}, rng);
    CHECK((m == doctest::Approx(0.34) || m == doctest::Approx(0.14)));
  }
  bool floored = false;
  for (int i = 0; i < 200; ++i) {
    const double m = randomize_mu(0.05, {0.05, 0.05}, rng);
    CHECK(m >= 0.01);
    floored = floored || m == 0.01;
  }
  CHECK(floored);

  double bias = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) bias += randomize_mu(0.24, {0.05, 0.15}, rng) - 0.24;
  CHECK(std::abs(bias / n) < 1e-3);
}

TEST_CASE("state assembly") {
  SUBCASE("fresh episode golden vector") {
    const StateVec s = assemble_state(0.08, {}, 0.25);
    const StateVec golden{0.8, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0.5};
    for (int k = 0; k < kStateDim; ++k) CHECK(s[k] == doctest::Approx(golden[k]));
  }
  SUBCASE("one action fills slot one only") {
    EnvState st;
    st.d_remaining = 0.03;
    st.mu_e = 0.2;
    st.push({{2.1, -4.2, 1.0}, 0.05});
    const StateVec s = st.normalized();
    CHECK(s[0] == doctest::Approx(0.3));
    CHECK(s[1] == doctest::Approx(0.5));
    CHECK(s[2] == doctest::Approx(-1.0));
    CHECK(s[3] == doctest::Approx(0.5));
    for (int k = 4; k <= 9; ++k) CHECK(s[k] == 0.0);
    CHECK(s[10] == doctest::Approx(0.5));
    CHECK(s[11] == 0.0);
    CHECK(s[12] == 0.0);
    CHECK(s[13] == doctest::Approx(0.4));
  }
  SUBCASE("history keeps the newest three") {
    EnvState st;
    for (int i = 1; i <= 4; ++i) st.push({{0.1 * i, -0.1 * i, 0.1 * i}, 0.01 * i});
    CHECK(st.history_len == 3);
    CHECK(st.history[0].displacement == doctest::Approx(0.04));
    CHECK(st.history[2].displacement == doctest::Approx(0.02));
  }
  SUBCASE("features stay bounded") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> acc(-kMaxAccel, kMaxAccel), tm(0.0, 2.0), d(-0.2, 0.2),
        mu(0.01, 0.6);
    for (int i = 0; i < 10000; ++i) {
      EnvState st;
      st.d_remaining = d(rng);
      st.mu_e = mu(rng);
      const int n = i % 4;
      for (int k = 0; k < n; ++k) st.push({{acc(rng), acc(rng), tm(rng)}, d(rng)});
      for (double f : st.normalized()) CHECK((f >= -2.0 && f <= 2.0));
    }
  }
}

TEST_CASE("step") {
  const Environment env;
  EpisodeConfig cfg;
  cfg.d_des = 0.08;
  cfg.mu_k_true = 0.24;
  cfg.mu_e_given = 0.24;

  SUBCASE("no-slip action leaves the distance unchanged") {
    const EnvState s0 = env.initial_state(cfg);
    const auto out = env.step(cfg, s0, {2.0, -2.0, 0.5}, Stage::PerfFixed);
    CHECK(out.achieved == 0.0);
    CHECK(out.next.d_remaining == s0.d_remaining);
    CHECK_FALSE(out.done);
    CHECK(out.reward < 0.0);
  }
  SUBCASE("exact action succeeds in one step") {
    const auto opt = optimal_action(cfg.d_des, env.friction(cfg.mu_k_true));
    const auto out = env.step(cfg, env.initial_state(cfg), opt.action.raw(), Stage::PerfFixed);
    CHECK(out.done);
    CHECK(out.success);
    CHECK(out.reward > 5.0);
    REQUIRE(out.info);
    CHECK(out.next.d_remaining == cfg.d_des - out.info->delta_x_rel);
  }
  SUBCASE("max steps without success ends the episode") {
    cfg.max_steps = 3;
    EnvState s = env.initial_state(cfg);
    StepOutcome out;
    for (int i = 0; i < 3; ++i) {
      out = env.step(cfg, s, {0.5, -0.5, 0.3}, Stage::PerfFixed);
      s = out.next;
    }
    CHECK(out.done);
    CHECK_FALSE(out.success);
  }
  SUBCASE("invalid action is a penalized no-op") {
    const auto out = env.step(cfg, env.initial_state(cfg), {5.0, -4.2, 0.5}, Stage::PerfFixed);
    CHECK(out.reward == -1.0);
    CHECK(out.next.d_remaining == cfg.d_des);
    REQUIRE(out.error);
    CHECK(*out.error == ErrorCode::AccelOutOfRange);
    CHECK(out.next.steps_taken == 1);
  }
  SUBCASE("bookkeeping is exact") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> acc(0.5, kMaxAccel), tm(0.05, 1.0);
    EnvState s = env.initial_state(cfg);
    cfg.max_steps = 50;
    for (int i = 0; i < 20; ++i) {
      const double dir = s.d_remaining >= 0.0 ? 1.0 : -1.0;
      const auto out = env.step(cfg, s, {dir * acc(rng), -dir * acc(rng), tm(rng)}, Stage::DR2);
      CHECK(out.next.d_remaining == s.d_remaining - out.achieved);
      s = out.next;
    }
  }
  SUBCASE("the estimate never reaches the simulator") {
    EpisodeConfig other = cfg;
    other.mu_e_given = 0.39;
    const RawAction a{3.0, -4.2, 0.8};
    const auto x = env.step(cfg, env.initial_state(cfg), a, Stage::DR2);
    const auto y = env.step(other, env.initial_state(other), a, Stage::DR2);
    REQUIRE(x.info);
    REQUIRE(y.info);
    CHECK(x.achieved == y.achieved);
    CHECK(x.info->trace.x_rel == y.info->trace.x_rel);
    CHECK(y.next.mu_e == 0.39);
  }
}

TEST_CASE("imitation reward") {
  const FrictionModel f = FrictionModel::coulomb(0.24);
  const double t_star = 0.7;
  const RawAction best{f.mu_s * f.g, -kMaxAccel, t_star};
  CHECK(reward_imitation(best, f, t_star) == doctest::Approx(0.0));
  const double r_zero_am = reward_imitation({best.a_i, 0.0, t_star}, f, t_star);
  CHECK(r_zero_am == doctest::Approx(-1.0));

  const RawAction start{0.3, -1.0, 1.9};
  double prev = -1e9;
  for (int k = 0; k <= 20; ++k) {
    const double s = k / 20.0;
    const RawAction a{start.a_i + s * (best.a_i - start.a_i), start.a_m + s * (best.a_m - start.a_m),
                      start.t_m + s * (t_star - start.t_m)};
    const double r = reward_imitation(a, f, t_star);
    if (k > 0) CHECK(r > prev);
    prev = r;
  }
}

TEST_CASE("performance reward") {
  EpisodeConfig cfg;
  cfg.d_des = 0.08;
  const double rom_max = kDefaultRomMax;

  const double perfect = reward_performance(result_with_rom(0.1), cfg, 0.08, 0.0, 1, 1.2, true, rom_max);
  CHECK(perfect == doctest::Approx(2.0 - 0.1 - 0.05 * 1.2 + 5.0));

  const double idle = reward_performance(result_with_rom(0.0), cfg, 0.08, 0.08, 1, 0.8, false, rom_max);
  CHECK(idle == doctest::Approx(-0.1 - 0.05 * 0.8));
  CHECK(idle < 0.0);

  const double within = reward_performance(result_with_rom(rom_max), cfg, 0.08, 0.04, 1, 1.0, false, rom_max);
  const double doubled =
      reward_performance(result_with_rom(2.0 * rom_max), cfg, 0.08, 0.04, 1, 1.0, false, rom_max);
  CHECK(doubled - within == doctest::Approx(-2.0));

  SUBCASE("first step matches the absolute accuracy form") {
    RewardWeights absolute;
    absolute.accuracy_progress = false;
    for (double rem : {-0.03, 0.0, 0.01, 0.05, 0.08}) {
      const auto r = result_with_rom(0.2);
      CHECK(reward_performance(r, cfg, 0.08, rem, 1, 1.0, false, rom_max) ==
            doctest::Approx(reward_performance(r, cfg, 0.08, rem, 1, 1.0, false, rom_max, absolute)));
    }
  }
  SUBCASE("later steps earn only the error reduction") {
    const double r = reward_performance(result_with_rom(0.1), cfg, 0.02, 0.01, 2, 0.5, false, rom_max);
    CHECK(r == doctest::Approx(2.0 * 0.01 / 0.08 - 0.2 - 0.025));
  }
  SUBCASE("reward is floored") {
    const double r = reward_performance(result_with_rom(20.0), cfg, 0.08, 0.08, 1, 1.0, false, rom_max);
    CHECK(r == -10.0);
  }
  SUBCASE("small distances use the minimum scale") {
    cfg.d_des = 0.005;
    const double r = reward_performance(result_with_rom(0.0), cfg, 0.005, 0.0, 1, 0.0, false, rom_max);
    CHECK(r == doctest::Approx(2.0 * 0.005 / 0.02 - 0.1));
  }
}

TEST_CASE("accuracy metric") {
  CHECK(accuracy(0.07, 0.08) == doctest::Approx(0.875));
  CHECK(accuracy(0.08, 0.08) == 1.0);
  CHECK(accuracy(0.0, 0.08) == 0.0);
  CHECK(accuracy(0.3, 0.08) == 0.0);
  CHECK(accuracy(-0.07, -0.08) == doctest::Approx(0.875));
}

TEST_CASE("curriculum promotion") {
  const EnvParams p;
  CHECK(curriculum_advance(Stage::PerfFixed, constant_window(200, 0.9, 0.0), p) == Stage::PerfDistances);
  CHECK(curriculum_advance(Stage::PerfFixed, constant_window(200, 0.5, 0.0), p) == Stage::PerfFixed);
  CHECK(curriculum_advance(Stage::PerfFixed, constant_window(199, 0.9, 0.0), p) == Stage::PerfFixed);
  CHECK(curriculum_advance(Stage::Imitation, constant_window(200, 0.0, -0.01), p) == Stage::PerfFixed);
  CHECK(curriculum_advance(Stage::Imitation, constant_window(200, 1.0, -0.2), p) == Stage::Imitation);
  CHECK(curriculum_advance(Stage::DR2, constant_window(200, 1.0, 0.0), p) == Stage::DR2);

  Curriculum c(p);
  int last = 0;
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> acc(0.8, 1.0), imit(-0.08, 0.0);
  for (int i = 0; i < 5000; ++i) {
    c.record({acc(rng), imit(rng)});
    CHECK(static_cast<int>(c.stage()) >= last);
    last = static_cast<int>(c.stage());
  }
  CHECK(c.stage() == Stage::DR2);
  CHECK_FALSE(c.promote());

  Curriculum forced(p, Stage::DR1);
  CHECK(forced.promote());
  CHECK(forced.stage() == Stage::DR2);
}

TEST_CASE("stage names round trip") {
  for (int k = 0; k < kNumStages; ++k) {
    const auto s = static_cast<Stage>(k);
    CHECK(stage_from_string(to_string(s)) == s);
  }
  slide::test::check_error(ErrorCode::InvalidArgument, [] { stage_from_string("bogus"); });
}

// Dynamics: acceleration formulas against hand-derived values, scheme update
// ordering, reward conventions, rollouts with termination and velocity
// saturation, and interval one-step maps as enclosures of float trajectories.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "orbitcert/controllers.hpp"
#include "orbitcert/dynamics.hpp"
#include "orbitcert/interval.hpp"
#include "orbitcert/rng.hpp"

using namespace orbitcert;

namespace {

const auto zero_ctrl = [](const auto& obs) { return scalar_like(obs[0], 0.0); };

auto const_ctrl(double value) {
    return [value](const auto& obs) { return scalar_like(obs[0], value); };
}

}  // namespace

TEST_CASE("pendulum acceleration at reference points") {
    const PendulumConstants c;  // l = m = 1, g = 10
    // Upright with torque 2: pure control term 3u.
    CHECK(pendulum_accel(c, 0.0, 0.0, 2.0) == doctest::Approx(6.0).epsilon(1e-14));
    // Horizontal, no torque: pure gravity term 3g/(2l).
    CHECK(pendulum_accel(c, M_PI / 2.0, 0.0, 0.0) == doctest::Approx(15.0).epsilon(1e-14));
    // Hanging down: equilibrium.
    CHECK(std::abs(pendulum_accel(c, M_PI, 0.0, 0.0)) <= 1e-13);
}

TEST_CASE("cartpole accelerations at reference points") {
    const CartpoleConstants cc;  // m_p=0.5 l=0.6 m_c=0.5 g=9.82 f=0.1
    {
        // Hanging down at rest with no force: equilibrium.
        const auto [th_dd, x_dd] = cartpole_accels(cc, M_PI, 0.0, 0.0, 0.0);
        CHECK(std::abs(th_dd) <= 1e-13);
        CHECK(std::abs(x_dd) <= 1e-13);
    }
    {
        // Upright at rest, force u = 5:
        //   theta_dd = 6u / (4(m_p+m_c)l - 3 m_p l) = 30 / (2.4 - 0.9) = 20
        //   x_dd     = 4u / (4(m_p+m_c) - 3 m_p)    = 20 / (4 - 1.5)   = 8
        const auto [th_dd, x_dd] = cartpole_accels(cc, 0.0, 0.0, 0.0, 5.0);
        CHECK(th_dd == doctest::Approx(20.0).epsilon(1e-13));
        CHECK(x_dd == doctest::Approx(8.0).epsilon(1e-13));
    }
    {
        // Interval evaluation around the hanging equilibrium encloses it and
        // proves the denominators positive (no DomainError).
        const Interval th = inflate(Interval(M_PI), 0.1);
        const auto [th_dd, x_dd] = cartpole_accels(
            cc, th, Interval(-0.1, 0.1), Interval(-0.1, 0.1), Interval(0.0));
        CHECK(th_dd.contains(0.0));
        CHECK(x_dd.contains(0.0));
    }
}

TEST_CASE("explicit Euler advances positions from the old velocity") {
    const MdpConfig cfg = MdpConfig::pendulum_default(Scheme::Explicit, 0.05);
    const std::vector<double> next = step(cfg, std::vector<double>{0.0, 1.0}, zero_ctrl);
    CHECK(next[0] == 0.05);  // theta + h * omega_old, exact in binary
    CHECK(next[1] == 1.0);   // accel vanishes at theta = 0
}

TEST_CASE("semi-implicit Euler advances positions from the new velocity") {
    const MdpConfig e_cfg = MdpConfig::pendulum_default(Scheme::Explicit, 0.05);
    const MdpConfig si_cfg = MdpConfig::pendulum_default(Scheme::SemiImplicit, 0.05);
    const std::vector<double> x0{0.3, 1.0};
    const auto e_next = step(e_cfg, x0, zero_ctrl);
    const auto si_next = step(si_cfg, x0, zero_ctrl);
    CHECK(si_next[1] == e_next[1]);  // same velocity update
    CHECK(e_next[0] == doctest::Approx(0.3 + 0.05 * 1.0).epsilon(1e-15));
    CHECK(si_next[0] == doctest::Approx(0.3 + 0.05 * si_next[1]).epsilon(1e-15));
    CHECK(si_next[0] != e_next[0]);
}

TEST_CASE("hanging pendulum is a fixed point of both schemes") {
    for (const Scheme scheme : {Scheme::Explicit, Scheme::SemiImplicit}) {
        const MdpConfig cfg = MdpConfig::pendulum_default(scheme, 0.05);
        const auto next = step(cfg, std::vector<double>{M_PI, 0.0}, zero_ctrl);
        CHECK(next[0] == doctest::Approx(M_PI).epsilon(1e-15));
        CHECK(std::abs(next[1]) <= 1e-14);
    }
}

TEST_CASE("scheme gap at one step shrinks quadratically with the step size") {
    const std::vector<double> x0{0.3, 1.0};
    const auto gap = [&](double h) {
        const auto e = step(MdpConfig::pendulum_default(Scheme::Explicit, h), x0, zero_ctrl);
        const auto si = step(MdpConfig::pendulum_default(Scheme::SemiImplicit, h), x0, zero_ctrl);
        return std::abs(e[0] - si[0]);
    };
    CHECK(gap(0.05) / gap(0.025) == doctest::Approx(4.0).epsilon(1e-9));
}

TEST_CASE("schemes agree bit for bit on torque-free gravity-free motion") {
    MdpConfig e_cfg = MdpConfig::pendulum_default(Scheme::Explicit, 0.05);
    MdpConfig si_cfg = MdpConfig::pendulum_default(Scheme::SemiImplicit, 0.05);
    e_cfg.pendulum.g = 0.0;
    si_cfg.pendulum.g = 0.0;
    std::vector<double> e_state{0.4, 1.3}, si_state{0.4, 1.3};
    for (int k = 0; k < 20; ++k) {
        e_state = step(e_cfg, e_state, zero_ctrl);
        si_state = step(si_cfg, si_state, zero_ctrl);
        CHECK(e_state[0] == si_state[0]);
        CHECK(e_state[1] == si_state[1]);
    }
}

TEST_CASE("pendulum reward is zero at the goal and bounded on the state box") {
    CHECK(pendulum_reward(0.0, 0.0, 0.0) == 0.0);
    // Angle cost uses the wrapped distance, so full turns cost nothing.
    CHECK(std::abs(pendulum_reward(2.0 * M_PI, 0.0, 0.0)) <= 1e-15);
    CHECK(pendulum_reward(M_PI, 0.0, 0.0) == doctest::Approx(-M_PI * M_PI).epsilon(1e-12));

    Rng rng(11);
    const double floor = -(M_PI * M_PI + 0.1 * 64.0 + 0.001 * 4.0);
    for (int k = 0; k < 1000; ++k) {
        const double r = pendulum_reward(rng.uniform(-10.0, 10.0), rng.uniform(-8.0, 8.0),
                                         rng.uniform(-2.0, 2.0));
        CHECK(r <= 0.0);
        CHECK(r >= floor - 1e-12);
    }
}

TEST_CASE("cartpole reward is the upright cosine") {
    CHECK(cartpole_reward(std::vector<double>{0.0, 0.0, 0.0, 0.0}) == 1.0);
    CHECK(cartpole_reward(std::vector<double>{5.0, 1.0, M_PI, 2.0}) == -1.0);
}

TEST_CASE("shaped cartpole penalty matches its definition at a spot point") {
    const std::vector<double> s{1.0, 0.5, M_PI / 3.0, -2.0};
    const double expect = -std::cos(M_PI / 3.0) + 0.5 * 4.0 + 0.5 * 0.25;
    CHECK(cartpole_shaped_penalty(s) == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("accumulated shaped penalty sums pre-step states") {
    const MdpConfig cfg = MdpConfig::cartpole_default(Scheme::SemiImplicit, 0.01);
    const Trajectory traj = rollout(cfg, zero_ctrl, {0.0, 0.0, M_PI - 0.03, 0.02}, 5);
    double manual = 0.0;
    for (int k = 0; k < 5; ++k) manual += cartpole_shaped_penalty(traj.states[static_cast<std::size_t>(k)]);
    CHECK(accumulated_shaped_penalty(traj) == doctest::Approx(manual).epsilon(1e-14));
    CHECK(accumulated_penalty(cfg, zero_ctrl, {0.0, 0.0, M_PI - 0.03, 0.02}, 5) ==
          doctest::Approx(manual).epsilon(1e-14));
}

TEST_CASE("pendulum penalty is the negated return") {
    const MdpConfig cfg = MdpConfig::pendulum_default(Scheme::SemiImplicit, 0.05);
    const Trajectory traj = rollout(cfg, zero_ctrl, {0.3, 0.0}, 40);
    CHECK(accumulated_penalty(cfg, zero_ctrl, {0.3, 0.0}, 40) ==
          doctest::Approx(-traj.return_sum).epsilon(1e-14));
}

TEST_CASE("swing-up policy earns a mid-range mean return on random episodes") {
    const MdpConfig cfg = MdpConfig::pendulum_default(Scheme::SemiImplicit, 0.05);
    const ControllerSpec ctrl = builtin("landajuela_a1");
    const InitialDistribution dist = cfg.episode_distribution();
    Rng rng(12345);
    double total = 0.0;
    for (int ep = 0; ep < 100; ++ep) {
        const Trajectory traj = rollout(cfg, ctrl.as_fn(), dist.sample(rng), cfg.episode_len);
        total += traj.return_sum;
    }
    const double mean = total / 100.0;
    CHECK(mean >= -250.0);
    CHECK(mean <= -90.0);
}

TEST_CASE("velocity clip saturates the angular rate at the bound") {
    const MdpConfig cfg = MdpConfig::pendulum_default(Scheme::Explicit, 0.05);
    const Trajectory traj = rollout(cfg, const_ctrl(2.0), {0.0, 7.9}, 1);
    CHECK(traj.states[1][1] == 8.0);  // 7.9 + 0.05*6 = 8.2, clipped
    CHECK(traj.clipped_actions[0] == 2.0);
}

TEST_CASE("raw actions are clipped before scaling") {
    MdpConfig cfg = MdpConfig::cartpole_default(Scheme::Explicit, 0.01);
    CHECK(cfg.control_scale == 10.0);
    CHECK(clip_and_scale_action(cfg, 0.5) == 5.0);
    CHECK(clip_and_scale_action(cfg, 3.7) == 10.0);  // clipped to 1.0, then x10
    const Trajectory traj = rollout(cfg, const_ctrl(3.7), {0.0, 0.0, M_PI, 0.0}, 1);
    CHECK(traj.raw_actions[0] == 3.7);
    CHECK(traj.clipped_actions[0] == 1.0);  // stored clipped but unscaled
}

TEST_CASE("cartpole episodes terminate when the cart escapes") {
    MdpConfig cfg = MdpConfig::cartpole_default(Scheme::Explicit, 0.01);
    REQUIRE(cfg.terminations_enabled);
    const Trajectory traj = rollout(cfg, const_ctrl(2.0), {0.0, 0.0, M_PI, 0.0}, 1000);
    REQUIRE(traj.terminated_at.has_value());
    CHECK(traj.steps_done() < 1000);
    CHECK(std::abs(traj.states.back()[0]) > cfg.x_escape);

    cfg.terminations_enabled = false;
    const Trajectory free_run = rollout(cfg, const_ctrl(2.0), {0.0, 0.0, M_PI, 0.0}, 60);
    CHECK_FALSE(free_run.terminated_at.has_value());
    CHECK(free_run.steps_done() == 60);
}

TEST_CASE("stabilization time is zero at the goal and maximal off it") {
    const MdpConfig cfg = MdpConfig::pendulum_default(Scheme::SemiImplicit, 0.05);
    const Trajectory at_goal = rollout(cfg, zero_ctrl, {0.0, 0.0}, 10);
    CHECK(first_stabilization_time(cfg, at_goal, 1e-2) == 0.0);
    const Trajectory hanging = rollout(cfg, zero_ctrl, {M_PI, 0.0}, 10);
    CHECK(first_stabilization_time(cfg, hanging, 1e-2) ==
          doctest::Approx(10 * 0.05).epsilon(1e-12));
}

TEST_CASE("interval one-step maps enclose sampled float trajectories") {
    Rng rng(808);
    for (const Scheme scheme : {Scheme::Explicit, Scheme::SemiImplicit}) {
        const MdpConfig cfg = MdpConfig::pendulum_default(scheme, 0.05);
        const std::vector<double> center{0.3, 0.5};
        const double delta = 1e-6;
        std::vector<Interval> box{inflate(Interval(center[0]), delta),
                                  inflate(Interval(center[1]), delta)};

        std::vector<std::vector<double>> points;
        for (int k = 0; k < 10; ++k)
            points.push_back({rng.uniform(center[0] - delta, center[0] + delta),
                              rng.uniform(center[1] - delta, center[1] + delta)});

        for (int n = 0; n < 20; ++n) {
            box = step(cfg, box, zero_ctrl);
            for (auto& p : points) {
                p = step(cfg, p, zero_ctrl);
                CHECK(box[0].contains(p[0]));
                CHECK(box[1].contains(p[1]));
            }
        }
    }
}

TEST_CASE("observations expose the trig embedding of the angle") {
    const auto pend = compute_observation(SystemKind::Pendulum, std::vector<double>{0.5, -1.2});
    REQUIRE(pend.size() == 3);
    CHECK(pend[0] == std::cos(0.5));
    CHECK(pend[1] == std::sin(0.5));
    CHECK(pend[2] == -1.2);

    const auto cart =
        compute_observation(SystemKind::CartpoleSwingup, std::vector<double>{1.0, 2.0, 0.5, 3.0});
    REQUIRE(cart.size() == 5);
    CHECK(cart[0] == 1.0);
    CHECK(cart[1] == 2.0);
    CHECK(cart[2] == std::cos(0.5));
    CHECK(cart[3] == std::sin(0.5));
    CHECK(cart[4] == 3.0);
}

TEST_CASE("config validation rejects malformed setups") {
    MdpConfig cfg = MdpConfig::pendulum_default(Scheme::Explicit, 0.05);
    cfg.h = -1.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

    MdpConfig bad_dist = MdpConfig::pendulum_default(Scheme::Explicit, 0.05);
    bad_dist.initial_distribution = InitialDistribution{{{0.0, 1.0}}};  // wrong dimension
    CHECK_THROWS_AS(bad_dist.validate(), std::invalid_argument);

    MdpConfig inverted = MdpConfig::pendulum_default(Scheme::Explicit, 0.05);
    inverted.initial_distribution = InitialDistribution{{{1.0, 0.0}, {0.0, 0.0}}};
    CHECK_THROWS_AS(inverted.validate(), std::invalid_argument);

    MdpConfig ok = MdpConfig::pendulum_default(Scheme::Explicit, 0.05);
    ok.initial_distribution = InitialDistribution{{{3.14, 3.15}, {0.0, 0.0}}};
    CHECK_NOTHROW(ok.validate());
}

TEST_CASE("name round trips for systems and schemes") {
    CHECK(system_from_string(to_string(SystemKind::Pendulum)) == SystemKind::Pendulum);
    CHECK(system_from_string(to_string(SystemKind::CartpoleSwingup)) == SystemKind::CartpoleSwingup);
    CHECK(scheme_from_string(to_string(Scheme::Explicit)) == Scheme::Explicit);
    CHECK(scheme_from_string(to_string(Scheme::SemiImplicit)) == Scheme::SemiImplicit);
    CHECK_THROWS_AS(system_from_string("acrobot"), std::invalid_argument);
    CHECK_THROWS_AS(scheme_from_string("rk4"), std::invalid_argument);
}

TEST_CASE("default episode distributions match the benchmark boxes") {
    const MdpConfig pend = MdpConfig::pendulum_default(Scheme::SemiImplicit, 0.05);
    const auto pd = pend.episode_distribution();
    REQUIRE(pd.ranges.size() == 2);
    CHECK(pd.ranges[0].lo == doctest::Approx(-M_PI));
    CHECK(pd.ranges[0].hi == doctest::Approx(M_PI));
    CHECK(pd.ranges[1].lo == -1.0);
    CHECK(pd.ranges[1].hi == 1.0);

    const MdpConfig cart = MdpConfig::cartpole_default(Scheme::SemiImplicit, 0.01);
    const auto cd = cart.episode_distribution();
    REQUIRE(cd.ranges.size() == 4);
    CHECK(cd.ranges[2].lo == doctest::Approx(M_PI - 0.05));
    CHECK(cd.ranges[2].hi == doctest::Approx(M_PI + 0.05));

    MdpConfig overridden = pend;
    overridden.initial_distribution = InitialDistribution{{{1.0, 1.0}, {0.0, 0.0}}};
    const auto od = overridden.episode_distribution();
    CHECK(od.ranges[0].lo == 1.0);
    CHECK(od.ranges[0].hi == 1.0);
}

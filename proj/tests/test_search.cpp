// Search machinery: threshold estimation, CMA-ES maximization on a known
// landscape, determinism, recurrence detection in trajectories, and
// controller constant fine-tuning.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "orbitcert/controllers.hpp"
#include "orbitcert/dynamics.hpp"
#include "orbitcert/search.hpp"

using namespace orbitcert;

namespace {

// Pendulum config whose every episode starts hanging at rest: the penalty is
// the same known constant for all episodes, so the estimated threshold must
// equal it.
MdpConfig constant_penalty_config() {
    MdpConfig cfg = MdpConfig::pendulum_default(Scheme::SemiImplicit, 0.05, 100);
    cfg.initial_distribution = InitialDistribution{{{M_PI, M_PI}, {0.0, 0.0}}};
    return cfg;
}

}  // namespace

TEST_CASE("threshold of a constant-penalty environment is that constant") {
    const MdpConfig cfg = constant_penalty_config();
    const ControllerSpec zero = parse_formula("0.0", "zero");
    // Hanging at rest under zero torque: per-step penalty pi^2, 100 steps.
    const double expect = 100.0 * M_PI * M_PI;
    const double m = estimate_threshold(cfg, zero, 5, 0);
    CHECK(m == doctest::Approx(expect).epsilon(1e-9));
}

TEST_CASE("threshold for the swing-up policy lands in the expected band") {
    const MdpConfig cfg = MdpConfig::pendulum_default(Scheme::SemiImplicit, 0.05);
    const ControllerSpec ctrl = builtin("landajuela_a1");
    const double m = estimate_threshold(cfg, ctrl, 100, 0);
    CHECK(m >= 150.0);
    CHECK(m <= 650.0);
}

TEST_CASE("threshold grows monotonically with the sample count") {
    const MdpConfig cfg = MdpConfig::pendulum_default(Scheme::SemiImplicit, 0.05);
    const ControllerSpec ctrl = builtin("landajuela_a1");
    const double m1 = estimate_threshold(cfg, ctrl, 1, 0);
    const double m100 = estimate_threshold(cfg, ctrl, 100, 0);
    CHECK(m1 <= m100);
    CHECK_THROWS_AS(estimate_threshold(cfg, ctrl, 0, 0), std::invalid_argument);
}

TEST_CASE("CMA-ES locates the maximum of a smooth bowl") {
    const SearchBox box{{-2.0, -2.0}, {2.0, 2.0}};
    const std::vector<double> target{0.7, -0.3};
    const auto objective = [&](const std::vector<double>& x) {
        const double dx = x[0] - target[0], dy = x[1] - target[1];
        return -(dx * dx + dy * dy);
    };
    SearchConfig sc;
    sc.restarts = 3;
    sc.max_generations = 200;
    sc.seed = 1;
    const auto candidates = cmaes_maximize(objective, box, sc);
    REQUIRE(candidates.size() == 3);
    // Sorted by objective, best first.
    for (std::size_t i = 1; i < candidates.size(); ++i)
        CHECK(candidates[i - 1].accumulated_penalty >= candidates[i].accumulated_penalty);
    const double dist = std::hypot(candidates[0].ic[0] - target[0], candidates[0].ic[1] - target[1]);
    CHECK(dist <= 1e-6);
    for (const Candidate& c : candidates) CHECK(box.contains(c.ic));
}

TEST_CASE("search runs are bit-identical under a fixed seed") {
    const SearchBox box{{-1.0, -1.0}, {1.0, 1.0}};
    const auto objective = [](const std::vector<double>& x) {
        return std::sin(3.0 * x[0]) * std::cos(2.0 * x[1]) - x[0] * x[0];
    };
    SearchConfig sc;
    sc.restarts = 2;
    sc.max_generations = 40;
    sc.seed = 99;
    const auto a = cmaes_maximize(objective, box, sc);
    const auto b = cmaes_maximize(objective, box, sc);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].accumulated_penalty == b[i].accumulated_penalty);
        CHECK(a[i].restart_index == b[i].restart_index);
        REQUIRE(a[i].ic.size() == b[i].ic.size());
        for (std::size_t d = 0; d < a[i].ic.size(); ++d) CHECK(a[i].ic[d] == b[i].ic[d]);
    }
}

TEST_CASE("multithreaded search returns the same candidates as single-threaded") {
    const MdpConfig cfg = MdpConfig::pendulum_default(Scheme::SemiImplicit, 0.05, 60);
    const ControllerSpec ctrl = builtin("landajuela_a1");
    SearchConfig sc;
    sc.restarts = 4;
    sc.max_generations = 10;
    sc.seed = 5;
    sc.threads = 1;
    const auto serial = search_persistent(cfg, ctrl, sc);
    sc.threads = 4;
    const auto parallel = search_persistent(cfg, ctrl, sc);
    REQUIRE(serial.size() == parallel.size());
    for (std::size_t i = 0; i < serial.size(); ++i) {
        CHECK(serial[i].accumulated_penalty == parallel[i].accumulated_penalty);
        for (std::size_t d = 0; d < serial[i].ic.size(); ++d)
            CHECK(serial[i].ic[d] == parallel[i].ic[d]);
    }
}

TEST_CASE("reported candidate penalties are reproducible from their ICs") {
    const MdpConfig cfg = MdpConfig::pendulum_default(Scheme::SemiImplicit, 0.05, 80);
    const ControllerSpec ctrl = builtin("landajuela_a1");
    SearchConfig sc;
    sc.restarts = 2;
    sc.max_generations = 15;
    sc.seed = 17;
    const auto candidates = search_persistent(cfg, ctrl, sc);
    REQUIRE(!candidates.empty());
    for (const Candidate& c : candidates) {
        const double again = accumulated_penalty_value(cfg, ctrl, c.ic);
        CHECK(again == doctest::Approx(c.accumulated_penalty).epsilon(1e-9));
    }
}

TEST_CASE("recurrence gap accounts for whole angular turns") {
    const std::vector<double> s_i{0.1, 2.0};
    const std::vector<double> s_k{0.1 + 2.0 * M_PI, 2.0};
    const auto [gap, j] = recurrence_gap(s_i, s_k, 0);
    CHECK(gap <= 1e-12);
    CHECK(j == 1);

    const auto [gap0, j0] = recurrence_gap({0.5, -1.0}, {0.5001, -1.0002}, 0);
    CHECK(j0 == 0);
    CHECK(gap0 == doctest::Approx(2e-4).epsilon(1e-6));

    // Non-angular components never fold.
    const auto [gap_v, jv] = recurrence_gap({0.0, 0.0}, {0.0, 2.0 * M_PI}, 0);
    CHECK(gap_v >= 6.0);
    CHECK(jv == 0);
}

TEST_CASE("an exactly periodic synthetic trajectory reports its fundamental period") {
    Trajectory traj;
    const int period = 28;
    for (int k = 0; k <= 70; ++k) {
        const double phase = 2.0 * M_PI * (k % period) / period;
        traj.states.push_back({0.3 * std::cos(phase), 0.3 * std::sin(phase)});
    }
    for (int k = 0; k < 70; ++k) traj.rewards.push_back(0.0);
    const auto det = detect_periodic_candidate(traj, 2, 0, 0.05);
    REQUIRE(det.has_value());
    CHECK(det->m == period);
    CHECK(det->j == 0);
    CHECK(det->gap <= 1e-12);
    CHECK(det->states.size() == static_cast<std::size_t>(period));
}

TEST_CASE("a drifting trajectory yields no periodic candidate") {
    Trajectory traj;
    for (int k = 0; k <= 60; ++k) traj.states.push_back({0.5 * k, 3.0 + 0.1 * k});
    for (int k = 0; k < 60; ++k) traj.rewards.push_back(0.0);
    CHECK_FALSE(detect_periodic_candidate(traj, 2, 0, 0.05).has_value());
}

TEST_CASE("the bad swing-up orbit is detected from its published start") {
    const MdpConfig cfg = MdpConfig::pendulum_default(Scheme::Explicit, 0.05);
    const ControllerSpec ctrl = builtin("landajuela_a1");
    const Trajectory traj = rollout(cfg, ctrl.as_fn(), {3.94871, 8.0}, 1000);
    const auto det = detect_periodic_candidate(traj, cfg.state_dim(), cfg.angular_index(), 0.05);
    REQUIRE(det.has_value());
    CHECK(det->m == 28);
    CHECK(det->j == 1);
    CHECK(det->gap <= 1e-3);
    // The reported gap is reproducible from the stored indices.
    const auto& s_i = traj.states[det->start_index];
    const auto& s_k = traj.states[det->start_index + static_cast<std::size_t>(det->m)];
    const auto [gap, j] = recurrence_gap(s_i, s_k, cfg.angular_index());
    CHECK(gap == doctest::Approx(det->gap).epsilon(1e-12));
    CHECK(j == det->j);

    const auto many = detect_periodic_candidates(traj, cfg.state_dim(), cfg.angular_index(), 0.05, 5);
    REQUIRE(!many.empty());
    CHECK(many[0].m == det->m);
    for (std::size_t i = 1; i < many.size(); ++i) CHECK(many[i - 1].gap <= many[i].gap);
}

TEST_CASE("fine-tuning improves a deliberately lobotomized controller") {
    const ControllerSpec frozen = parse_formula("0.0*x1", "zeroed");
    const MdpConfig cfg = MdpConfig::pendulum_default(Scheme::SemiImplicit, 0.05, 200);
    SearchConfig sc;
    sc.restarts = 1;
    sc.max_generations = 30;
    sc.seed = 3;
    const ControllerSpec tuned = fine_tune(frozen, cfg, 6, sc);
    CHECK(!(tuned == frozen));  // a strict improvement was found
    // The single tunable constant moved off zero.
    const auto idx = tuned.constant_indices();
    REQUIRE(idx.size() == 1);
    CHECK(tuned.nodes[static_cast<std::size_t>(idx[0])].value != 0.0);
    // Deterministic under the same seed.
    const ControllerSpec tuned_again = fine_tune(frozen, cfg, 6, sc);
    CHECK(tuned_again == tuned);
}

TEST_CASE("fine-tuning a constant-free controller is refused") {
    const ControllerSpec bare = parse_formula("x1", "bare");
    const MdpConfig cfg = MdpConfig::pendulum_default(Scheme::SemiImplicit, 0.05, 100);
    SearchConfig sc;
    sc.restarts = 1;
    sc.max_generations = 5;
    CHECK_THROWS_AS(fine_tune(bare, cfg, 3, sc), NoFreeConstants);
}

TEST_CASE("default search boxes cover the benchmark initial sets") {
    const SearchBox pend = default_search_box(MdpConfig::pendulum_default(Scheme::Explicit, 0.05));
    REQUIRE(pend.dim() == 2);
    CHECK(pend.lo[0] == doctest::Approx(-2.0 * M_PI));
    CHECK(pend.hi[1] == 8.0);
    CHECK(pend.contains({3.94871, 8.0}));

    const SearchBox cart = default_search_box(MdpConfig::cartpole_default(Scheme::Explicit, 0.01));
    REQUIRE(cart.dim() == 4);
    CHECK(cart.contains({0.0, 0.0, M_PI, 0.0}));

    CHECK(pend.project({100.0, -100.0}) == std::vector<double>{2.0 * M_PI, -8.0});
}

TEST_CASE("penalty kinds follow the system") {
    CHECK(default_penalty(SystemKind::Pendulum).kind == PenaltySpec::Kind::PendulumNegReward);
    CHECK(default_penalty(SystemKind::CartpoleSwingup).kind == PenaltySpec::Kind::CartpoleShaped);
}

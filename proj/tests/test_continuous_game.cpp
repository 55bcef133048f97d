#include "support.hpp"

#include <ahead/game.hpp>
#include <ahead/stop_game.hpp>

#include <gtest/gtest.h>

#include <random>

using namespace ahead;
using ahead::testing::max_abs_diff;
using ahead::testing::small_grid;
using ahead::testing::small_params;

namespace {

ModelParams frozen_params() {
    ModelParams p = small_params();
    p.sigma = 0.0;
    p.q = 0.0;
    return p;
}

GridSpec frozen_grid(const ModelParams& p) {
    GridSpec g = small_grid(p);
    g.s = {-0.03, 0.03, 7};
    return g;
}

std::vector<double> indicator(const OuterLattice& lat, int na, int nb) {
    std::vector<double> f(lat.size(), 0.0);
    for (std::size_t i = 0; i < f.size(); ++i) {
        const auto c = lat.decode(i);
        if (c.na == na && c.nb == nb) f[i] = 1.0;
    }
    return f;
}

}  // namespace

TEST(StepExpectation, FrozenDynamicsIsIdentity) {
    const ModelParams p = frozen_params();
    const GridSpec g = frozen_grid(p);
    const OuterLattice lat(g);
    std::vector<double> next(lat.size());
    for (std::size_t i = 0; i < next.size(); ++i) next[i] = std::sin(0.37 * static_cast<double>(i));
    for (int is : {0, 3, 6}) {
        const OuterState node{2, g.s.value(is), 1, 2, g.l_a.value(1), g.l_b.value(2)};
        EXPECT_DOUBLE_EQ(step_expectation(next, node, 0.0, 0.0, p, g), next[lat.index(is, 1, 2, 1, 2)]);
    }
}

TEST(StepExpectation, TwoPointTree) {
    const ModelParams p = frozen_params();
    const GridSpec g = frozen_grid(p);
    const OuterLattice lat(g);
    const auto next = indicator(lat, 2, 0);  // one a-trade from n_a = 1
    const OuterState node{0, g.s.value(5), 1, 0, 0.0, 0.0};
    EXPECT_NEAR(step_expectation(next, node, 0.05 / p.delta, 0.0, p, g), 0.05, 1e-15);
}

TEST(StepExpectation, NoTradesAtZeroGap) {
    const ModelParams p = frozen_params();
    const GridSpec g = frozen_grid(p);
    const OuterLattice lat(g);
    auto next = indicator(lat, 2, 0);
    const auto nb = indicator(lat, 1, 1);
    for (std::size_t i = 0; i < next.size(); ++i) next[i] += nb[i];
    const OuterState node{0, 0.0, 1, 0, 0.0, 0.0};
    EXPECT_EQ(step_expectation(next, node, 1.0, 1.0, p, g), 0.0);
}

TEST(StepExpectation, RejectsUnstableStep) {
    const ModelParams p = frozen_params();
    const GridSpec g = frozen_grid(p);
    const std::vector<double> next(OuterLattice(g).size(), 0.0);
    EXPECT_THROW(step_expectation(next, OuterState{}, 2.0, 2.0, p, g), ConfigError);
}

TEST(StepExpectation, QuadratureReproducesGapVariance) {
    ModelParams p = small_params();
    p.q = 0.0;
    const GridSpec g = small_grid(p, 21);
    const OuterLattice lat(g);
    std::vector<double> next(lat.size());
    for (std::size_t i = 0; i < next.size(); ++i) {
        const double s = g.s.value(lat.decode(i).is);
        next[i] = s * s;
    }
    const OuterState node{0, 0.0, 0, 0, 0.0, 0.0};
    EXPECT_NEAR(step_expectation(next, node, p.lambda_minus, p.lambda_minus, p, g), p.sigma * p.sigma * p.delta,
                1e-15);
}

TEST(NashIntensities, FollowTheLiveSide) {
    const ModelParams p = frozen_params();
    const GridSpec g = frozen_grid(p);
    const OuterLattice lat(g);
    std::vector<double> ua = indicator(lat, 2, 0), ub = indicator(lat, 1, 1);
    for (double& x : ua) x *= 0.3;
    for (double& x : ub) x *= 0.2;
    const OuterState up{0, g.s.value(5), 1, 0, 0.0, 0.0}, down{0, g.s.value(1), 1, 0, 0.0, 0.0},
        flat{0, 0.0, 1, 0, 0.0, 0.0};
    EXPECT_EQ(nash_step_intensities(ua, ub, up, p, g), std::make_pair(p.lambda_minus, p.lambda_minus));
    EXPECT_EQ(nash_step_intensities(ua, ub, down, p, g), std::make_pair(p.lambda_minus, p.lambda_plus));
    EXPECT_EQ(nash_step_intensities(ua, ub, flat, p, g), std::make_pair(p.lambda_minus, p.lambda_minus));
    for (double& x : ua) x = -x;
    EXPECT_EQ(nash_step_intensities(ua, ub, up, p, g).first, p.lambda_plus);
}

TEST(StopGame, DominantStop) {
    StopGame2x2 g;
    g.a_first = 1.0;
    g.a_cont = 2.0;
    g.a_sim = 0.5;
    g.a_second = 1.5;
    g.b_second = 3.0;  // b prefers to continue after a stops
    g.b_sim = 1.0;
    g.b_cont = 4.0;
    g.b_first = 0.0;
    const auto d = stopping_probabilities(g);
    EXPECT_EQ(d.p_a, 1.0);
    EXPECT_EQ(d.p_b, 0.0);
    EXPECT_EQ(d.diag.kind, StopKind::pure);
}

TEST(StopGame, MixingFormulaHandExample) {
    StopGame2x2 g;
    g.a_first = 2;
    g.a_sim = 3;
    g.a_second = 1;
    g.a_cont = 2.5;
    g.b_first = 0;
    g.b_sim = 2;
    g.b_second = 1;
    g.b_cont = 1;
    const auto d = stopping_probabilities(g);
    EXPECT_EQ(d.diag.kind, StopKind::mixed);
    EXPECT_DOUBLE_EQ(d.p_a, 0.2);
    EXPECT_DOUBLE_EQ(d.p_b, 0.5);
    // The indifference construction swaps the roles of the two formulas.
    EXPECT_DOUBLE_EQ(d.diag.indiff_p_b, 0.2);
    EXPECT_DOUBLE_EQ(d.diag.indiff_p_a, 0.5);
}

TEST(StopGame, MixingFormulaExactOnCyclicGames) {
    std::mt19937_64 gen(17);
    for (int i = 0; i < 200; ++i) {
        const StopGame2x2 g = ahead::testing::cyclic_game(gen);
        const auto d = stopping_probabilities(g);
        ASSERT_EQ(d.diag.kind, StopKind::mixed);
        EXPECT_EQ(d.p_a, ahead::testing::mixing_ratio_a(g).value());
        EXPECT_EQ(d.p_b, ahead::testing::mixing_ratio_b(g).value());
        EXPECT_GE(d.p_a, 0.0);
        EXPECT_LE(d.p_a, 1.0);
        EXPECT_GE(d.p_b, 0.0);
        EXPECT_LE(d.p_b, 1.0);
        const auto u = mixed_values(g, d.p_a, d.p_b);
        EXPECT_GE(u[0], std::min({g.a_sim, g.a_first, g.a_second, g.a_cont}));
        EXPECT_LE(u[0], std::max({g.a_sim, g.a_first, g.a_second, g.a_cont}));
        EXPECT_GE(u[1], std::min({g.b_sim, g.b_first, g.b_second, g.b_cont}));
        EXPECT_LE(u[1], std::max({g.b_sim, g.b_first, g.b_second, g.b_cont}));
    }
}

TEST(StopGame, MultiplePureEquilibriaPreferContinuation) {
    StopGame2x2 g;  // both (C, C) and (S, S) are equilibria
    g.a_cont = 1;
    g.a_first = 2;
    g.a_second = 2;
    g.a_sim = 1;
    g.b_cont = 1;
    g.b_first = 0;
    g.b_second = 0;
    g.b_sim = 1;
    const auto d = stopping_probabilities(g);
    EXPECT_EQ(d.diag.pure_equilibria, 2);
    EXPECT_EQ(d.p_a, 0.0);
    EXPECT_EQ(d.p_b, 0.0);
}

TEST(StopGame, DegenerateGameMatchesThresholdRule) {
    std::mt19937_64 gen(23);
    std::uniform_real_distribution<double> x(-1, 1);
    for (int i = 0; i < 500; ++i) {
        StopGame2x2 g;
        g.a_first = g.a_second = g.a_sim = x(gen);
        g.b_first = g.b_second = g.b_sim = x(gen);
        g.a_cont = x(gen);
        g.b_cont = x(gen);
        const auto d = stopping_probabilities(g), t = threshold_rule(g);
        const auto ud = mixed_values(g, d.p_a, d.p_b), ut = mixed_values(g, t.p_a, t.p_b);
        EXPECT_EQ(ud[0], ut[0]);
        EXPECT_EQ(ud[1], ut[1]);
    }
}

TEST(StopGame, ZeroDenominatorWithoutPureEquilibriumIsAnError) {
    StopGame2x2 g;
    EXPECT_NO_THROW(stopping_probabilities(g));  // all zero: every profile is an equilibrium
    g.a_cont = std::nan("");
    EXPECT_THROW(stopping_probabilities(g), NumericalError);
}

TEST(Game, PureAndMixedModesAgreeWithoutCommitments) {
    ModelParams p = small_params();
    p.n_hat = 0;
    p.n_hat_ab = 0;
    const GridSpec g = small_grid(p);
    SubgameCache cache(p, g);
    GameOptions o;
    o.keep_policies = false;
    o.mode = EquilibriumMode::pure;
    const GameFields pure = backward_induction(p, g, cache, o);
    o.mode = EquilibriumMode::mixed;
    const GameFields mixed = backward_induction(p, g, cache, o);
    EXPECT_LE(max_abs_diff(pure.U_a0, mixed.U_a0), 1e-10);
    EXPECT_LE(max_abs_diff(pure.U_b0, mixed.U_b0), 1e-10);
}

TEST(Game, PureModeNeedsZeroCommitments) {
    const ModelParams p = small_params();
    const GridSpec g = small_grid(p);
    SubgameCache cache(p, g);
    GameOptions o;
    o.mode = EquilibriumMode::pure;
    EXPECT_THROW(backward_induction(p, g, cache, o), ConfigError);
}

TEST(Game, SymmetricParametersGiveMirroredValues) {
    ModelParams p = small_params();
    p.target_rounding = TargetRounding::continuous;
    const GridSpec g = small_grid(p);
    SubgameCache cache(p, g);
    const GameFields f = backward_induction(p, g, cache);
    for (int is = 0; is < g.s.nodes; ++is) {
        const double s = g.s.value(is);
        EXPECT_NEAR(f.value0(Player::a, s), -f.value0(Player::b, -s), 1e-12) << "s=" << s;
        EXPECT_NEAR(f.duration0(s), f.duration0(-s), 1e-12) << "s=" << s;
    }
}

TEST(Game, OneStepHorizonIsAntisymmetricAtTheOrigin) {
    ModelParams p = small_params();
    p.n_hat = 0;
    p.T = p.delta;
    const GridSpec g = small_grid(p);
    SubgameCache cache(p, g);
    const GameFields f = backward_induction(p, g, cache);
    EXPECT_NEAR(f.value0(Player::a, 0.0), -f.value0(Player::b, 0.0), 1e-14);
}

TEST(Game, ForcedImmediateTriggerPaysTheFirstMoverValue) {
    const ModelParams p = small_params();
    const GridSpec g = small_grid(p);
    SubgameCache cache(p, g);
    GameOptions o;
    o.trading_enabled = false;
    o.forced_p0 = std::make_pair(1.0, 0.0);
    const GameFields f = backward_induction(p, g, cache, o);
    const double first = g_wrapper(Role::first, Player::a, 0.0, 0, 0, p, cache);
    for (int is = 0; is < g.s.nodes; ++is) {
        EXPECT_NEAR(f.value0(Player::a, g.s.value(is)), first / p.h, 1e-12);
    }
    EXPECT_EQ(f.duration0(0.0), 0.0);
}

TEST(Game, TerminalSliceIsTheForcedAuction) {
    const ModelParams p = small_params();
    const GridSpec g = small_grid(p);
    SubgameCache cache(p, g);
    GameOptions o;
    o.keep_values = true;
    const GameFields f = backward_induction(p, g, cache, o);
    const auto& last = f.U_a[static_cast<std::size_t>(f.steps)];
    for (std::size_t i = 0; i < last.size(); i += 7) {
        const auto c = f.lattice.decode(i);
        const double gT = g_wrapper(Role::at_T, Player::a, p.T, c.na, c.nb, p, cache);
        EXPECT_DOUBLE_EQ(last[i], (g.l_a.value(c.ja) + gT) / (p.T + p.h));
        EXPECT_EQ(f.probabilities(f.steps, i), std::make_pair(1.0, 1.0));
    }
}

TEST(Game, ProbabilitiesStayInUnitIntervalEverywhere) {
    ModelParams p = small_params();
    p.T = 4.0;
    const GridSpec g = small_grid(p, 9, 5, 4);
    SubgameCache cache(p, g);
    const GameFields f = backward_induction(p, g, cache);
    for (int k = 0; k <= f.steps; ++k) {
        for (std::size_t i = 0; i < f.lattice.size(); ++i) {
            const auto [pa, pb] = f.probabilities(k, i);
            ASSERT_GE(pa, 0.0);
            ASSERT_LE(pa, 1.0);
            ASSERT_GE(pb, 0.0);
            ASSERT_LE(pb, 1.0);
        }
    }
}

TEST(Game, IdenticalAcrossWorkerCounts) {
    const ModelParams p = small_params();
    const GridSpec g = small_grid(p, 9, 5, 4);
    auto solve = [&](int threads) {
        SubgameCache cache(p, g);
        GameOptions o;
        o.threads = threads;
        return backward_induction(p, g, cache, o);
    };
    const GameFields a = solve(1), b = solve(4), c = solve(16);
    EXPECT_EQ(a.U_a0, b.U_a0);
    EXPECT_EQ(a.U_a0, c.U_a0);
    EXPECT_EQ(a.U_b0, c.U_b0);
    EXPECT_EQ(a.E0, c.E0);
    for (int k = 0; k <= a.steps; ++k) EXPECT_EQ(a.policy[k].code, c.policy[k].code);
}

TEST(Game, FivePointQuadratureChangesLittle) {
    const ModelParams p = small_params();
    const GridSpec g = small_grid(p, 15);
    SubgameCache cache(p, g);
    GameOptions o;
    o.keep_policies = false;
    const GameFields g3 = backward_induction(p, g, cache, o);
    o.quadrature = Quadrature::gauss_hermite5;
    const GameFields g5 = backward_induction(p, g, cache, o);
    const double scale = std::abs(g3.value0(Player::a, 0.0));
    EXPECT_LT(std::abs(g5.value0(Player::a, 0.0) - g3.value0(Player::a, 0.0)), 0.05 * scale);
}

TEST(Game, RefusesSolvesAboveTheMemoryBudget) {
    const ModelParams p = small_params();
    const GridSpec g = small_grid(p);
    SubgameCache cache(p, g);
    GameOptions o;
    o.memory_budget_bytes = 1000.0;
    EXPECT_THROW(backward_induction(p, g, cache, o), BudgetError);
}

TEST(Game, PolicySliceEncoding) {
    PolicySlice s;
    s.code = {PolicySlice::encode(true, false, 0.0, 1.0), PolicySlice::encode(false, true, 0.25, 0.0)};
    s.mixed = {{1, 0.25, 0.0}};
    EXPECT_EQ(s.probabilities(0), std::make_pair(0.0, 1.0));
    EXPECT_EQ(s.probabilities(1), std::make_pair(0.25, 0.0));
    EXPECT_TRUE(s.high(Player::a, 0));
    EXPECT_FALSE(s.high(Player::b, 0));
    EXPECT_TRUE(s.high(Player::b, 1));
}

#pragma once

// Small problem instances shared by the unit tests.

#include <ahead/game.hpp>
#include <ahead/model.hpp>
#include <ahead/stop_game.hpp>
#include <ahead/subgame.hpp>

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace ahead::testing {

/// Short horizon and auction so a full outer solve takes well under a second.
inline ModelParams small_params() {
    ModelParams p;
    p.sigma = 0.03;
    p.K = 10.0;
    p.q = 0.01;
    p.v_a = p.v_b = 0.1;
    p.lambda_minus = 0.001;
    p.lambda_plus = 1.0;
    p.h = 5.0;
    p.T = 2.0;
    p.delta = 0.25;
    p.n_hat = 3;
    p.target_rounding = TargetRounding::nearest_integer;
    return p;
}

inline GridSpec small_grid(const ModelParams& p, int s_nodes = 7, int n_max = 4, int l_nodes = 3) {
    GridSpec g;
    const double ds = p.sigma > 0.0 ? p.sigma * std::sqrt(3.0 * p.delta) : 0.01;
    const double hi = ds * (s_nodes - 1) / 2;
    g.s = {-hi, hi, s_nodes};
    g.n_max_a = g.n_max_b = n_max;
    g.l_a = {0.0, GridSpec::default_l_max(p, Player::a, hi), l_nodes};
    g.l_b = {0.0, GridSpec::default_l_max(p, Player::b, hi), l_nodes};
    g.m_max = GridSpec::min_m_max(p);
    return g;
}

inline double max_abs_diff(const std::vector<double>& x, const std::vector<double>& y) {
    double m = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) m = std::max(m, std::abs(x[i] - y[i]));
    return m;
}

/// Auction-only parameters of the figure sweeps.
inline ModelParams fig_params(double q, double h) {
    ModelParams p;
    p.q = q;
    p.h = h;
    p.K = 10.0;
    p.v_a = p.v_b = 0.1;
    p.lambda_minus = 0.001;
    p.lambda_plus = 1.0;
    return p;
}

inline GridSpec auction_grid(const ModelParams& p) {
    GridSpec g;
    g.m_max = GridSpec::min_m_max(p);
    return g;
}

/// Expected payoff of a when both counts are independent Poisson(lambda h)
/// variables stopped at m_max (the mass beyond sits on m_max).
inline double poisson_oracle(const SubgameKey& k, const ModelParams& p, double lambda, int m_max) {
    std::vector<double> pmf(static_cast<std::size_t>(m_max) + 1);
    const double mu = lambda * p.h;
    double tail = 1.0;
    for (int m = 0; m < m_max; ++m) {
        pmf[static_cast<std::size_t>(m)] = std::exp(-mu + m * std::log(mu) - std::lgamma(m + 1.0));
        tail -= pmf[static_cast<std::size_t>(m)];
    }
    pmf[static_cast<std::size_t>(m_max)] = tail;
    double e = 0.0;
    for (int ma = 0; ma <= m_max; ++ma)
        for (int mb = 0; mb <= m_max; ++mb)
            e += pmf[static_cast<std::size_t>(ma)] * pmf[static_cast<std::size_t>(mb)] *
                 terminal_auction_payoff(k.x_a, k.x_b, ma, mb, k.np_a, k.np_b, p).a;
    return e;
}

/// Integer-valued 2x2 stopping game whose best replies cycle, so it has no
/// pure equilibrium: a stops against a continuing b, b follows a.
inline StopGame2x2 cyclic_game(std::mt19937_64& gen) {
    std::uniform_int_distribution<int> base(-20, 20), gap(1, 15);
    StopGame2x2 g;
    g.a_cont = base(gen);
    g.a_first = g.a_cont - gap(gen);
    g.a_second = base(gen);
    g.a_sim = g.a_second + gap(gen);
    g.b_second = base(gen);
    g.b_sim = g.b_second + gap(gen);
    g.b_first = base(gen);
    g.b_cont = g.b_first + gap(gen);
    return g;
}

/// Exact rational p = num / den of the mixing formula, from integer entries.
struct Ratio {
    std::int64_t num, den;
    double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

inline Ratio mixing_ratio_a(const StopGame2x2& g) {
    auto i = [](double x) { return static_cast<std::int64_t>(x); };
    return {i(g.a_first) - i(g.a_cont), -i(g.a_sim) + i(g.a_first) + i(g.a_second) - i(g.a_cont)};
}

inline Ratio mixing_ratio_b(const StopGame2x2& g) {
    auto i = [](double x) { return static_cast<std::int64_t>(x); };
    return {i(g.b_first) - i(g.b_cont), -i(g.b_sim) + i(g.b_first) + i(g.b_second) - i(g.b_cont)};
}

}  // namespace ahead::testing

#pragma once

// Reference designs: a stylised continuous limit order book, periodic
// auctions (no trading between auctions) and the ad-hoc auction game.

#include <ahead/game.hpp>

#include <cmath>
#include <string>

namespace ahead {

enum class Design : std::uint8_t { clob, periodic, ahead };

inline const char* to_string(Design d) {
    switch (d) {
        case Design::clob: return "clob";
        case Design::periodic: return "periodic";
        case Design::ahead: return "ahead";
    }
    return "?";
}

struct BaselineReport {
    Design design = Design::clob;
    int n_hat = 0;
    double V_a = 0.0;       // per unit time
    double V_b = 0.0;
    double duration = 0.0;  // seconds
    ModelParams params;

    std::string tag() const {
        if (design == Design::clob) return "clob";
        return std::string(to_string(design)) + "(n_hat=" + std::to_string(n_hat) +
               (design == Design::periodic ? ",continuous_trading=false)" : ")");
    }
};

/// Rounds to `digits` decimals, as tabulated durations are.
inline double round_to(double x, int digits) {
    const double f = std::pow(10.0, digits);
    return std::round(x * f) / f;
}

/// Every trade pays 1/K and trades arrive at the target rate.
inline BaselineReport clob_values(const ModelParams& p) {
    if (!(p.K > 0.0) || !(p.v_a > 0.0) || !(p.v_b > 0.0)) throw ConfigError("clob_values needs K, v > 0");
    BaselineReport r;
    r.design = Design::clob;
    r.V_a = p.v_a / p.K;
    r.V_b = -p.v_b / p.K;
    r.duration = 1.0 / p.v_a;
    r.params = p;
    return r;
}

namespace detail {
inline BaselineReport game_report(Design d, const ModelParams& p, const GridSpec& g, SubgameCache& cache,
                                  GameOptions opt) {
    opt.compute_duration = true;
    const GameFields f = backward_induction(p, g, cache, opt);
    BaselineReport r;
    r.design = d;
    r.n_hat = p.n_hat;
    r.V_a = f.value0(Player::a, p.p_minus_pstar0);
    r.V_b = f.value0(Player::b, p.p_minus_pstar0);
    r.duration = f.duration0(p.p_minus_pstar0);
    r.params = p;
    return r;
}
}  // namespace detail

/// Same solver with continuous-phase trading switched off; penalties accrue.
inline BaselineReport periodic_auction_values(const ModelParams& p, const GridSpec& g, SubgameCache& cache,
                                              GameOptions opt = {}) {
    opt.trading_enabled = false;
    opt.keep_policies = false;
    return detail::game_report(Design::periodic, p, g, cache, opt);
}

inline BaselineReport ahead_values(const ModelParams& p, const GridSpec& g, SubgameCache& cache,
                                   GameOptions opt = {}) {
    opt.trading_enabled = true;
    opt.keep_policies = false;
    return detail::game_report(Design::ahead, p, g, cache, opt);
}

}  // namespace ahead

#pragma once

// Per-node 2x2 stopping game. Player a minimises a cost, Player b maximises
// a gain; each either stops (triggers the auction) or continues.

#include <ahead/model.hpp>

#include <array>
#include <cmath>
#include <cstdint>

namespace ahead {

struct StopGame2x2 {
    // Player a's cost entries.
    double a_sim = 0.0;     // both stop
    double a_first = 0.0;   // a stops alone
    double a_second = 0.0;  // b stops alone
    double a_cont = 0.0;    // both continue
    // Player b's gain entries.
    double b_sim = 0.0;
    double b_first = 0.0;   // b stops alone
    double b_second = 0.0;  // a stops alone
    double b_cont = 0.0;

    /// Cost of a under profile (a stops?, b stops?).
    double cost_a(bool a_stops, bool b_stops) const {
        if (a_stops) return b_stops ? a_sim : a_first;
        return b_stops ? a_second : a_cont;
    }

    double gain_b(bool a_stops, bool b_stops) const {
        if (b_stops) return a_stops ? b_sim : b_first;
        return a_stops ? b_second : b_cont;
    }

    bool finite() const {
        for (double x : {a_sim, a_first, a_second, a_cont, b_sim, b_first, b_second, b_cont}) {
            if (!std::isfinite(x)) return false;
        }
        return true;
    }
};

enum class StopKind : std::uint8_t { pure, mixed };

struct StopDiagnostics {
    StopKind kind = StopKind::pure;
    int pure_equilibria = 0;
    // Mixed profile from the indifference construction: each player's
    // probability makes the opponent indifferent.
    double indiff_p_a = 0.0;
    double indiff_p_b = 0.0;
};

struct StopDecision {
    double p_a = 0.0;
    double p_b = 0.0;
    StopDiagnostics diag;
};

/// Stopping probabilities of the 2x2 game.
///
/// Pure equilibria are searched first; when several exist the selection
/// order is continue/continue, then a stops alone, then b stops alone, then
/// both stop. Without a pure equilibrium the probabilities are
///   p_a = (a_first - a_cont) / (a_first + a_second - a_sim - a_cont)
///   p_b = (b_first - b_cont) / (b_first + b_second - b_sim - b_cont)
/// i.e. each player's probability is built from that player's own entries.
inline StopDecision stopping_probabilities(const StopGame2x2& g) {
    if (!g.finite()) throw NumericalError("stopping game has non-finite entries");
    StopDecision d;

    auto is_nash = [&](bool sa, bool sb) {
        return g.cost_a(sa, sb) <= g.cost_a(!sa, sb) && g.gain_b(sa, sb) >= g.gain_b(sa, !sb);
    };
    // (a stops, b stops) in priority order.
    constexpr std::array<std::array<bool, 2>, 4> order{{{false, false}, {true, false}, {false, true}, {true, true}}};
    bool found = false;
    for (const auto& prof : order) {
        if (!is_nash(prof[0], prof[1])) continue;
        ++d.diag.pure_equilibria;
        if (!found) {
            d.p_a = prof[0] ? 1.0 : 0.0;
            d.p_b = prof[1] ? 1.0 : 0.0;
            found = true;
        }
    }

    const double den_a = -g.a_sim + g.a_first + g.a_second - g.a_cont;
    const double den_b = -g.b_sim + g.b_first + g.b_second - g.b_cont;
    if (den_b != 0.0) d.diag.indiff_p_a = (g.b_first - g.b_cont) / den_b;
    if (den_a != 0.0) d.diag.indiff_p_b = (g.a_first - g.a_cont) / den_a;

    if (found) {
        d.diag.kind = StopKind::pure;
        return d;
    }
    if (den_a == 0.0 || den_b == 0.0) {
        throw NumericalError("2x2 stopping game without pure equilibrium has a zero mixing denominator");
    }
    d.diag.kind = StopKind::mixed;
    d.p_a = (g.a_first - g.a_cont) / den_a;
    d.p_b = (g.b_first - g.b_cont) / den_b;
    return d;
}

/// Value pair of the mixed profile (p_a, p_b).
inline std::array<double, 2> mixed_values(const StopGame2x2& g, double p_a, double p_b) {
    const double ss = p_a * p_b, sc = p_a * (1.0 - p_b), cs = (1.0 - p_a) * p_b,
                 cc = (1.0 - p_a) * (1.0 - p_b);
    return {ss * g.a_sim + sc * g.a_first + cs * g.a_second + cc * g.a_cont,
            ss * g.b_sim + sc * g.b_second + cs * g.b_first + cc * g.b_cont};
}

/// Threshold rule used when all stop payoffs coincide per player: each
/// continues iff continuing is weakly better.
inline StopDecision threshold_rule(const StopGame2x2& g) {
    StopDecision d;
    d.p_a = g.a_cont <= g.a_first ? 0.0 : 1.0;
    d.p_b = g.b_cont >= g.b_first ? 0.0 : 1.0;
    return d;
}

}  // namespace ahead

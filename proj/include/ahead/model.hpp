#pragma once

// Model constants, grids and the closed-form pieces shared by every solver:
// the bang-bang intensity selector and the terminal auction payoff.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ahead {

/// Invalid parameters, grids or configuration values.
struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Non-finite values, violated numerical invariants, singular formulas.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A requested solve would exceed the configured memory/work budget.
struct BudgetError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Player : std::uint8_t { a, b };

/// Player a minimises a cost, Player b maximises a gain.
enum class Side : std::uint8_t { minimizer, maximizer };

enum class SimTriggerMode : std::uint8_t { fixed, randomized_half };

enum class TargetRounding : std::uint8_t { continuous, nearest_integer };

inline const char* to_string(SimTriggerMode m) {
    return m == SimTriggerMode::fixed ? "fixed" : "randomized_half";
}

inline const char* to_string(TargetRounding r) {
    return r == TargetRounding::continuous ? "continuous" : "nearest_integer";
}

struct ModelParams {
    double sigma = 0.03;          // price units per sqrt(second)
    double K = 10.0;              // market-maker supply slope, lots per price unit
    double q = 0.01;              // target-deviation penalty weight
    double v_a = 0.1;             // lots per second
    double v_b = 0.1;
    double lambda_minus = 0.001;  // orders per second
    double lambda_plus = 1.0;
    double h = 20.0;              // auction duration, seconds
    double T = 20.0;              // triggering horizon, seconds
    double delta = 0.25;          // outer time step, seconds
    int n_hat = 3;                // lone-trigger commitment, lots
    SimTriggerMode sim_mode = SimTriggerMode::randomized_half;
    int n_hat_ab = 3;             // simultaneous-trigger commitment in fixed mode
    double p_minus_pstar0 = 0.0;  // initial gap P - P*_0
    TargetRounding target_rounding = TargetRounding::continuous;

    /// Number of outer steps T/delta; throws when T/delta is not an integer.
    int steps() const {
        const double r = T / delta;
        const double n = std::round(r);
        if (std::abs(r - n) > 1e-9 * std::max(1.0, r)) {
            throw ConfigError("T/delta must be an integer (T=" + std::to_string(T) +
                              ", delta=" + std::to_string(delta) + ")");
        }
        return static_cast<int>(n);
    }

    double time(int k) const { return k * delta; }

    double v(Player p) const { return p == Player::a ? v_a : v_b; }

    void validate() const {
        auto require = [](bool ok, const std::string& msg) {
            if (!ok) throw ConfigError(msg);
        };
        auto finite = [](double x) { return std::isfinite(x); };
        require(finite(sigma) && sigma >= 0.0, "sigma must be finite and >= 0");
        require(finite(lambda_minus) && lambda_minus > 0.0, "lambda_minus must be > 0");
        require(finite(lambda_plus) && lambda_plus > lambda_minus,
                "lambda_plus must exceed lambda_minus");
        require(finite(h) && h > 0.0, "h must be > 0");
        require(finite(delta) && delta > 0.0, "delta must be > 0");
        require(finite(T) && T >= delta, "T must be >= delta");
        require(finite(K) && K > 0.0, "K must be > 0");
        require(finite(q) && q >= 0.0, "q must be >= 0");
        require(finite(v_a) && v_a > 0.0 && finite(v_b) && v_b > 0.0, "v_a, v_b must be > 0");
        require(n_hat >= 0, "n_hat must be >= 0");
        require(n_hat_ab >= 0, "n_hat_ab must be >= 0");
        require(finite(p_minus_pstar0), "p_minus_pstar0 must be finite");
        (void)steps();
        if (target_rounding == TargetRounding::nearest_integer) {
            for (double v : {v_a, v_b}) {
                const double r = 1.0 / (2.0 * v * delta);
                require(std::abs(r - std::round(r)) <= 1e-9 * std::max(1.0, r),
                        "nearest_integer rounding requires 1/(2 v delta) to be an integer (v=" +
                            std::to_string(v) + ")");
            }
        }
    }
};

/// Target volume v*t entering the auction penalty: raw, or ceil(v t - 1/2).
inline double target_level(double v, double t, TargetRounding rounding) {
    const double raw = v * t;
    if (rounding == TargetRounding::continuous) return raw;
    // The fuzz keeps exact half-integers (v t = j + 1/2) on the lower side.
    return std::ceil(raw - 0.5 - 1e-9);
}

/// Pre-auction deviation N - v t as seen by the auction payoff.
inline double target_deviation(int n, double v, double t, TargetRounding rounding) {
    return static_cast<double>(n) - target_level(v, t, rounding);
}

/// Uniform axis on [lo, hi] with `nodes` points.
struct UniformAxis {
    double lo = 0.0;
    double hi = 0.0;
    int nodes = 1;

    double step() const { return nodes > 1 ? (hi - lo) / (nodes - 1) : 0.0; }
    double value(int i) const {
        if (nodes <= 1) return lo;
        // Symmetric axes are mirrored exactly, with an exact zero in the middle.
        if (lo == -hi) return hi * (2 * i - (nodes - 1)) / (nodes - 1);
        return lo + (hi - lo) * i / (nodes - 1);
    }

    struct Bracket {
        int i0;        // left node
        int i1;        // right node (== i0 at boundaries or exact hits)
        double w1;     // weight of the right node
        bool clamped;  // x fell outside [lo, hi]
    };

    Bracket locate(double x) const {
        if (nodes == 1) return {0, 0, 0.0, x != lo};
        if (x <= lo) return {0, 0, 0.0, x < lo};
        if (x >= hi) return {nodes - 1, nodes - 1, 0.0, x > hi};
        const double u = (x - lo) / step();
        int i = static_cast<int>(std::floor(u));
        if (i >= nodes - 1) i = nodes - 2;
        double w = u - i;
        // Snap near-exact hits so quadrature nodes landing on the lattice
        // touch a single point.
        if (w < 1e-12) return {i, i, 0.0, false};
        if (w > 1.0 - 1e-12) return {i + 1, i + 1, 0.0, false};
        return {i, i + 1, w, false};
    }

    int nearest(double x) const {
        if (nodes == 1) return 0;
        const double u = std::round((x - lo) / step());
        return static_cast<int>(std::clamp(u, 0.0, static_cast<double>(nodes - 1)));
    }
};

/// Outer-game lattice plus auction truncation.
struct GridSpec {
    UniformAxis s;    // gap s = P - P*_t, symmetric about 0
    int n_max_a = 15;
    int n_max_b = 15;
    UniformAxis l_a;  // accumulated cost of Player a
    UniformAxis l_b;
    int m_max = 0;    // auction jump-count truncation
    double delta_auc = 0.0;  // 0 selects min(0.01 h, 0.5 / (2 lambda_plus))

    /// Smallest m_max admitted for these parameters.
    static int min_m_max(const ModelParams& p) {
        const double lh = p.lambda_plus * p.h;
        return static_cast<int>(std::ceil(std::ceil(lh) + 5.0 * std::sqrt(lh)));
    }

    /// n_max needed so that no reachable count is ever clamped.
    static int safe_n_max(const ModelParams& p, Player who) {
        return static_cast<int>(std::ceil((p.lambda_plus + p.v(who)) * p.T)) + 2;
    }

    double auction_step(const ModelParams& p) const {
        const double target =
            delta_auc > 0.0 ? delta_auc : std::min(0.01 * p.h, 0.5 / (2.0 * p.lambda_plus));
        const int n = std::max(1, static_cast<int>(std::ceil(p.h / target - 1e-9)));
        return p.h / n;
    }

    int auction_steps(const ModelParams& p) const {
        return static_cast<int>(std::llround(p.h / auction_step(p)));
    }

    /// Desk-scale lattice: 21 gap nodes spaced so that 3-point Gauss-Hermite
    /// nodes land on the lattice, 15 counts per player, 11 cash nodes per player.
    static GridSpec desk(const ModelParams& p) {
        GridSpec g;
        const double ds = p.sigma > 0.0 ? p.sigma * std::sqrt(3.0 * p.delta) : 0.01;
        g.s = {-10.0 * ds, 10.0 * ds, 21};
        g.n_max_a = 15;
        g.n_max_b = 15;
        g.l_a = {0.0, default_l_max(p, Player::a, g.s.hi), 11};
        g.l_b = {0.0, default_l_max(p, Player::b, g.s.hi), 11};
        g.m_max = min_m_max(p);
        return g;
    }

    /// Cash bound: the penalty of never trading plus two trades at the gap bound.
    static double default_l_max(const ModelParams& p, Player who, double s_bound) {
        const double vT = p.v(who) * p.T;
        const double l = p.q * vT * vT * p.T / 3.0 + 2.0 * s_bound;
        return l > 0.0 ? l : 1.0;
    }

    /// Throws on hard violations; returns advisory warnings.
    std::vector<std::string> validate(const ModelParams& p) const {
        std::vector<std::string> warnings;
        auto require = [](bool ok, const std::string& msg) {
            if (!ok) throw ConfigError(msg);
        };
        require(s.nodes >= 3 && s.nodes % 2 == 1, "s_nodes must be odd and >= 3");
        require(std::abs(s.lo + s.hi) <= 1e-12 * std::max(1.0, s.hi) && s.hi > 0.0,
                "s axis must be symmetric about 0");
        require(n_max_a >= 1 && n_max_b >= 1, "n_max must be >= 1");
        require(l_a.nodes >= 2 && l_b.nodes >= 2, "cash axes need >= 2 nodes");
        require(l_a.hi > l_a.lo && l_b.hi > l_b.lo, "cash axes must have hi > lo");
        require(m_max >= min_m_max(p),
                "m_max=" + std::to_string(m_max) + " below ceil(lambda_plus h) + 5 sqrt(lambda_plus h) = " +
                    std::to_string(min_m_max(p)));
        const double da = auction_step(p);
        require(da * 2.0 * p.lambda_plus < 1.0,
                "auction step violates delta_auc (lambda_a + lambda_b) < 1");
        require(p.delta * 2.0 * p.lambda_plus < 1.0,
                "outer step violates delta (lambda_a + lambda_b) < 1");
        if (n_max_a < safe_n_max(p, Player::a) || n_max_b < safe_n_max(p, Player::b)) {
            warnings.push_back("n_max below ceil((lambda_plus + v) T) + 2 = " +
                               std::to_string(std::max(safe_n_max(p, Player::a),
                                                       safe_n_max(p, Player::b))) +
                               "; counts beyond n_max are clamped and counted");
        }
        return warnings;
    }
};

/// Outer state at grid time t = k delta.
struct OuterState {
    int k = 0;
    double s = 0.0;
    int n_a = 0;
    int n_b = 0;
    double l_a = 0.0;
    double l_b = 0.0;
};

/// Extreme point of mu -> mu * increment over [lambda_minus, lambda_plus].
/// A zero increment returns lambda_minus.
inline double bang_bang_intensity(double increment, Side side, const ModelParams& p) {
    if (increment == 0.0) return p.lambda_minus;
    const bool rising = increment > 0.0;
    if (side == Side::minimizer) return rising ? p.lambda_minus : p.lambda_plus;
    return rising ? p.lambda_plus : p.lambda_minus;
}

struct AuctionPayoff {
    double a = 0.0;  // cost of Player a
    double b = 0.0;  // gain of Player b
};

/// Closed-form auction settlement: target penalties over the auction plus the
/// clearing-price impact (N^a - N^b)/K shared by the two sides.
inline AuctionPayoff terminal_auction_payoff(double x_a, double x_b, int m_a, int m_b, int np_a,
                                             int np_b, const ModelParams& p) {
    const double na = static_cast<double>(m_a + np_a);
    const double nb = static_cast<double>(m_b + np_b);
    const double imbalance = (na - nb) / p.K;
    const double dev_a = p.v_a * p.h - x_a - na;
    const double dev_b = p.v_b * p.h - x_b - nb;
    return {p.q * p.h * dev_a * dev_a + na * imbalance,
            -p.q * p.h * dev_b * dev_b + nb * imbalance};
}

}  // namespace ahead

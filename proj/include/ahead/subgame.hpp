#pragma once

// Two-player auction sub-game on [tau, tau + h].
//
// Both takers control Poisson order intensities in [lambda_minus, lambda_plus];
// the state is the pair of auction jump counts (m_a, m_b) on [0, m_max]^2 and
// the payoff is terminal_auction_payoff. The value system is integrated
// backward from t = h with the policies frozen over each step of length
// delta_auc at their bang-bang values (Jacobi update: both players read the
// same time slice). Within a step the frozen generator is applied either
// exactly (truncated Taylor series of the matrix exponential) or by one
// explicit Euler step.

#include <ahead/model.hpp>
#include <ahead/parallel.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace ahead {

enum class AuctionScheme : std::uint8_t { exponential, euler };

inline const char* to_string(AuctionScheme s) {
    return s == AuctionScheme::exponential ? "exponential" : "euler";
}

struct SubgameKey {
    double x_a = 0.0;  // N^a_tau - v^a tau
    double x_b = 0.0;
    int np_a = 0;      // committed volumes N^a_+, N^b_+
    int np_b = 0;
};

struct SubgameOptions {
    AuctionScheme scheme = AuctionScheme::exponential;
    bool keep_policies = false;
    bool keep_values = false;
    double x_quantum = 1e-9;  // cache key resolution for x_a, x_b
};

/// Solved auction sub-game for one key.
struct SubgameTable {
    SubgameKey key;
    int m_max = 0;
    int steps = 0;
    double delta_auc = 0.0;
    double lambda_minus = 0.0;
    double lambda_plus = 0.0;
    double g_a = 0.0;  // W_a(0, 0, 0)
    double g_b = 0.0;  // W_b(0, 0, 0)
    int max_taylor_terms = 0;

    // policy[step * nodes + m_a * (m_max + 1) + m_b]: bit 0 set when a plays
    // lambda_plus on [step, step+1) * delta_auc, bit 1 likewise for b.
    std::vector<std::uint8_t> policy;
    // values_x[j * nodes + node] at t = j * delta_auc, j = 0..steps.
    std::vector<double> values_a;
    std::vector<double> values_b;

    int side() const { return m_max + 1; }
    std::size_t nodes() const { return static_cast<std::size_t>(side()) * side(); }
    std::size_t node(int m_a, int m_b) const {
        return static_cast<std::size_t>(m_a) * side() + static_cast<std::size_t>(m_b);
    }

    /// Intensity played by `who` on step `step` at (m_a, m_b); requires policies.
    double intensity(Player who, int step, int m_a, int m_b) const {
        const auto bits = policy[static_cast<std::size_t>(step) * nodes() + node(m_a, m_b)];
        const bool high = who == Player::a ? (bits & 1u) : (bits & 2u);
        return high ? lambda_plus : lambda_minus;
    }

    double value(Player who, int j, int m_a, int m_b) const {
        const auto& v = who == Player::a ? values_a : values_b;
        return v[static_cast<std::size_t>(j) * nodes() + node(m_a, m_b)];
    }
};

/// Upper bound on |W_i| over the lattice.
inline double subgame_value_bound(const SubgameKey& key, const ModelParams& p, int m_max, Player who) {
    const double x = who == Player::a ? key.x_a : key.x_b;
    const double v = p.v(who);
    const int np = who == Player::a ? key.np_a : key.np_b;
    const double dev = v * p.h + std::abs(x) + m_max + np;
    return p.q * p.h * dev * dev + (m_max + np) * (2.0 * m_max + key.np_a + key.np_b) / p.K;
}

inline SubgameTable solve_subgame(const SubgameKey& key, const ModelParams& p, const GridSpec& grid,
                                  const SubgameOptions& opt = {}) {
    if (key.np_a < 0 || key.np_b < 0) throw ConfigError("committed volumes must be >= 0");
    const int M = grid.m_max;
    if (M < 1) throw ConfigError("m_max must be >= 1");
    const double dt = grid.auction_step(p);
    if (dt * 2.0 * p.lambda_plus >= 1.0) {
        throw ConfigError("auction grid rejected: delta_auc (lambda_a + lambda_b) >= 1");
    }
    const int steps = grid.auction_steps(p);
    const int L = M + 1;
    const std::size_t nodes = static_cast<std::size_t>(L) * L;

    SubgameTable table;
    table.key = key;
    table.m_max = M;
    table.steps = steps;
    table.delta_auc = dt;
    table.lambda_minus = p.lambda_minus;
    table.lambda_plus = p.lambda_plus;
    if (opt.keep_policies) table.policy.assign(static_cast<std::size_t>(steps) * nodes, 0);
    if (opt.keep_values) {
        table.values_a.assign(static_cast<std::size_t>(steps + 1) * nodes, 0.0);
        table.values_b.assign(static_cast<std::size_t>(steps + 1) * nodes, 0.0);
    }

    std::vector<double> wa(nodes), wb(nodes);
    for (int ma = 0; ma <= M; ++ma) {
        for (int mb = 0; mb <= M; ++mb) {
            const auto pay = terminal_auction_payoff(key.x_a, key.x_b, ma, mb, key.np_a, key.np_b, p);
            wa[ma * L + mb] = pay.a;
            wb[ma * L + mb] = pay.b;
        }
    }
    auto keep_values = [&](int j) {
        if (!opt.keep_values) return;
        std::copy(wa.begin(), wa.end(), table.values_a.begin() + static_cast<std::ptrdiff_t>(j * nodes));
        std::copy(wb.begin(), wb.end(), table.values_b.begin() + static_cast<std::ptrdiff_t>(j * nodes));
    };
    keep_values(steps);

    // Effective rates (zero across the absorbing edge).
    std::vector<double> ra(nodes), rb(nodes);
    std::vector<double> ta(nodes), tb(nodes), na(nodes), nb(nodes);

    // out = scale * Q f for both value fields; returns max |out|. Rates are
    // zero on the absorbing edges, so the edge rows read padded neighbours
    // multiplied by zero and need no branches.
    auto apply_generator = [&](const std::vector<double>& fa, const std::vector<double>& fb,
                               std::vector<double>& outa, std::vector<double>& outb, double scale) {
        double peak = 0.0;
        const double* pa = fa.data();
        const double* pb = fb.data();
        for (std::size_t i = 0; i < nodes; ++i) {
            const std::size_t up = i + L < nodes ? i + L : i;
            const std::size_t right = i + 1 < nodes ? i + 1 : i;
            const double qa = ra[i] * (pa[up] - pa[i]) + rb[i] * (pa[right] - pa[i]);
            const double qb = ra[i] * (pb[up] - pb[i]) + rb[i] * (pb[right] - pb[i]);
            outa[i] = scale * qa;
            outb[i] = scale * qb;
            peak = std::max(peak, std::max(std::abs(outa[i]), std::abs(outb[i])));
        }
        return peak;
    };

    for (int step = steps - 1; step >= 0; --step) {
        for (int ma = 0; ma <= M; ++ma) {
            for (int mb = 0; mb <= M; ++mb) {
                const std::size_t i = static_cast<std::size_t>(ma) * L + mb;
                const double da = ma < M ? wa[i + L] - wa[i] : 0.0;
                const double db = mb < M ? wb[i + 1] - wb[i] : 0.0;
                const double la = bang_bang_intensity(da, Side::minimizer, p);
                const double lb = bang_bang_intensity(db, Side::maximizer, p);
                ra[i] = ma < M ? la : 0.0;
                rb[i] = mb < M ? lb : 0.0;
                if (opt.keep_policies) {
                    table.policy[static_cast<std::size_t>(step) * nodes + i] =
                        static_cast<std::uint8_t>((la == p.lambda_plus ? 1u : 0u) |
                                                  (lb == p.lambda_plus ? 2u : 0u));
                }
            }
        }

        if (opt.scheme == AuctionScheme::euler) {
            apply_generator(wa, wb, na, nb, dt);
            for (std::size_t i = 0; i < nodes; ++i) {
                wa[i] += na[i];
                wb[i] += nb[i];
            }
            table.max_taylor_terms = 1;
        } else {
            ta = wa;
            tb = wb;
            double scale_ref = 1.0;
            for (std::size_t i = 0; i < nodes; ++i) {
                scale_ref = std::max({scale_ref, std::abs(wa[i]), std::abs(wb[i])});
            }
            int k = 1;
            for (; k <= 60; ++k) {
                const double peak = apply_generator(ta, tb, na, nb, dt / k);
                for (std::size_t i = 0; i < nodes; ++i) {
                    wa[i] += na[i];
                    wb[i] += nb[i];
                }
                std::swap(ta, na);
                std::swap(tb, nb);
                if (peak <= 1e-17 * scale_ref) break;
            }
            table.max_taylor_terms = std::max(table.max_taylor_terms, k);
        }

        for (std::size_t i = 0; i < nodes; ++i) {
            if (!std::isfinite(wa[i]) || !std::isfinite(wb[i])) {
                char buf[160];
                std::snprintf(buf, sizeof buf, "non-finite sub-game value at step %d, m_a=%d, m_b=%d", step,
                              static_cast<int>(i / L), static_cast<int>(i % L));
                throw NumericalError(buf);
            }
        }
        keep_values(step);
    }

    table.g_a = wa[0];
    table.g_b = wb[0];
    return table;
}

struct AuctionValues {
    double g_a = 0.0;
    double g_b = 0.0;
};

/// Memoised sub-game values keyed by quantised pre-auction deviations.
/// Concurrent lookups share a reader lock; inserts are exclusive. Misses are
/// solved outside the lock, so two racing misses compute identical values.
class SubgameCache {
public:
    struct QuantKey {
        std::int64_t x_a;
        std::int64_t x_b;
        int np_a;
        int np_b;
        friend bool operator==(const QuantKey&, const QuantKey&) = default;
        friend auto operator<=>(const QuantKey&, const QuantKey&) = default;
    };

    SubgameCache(const ModelParams& params, const GridSpec& grid, SubgameOptions options = {})
        : params_(params), grid_(grid), options_(options) {
        options_.keep_values = false;
        if (!(options_.x_quantum > 0.0)) throw ConfigError("x_quantum must be > 0");
        inv_quantum_ = 1.0 / options_.x_quantum;
        if (std::abs(inv_quantum_ - std::round(inv_quantum_)) < 1e-6) inv_quantum_ = std::round(inv_quantum_);
    }

    const ModelParams& params() const { return params_; }
    const GridSpec& grid() const { return grid_; }
    const SubgameOptions& options() const { return options_; }

    QuantKey quantize(const SubgameKey& k) const {
        return {std::llround(k.x_a * inv_quantum_), std::llround(k.x_b * inv_quantum_), k.np_a, k.np_b};
    }

    SubgameKey canonical(const QuantKey& q) const {
        return {static_cast<double>(q.x_a) / inv_quantum_, static_cast<double>(q.x_b) / inv_quantum_, q.np_a,
                q.np_b};
    }

    AuctionValues values(const SubgameKey& key) {
        const QuantKey q = quantize(key);
        {
            std::shared_lock lock(mutex_);
            if (auto it = values_.find(q); it != values_.end()) return it->second;
        }
        SubgameOptions opt = options_;
        opt.keep_policies = false;
        const SubgameTable t = solve_subgame(canonical(q), params_, grid_, opt);
        std::unique_lock lock(mutex_);
        auto [it, inserted] = values_.emplace(q, AuctionValues{t.g_a, t.g_b});
        if (inserted) ++solves_;
        return it->second;
    }

    /// Full table with policies, for simulation.
    std::shared_ptr<const SubgameTable> table(const SubgameKey& key) {
        const QuantKey q = quantize(key);
        {
            std::shared_lock lock(mutex_);
            if (auto it = tables_.find(q); it != tables_.end()) return it->second;
        }
        SubgameOptions opt = options_;
        opt.keep_policies = true;
        auto t = std::make_shared<const SubgameTable>(solve_subgame(canonical(q), params_, grid_, opt));
        std::unique_lock lock(mutex_);
        values_.try_emplace(q, AuctionValues{t->g_a, t->g_b});
        auto [it, inserted] = tables_.emplace(q, std::move(t));
        return it->second;
    }

    /// Solves every missing key, spreading independent solves over workers.
    void prefill(const std::vector<SubgameKey>& keys, int threads) {
        std::vector<QuantKey> missing;
        {
            std::shared_lock lock(mutex_);
            std::map<QuantKey, int> seen;
            for (const auto& k : keys) {
                const QuantKey q = quantize(k);
                if (values_.count(q) == 0 && seen.emplace(q, 0).second) missing.push_back(q);
            }
        }
        std::vector<AuctionValues> solved(missing.size());
        SubgameOptions opt = options_;
        opt.keep_policies = false;
        parallel_for(
            missing.size(), threads,
            [&](std::size_t lo, std::size_t hi) {
                for (std::size_t i = lo; i < hi; ++i) {
                    const SubgameTable t = solve_subgame(canonical(missing[i]), params_, grid_, opt);
                    solved[i] = {t.g_a, t.g_b};
                }
            },
            1);
        std::unique_lock lock(mutex_);
        for (std::size_t i = 0; i < missing.size(); ++i) {
            if (values_.emplace(missing[i], solved[i]).second) ++solves_;
        }
    }

    void insert(const QuantKey& q, const AuctionValues& v) {
        std::unique_lock lock(mutex_);
        values_.insert_or_assign(q, v);
    }

    /// Entries sorted by key.
    std::vector<std::pair<QuantKey, AuctionValues>> snapshot() const {
        std::shared_lock lock(mutex_);
        std::vector<std::pair<QuantKey, AuctionValues>> out(values_.begin(), values_.end());
        std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
        return out;
    }

    std::size_t size() const {
        std::shared_lock lock(mutex_);
        return values_.size();
    }

    /// Number of solves performed by this object (cache misses).
    std::size_t solves() const {
        std::shared_lock lock(mutex_);
        return solves_;
    }

private:
    struct QuantKeyHash {
        std::size_t operator()(const QuantKey& k) const {
            std::uint64_t h = 1469598103934665603ULL;
            for (std::uint64_t x : {static_cast<std::uint64_t>(k.x_a), static_cast<std::uint64_t>(k.x_b),
                                    static_cast<std::uint64_t>(k.np_a), static_cast<std::uint64_t>(k.np_b)}) {
                h = (h ^ x) * 1099511628211ULL;
                h ^= h >> 29;
            }
            return static_cast<std::size_t>(h);
        }
    };

    ModelParams params_;
    GridSpec grid_;
    SubgameOptions options_;
    double inv_quantum_ = 1e9;
    mutable std::shared_mutex mutex_;
    std::unordered_map<QuantKey, AuctionValues, QuantKeyHash> values_;
    std::unordered_map<QuantKey, std::shared_ptr<const SubgameTable>, QuantKeyHash> tables_;
    std::size_t solves_ = 0;
};

// ---------------------------------------------------------------------------
// Role wrappers g^first, g^second, g^sim, g^T.

enum class Role : std::uint8_t { first, second, sim, at_T };

inline const char* to_string(Role r) {
    switch (r) {
        case Role::first: return "first";
        case Role::second: return "second";
        case Role::sim: return "sim";
        case Role::at_T: return "at_T";
    }
    return "?";
}

/// Commitments (N^a_+, N^b_+) for a deterministic role; sim in randomized
/// mode has no single commitment and is rejected here.
inline std::pair<int, int> commitments(Role role, Player who, const ModelParams& p) {
    const bool is_a = who == Player::a;
    switch (role) {
        case Role::first: return is_a ? std::pair{p.n_hat, 0} : std::pair{0, p.n_hat};
        case Role::second: return is_a ? std::pair{0, p.n_hat} : std::pair{p.n_hat, 0};
        case Role::sim:
            if (p.sim_mode != SimTriggerMode::fixed) throw ConfigError("randomized sim role has no fixed commitment");
            return {p.n_hat_ab, p.n_hat_ab};
        case Role::at_T: return {0, 0};
    }
    return {0, 0};
}

inline SubgameKey role_key(Role role, Player who, double t, int n_a, int n_b, const ModelParams& p) {
    const auto [np_a, np_b] = commitments(role, who, p);
    return {target_deviation(n_a, p.v_a, t, p.target_rounding),
            target_deviation(n_b, p.v_b, t, p.target_rounding), np_a, np_b};
}

inline double g_wrapper(Role role, Player who, double t, int n_a, int n_b, const ModelParams& p,
                        SubgameCache& cache) {
    if (t < -1e-12 || t > p.T + 1e-9) throw ConfigError("g_wrapper: t outside [0, T]");
    if (role == Role::sim && p.sim_mode == SimTriggerMode::randomized_half) {
        return 0.5 * (g_wrapper(Role::first, who, t, n_a, n_b, p, cache) +
                      g_wrapper(Role::second, who, t, n_a, n_b, p, cache));
    }
    const auto v = cache.values(role_key(role, who, t, n_a, n_b, p));
    return who == Player::a ? v.g_a : v.g_b;
}

/// All stop payoffs g^{first,second,sim} of both players at (t, n_a, n_b).
struct RoleValues {
    double first_a = 0.0, second_a = 0.0, sim_a = 0.0;
    double first_b = 0.0, second_b = 0.0, sim_b = 0.0;
};

inline RoleValues role_values(double t, int n_a, int n_b, const ModelParams& p, SubgameCache& cache) {
    // (n_hat, 0) yields g^first_a and g^second_b; (0, n_hat) yields g^second_a and g^first_b.
    const auto a_first = cache.values(role_key(Role::first, Player::a, t, n_a, n_b, p));
    const auto b_first = cache.values(role_key(Role::first, Player::b, t, n_a, n_b, p));
    RoleValues r;
    r.first_a = a_first.g_a;
    r.second_b = a_first.g_b;
    r.first_b = b_first.g_b;
    r.second_a = b_first.g_a;
    if (p.sim_mode == SimTriggerMode::randomized_half) {
        r.sim_a = 0.5 * (r.first_a + r.second_a);
        r.sim_b = 0.5 * (r.first_b + r.second_b);
    } else {
        const auto sim = cache.values(role_key(Role::sim, Player::a, t, n_a, n_b, p));
        r.sim_a = sim.g_a;
        r.sim_b = sim.g_b;
    }
    return r;
}

/// Keys needed by role_values at (t, n_a, n_b), plus g^T when `at_T`.
inline void append_role_keys(std::vector<SubgameKey>& out, double t, int n_a, int n_b, const ModelParams& p,
                             bool at_T) {
    if (at_T) {
        out.push_back(role_key(Role::at_T, Player::a, t, n_a, n_b, p));
        return;
    }
    out.push_back(role_key(Role::first, Player::a, t, n_a, n_b, p));
    out.push_back(role_key(Role::first, Player::b, t, n_a, n_b, p));
    if (p.sim_mode == SimTriggerMode::fixed) out.push_back(role_key(Role::sim, Player::a, t, n_a, n_b, p));
}

struct EpsilonBounds {
    double eps_a = 0.0;
    double eps_b = 0.0;
    // Node attaining each maximum.
    int k_a = 0, n_a_at_a = 0, n_b_at_a = 0;
    int k_b = 0, n_a_at_b = 0, n_b_at_b = 0;
};

/// Grid maxima of the first-mover advantage over t in {0, delta, ..., T} and
/// counts up to n_max, divided by h. Requires nearest-integer targets.
inline EpsilonBounds epsilon_bounds(const ModelParams& p, const GridSpec& grid, SubgameCache& cache,
                                    int threads = 1) {
    if (p.target_rounding != TargetRounding::nearest_integer) {
        throw ConfigError("epsilon_bounds requires target_rounding = nearest_integer");
    }
    const int K = p.steps();
    std::vector<SubgameKey> keys;
    for (int k = 0; k <= K; ++k) {
        for (int na = 0; na <= grid.n_max_a; ++na) {
            for (int nb = 0; nb <= grid.n_max_b; ++nb) append_role_keys(keys, p.time(k), na, nb, p, false);
        }
    }
    cache.prefill(keys, threads);

    EpsilonBounds e;
    for (int k = 0; k <= K; ++k) {
        for (int na = 0; na <= grid.n_max_a; ++na) {
            for (int nb = 0; nb <= grid.n_max_b; ++nb) {
                const RoleValues r = role_values(p.time(k), na, nb, p, cache);
                const double ea = std::max(std::max(r.sim_a, r.second_a) - r.first_a, 0.0) / p.h;
                const double eb = std::max(r.first_b - std::min(r.sim_b, r.second_b), 0.0) / p.h;
                if (ea > e.eps_a) e = {ea, e.eps_b, k, na, nb, e.k_b, e.n_a_at_b, e.n_b_at_b};
                if (eb > e.eps_b) {
                    e.eps_b = eb;
                    e.k_b = k;
                    e.n_a_at_b = na;
                    e.n_b_at_b = nb;
                }
            }
        }
    }
    return e;
}

}  // namespace ahead

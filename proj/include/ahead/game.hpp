#pragma once

// Outer discretised game: backward induction over t = k delta on the lattice
// (s, n_a, n_b, l_a, l_b). Each step plays the per-interval Nash game in
// order intensities (decoupled because acceptance regions are disjoint),
// then the 2x2 stopping game against the auction payoffs.

#include <ahead/model.hpp>
#include <ahead/parallel.hpp>
#include <ahead/stop_game.hpp>
#include <ahead/subgame.hpp>

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace ahead {

enum class Quadrature : std::uint8_t { gauss_hermite3, gauss_hermite5 };

inline const char* to_string(Quadrature q) {
    return q == Quadrature::gauss_hermite3 ? "gauss_hermite3" : "gauss_hermite5";
}

struct QuadratureRule {
    int n = 0;
    std::array<double, 5> z{};
    std::array<double, 5> w{};
};

/// Gauss-Hermite rules for a standard normal variable.
inline QuadratureRule quadrature_rule(Quadrature q) {
    if (q == Quadrature::gauss_hermite3) {
        const double r3 = std::sqrt(3.0);
        return {3, {-r3, 0.0, r3, 0.0, 0.0}, {1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0, 0.0, 0.0}};
    }
    const double r10 = std::sqrt(10.0);
    const double z1 = std::sqrt(5.0 - r10), z2 = std::sqrt(5.0 + r10);
    auto he4 = [](double x) { return x * x * x * x - 6.0 * x * x + 3.0; };
    const double w1 = 120.0 / (25.0 * he4(z1) * he4(z1));
    const double w2 = 120.0 / (25.0 * he4(z2) * he4(z2));
    return {5, {-z2, -z1, 0.0, z1, z2}, {w2, w1, 8.0 / 15.0, w1, w2}};
}

/// Flat indexing of the outer lattice.
struct OuterLattice {
    int S = 0, NA = 0, NB = 0, LA = 0, LB = 0;

    OuterLattice() = default;
    explicit OuterLattice(const GridSpec& g)
        : S(g.s.nodes), NA(g.n_max_a + 1), NB(g.n_max_b + 1), LA(g.l_a.nodes), LB(g.l_b.nodes) {}

    std::size_t size() const {
        return static_cast<std::size_t>(S) * NA * NB * LA * LB;
    }

    std::size_t index(int is, int na, int nb, int ja, int jb) const {
        return (((static_cast<std::size_t>(is) * NA + na) * NB + nb) * LA + ja) * LB + jb;
    }

    struct Coords {
        int is, na, nb, ja, jb;
    };

    Coords decode(std::size_t i) const {
        Coords c{};
        c.jb = static_cast<int>(i % LB);
        i /= LB;
        c.ja = static_cast<int>(i % LA);
        i /= LA;
        c.nb = static_cast<int>(i % NB);
        i /= NB;
        c.na = static_cast<int>(i % NA);
        c.is = static_cast<int>(i / NA);
        return c;
    }
};

struct ClampCounts {
    std::uint64_t s = 0;  // gap quadrature node outside the s axis
    std::uint64_t l = 0;  // cash outside its axis
    std::uint64_t n = 0;  // count pushed past n_max
    std::uint64_t total() const { return s + l + n; }
};

/// Interpolation stencil of one transition branch: sum_j w[j] f[idx[j]].
struct Stencil {
    static constexpr int kCap = 40;
    int size = 0;
    std::array<std::uint32_t, kCap> idx{};
    std::array<double, kCap> w{};
    bool s_clamped = false;
    bool l_clamped = false;
    bool n_clamped = false;

    double apply(const double* f) const {
        double acc = 0.0;
        for (int j = 0; j < size; ++j) acc += w[static_cast<std::size_t>(j)] * f[idx[static_cast<std::size_t>(j)]];
        return acc;
    }
    double apply(const std::vector<double>& f) const { return apply(f.data()); }
};

enum class Branch : std::uint8_t { none, a_trade, b_trade };

/// Branch transition shared by every cash node of one (s, n_a, n_b) block:
/// gap quadrature points resolve to lattice blocks, cash moves per node.
struct BlockBranch {
    int ns = 0;
    std::array<std::size_t, 10> base{};  // flat index of (s', n_a', n_b', 0, 0)
    std::array<double, 10> w{};
    bool s_clamped = false;
    bool n_clamped = false;
    std::vector<UniformAxis::Bracket> la, lb;  // indexed by source ja, jb

    bool l_clamped(int ja, int jb) const {
        return la[static_cast<std::size_t>(ja)].clamped || lb[static_cast<std::size_t>(jb)].clamped;
    }

    double apply(const double* f, int ja, int jb, int LB) const {
        const auto& ba = la[static_cast<std::size_t>(ja)];
        const auto& bb = lb[static_cast<std::size_t>(jb)];
        const std::size_t r0 = static_cast<std::size_t>(ba.i0) * LB, r1 = static_cast<std::size_t>(ba.i1) * LB;
        double acc = 0.0;
        for (int q = 0; q < ns; ++q) {
            const double* g = f + base[static_cast<std::size_t>(q)];
            const double v0 = (1.0 - bb.w1) * g[r0 + bb.i0] + bb.w1 * g[r0 + bb.i1];
            const double v1 = (1.0 - bb.w1) * g[r1 + bb.i0] + bb.w1 * g[r1 + bb.i1];
            acc += w[static_cast<std::size_t>(q)] * ((1.0 - ba.w1) * v0 + ba.w1 * v1);
        }
        return acc;
    }
    double apply(const std::vector<double>& f, int ja, int jb, int LB) const { return apply(f.data(), ja, jb, LB); }
};

/// One-step transition of the outer state.
class OuterStepper {
public:
    OuterStepper(const ModelParams& p, const GridSpec& g, Quadrature q = Quadrature::gauss_hermite3,
                 bool trading_enabled = true)
        : p_(p), g_(g), lat_(g), rule_(quadrature_rule(q)), trading_(trading_enabled),
          sd_(p.sigma * std::sqrt(p.delta)) {}

    const OuterLattice& lattice() const { return lat_; }
    bool trading_enabled() const { return trading_; }

    /// Left-point penalty accrued over one step.
    double penalty(Player who, int k, int n) const {
        const double d = p_.v(who) * p_.time(k) - n;
        return p_.q * d * d * p_.delta;
    }

    /// Probability that `who` trades on this step at gap s under intensity lambda.
    double trade_probability(Player who, double s, double lambda) const {
        if (!trading_) return 0.0;
        const bool accepted = who == Player::a ? s > 0.0 : s < 0.0;
        return accepted ? lambda * p_.delta : 0.0;
    }

    /// Block form of branch() for all cash nodes at (s node is, n_a, n_b).
    void prepare(int k, int is, int n_a, int n_b, Branch br, BlockBranch& out) const {
        const double s = g_.s.value(is);
        int na = n_a, nb = n_b;
        double da = penalty(Player::a, k, n_a), db = penalty(Player::b, k, n_b);
        out.n_clamped = false;
        if (br == Branch::a_trade) {
            da += s;
            if (++na > lat_.NA - 1) {
                na = lat_.NA - 1;
                out.n_clamped = true;
            }
        } else if (br == Branch::b_trade) {
            db -= s;
            if (++nb > lat_.NB - 1) {
                nb = lat_.NB - 1;
                out.n_clamped = true;
            }
        }
        out.la.resize(static_cast<std::size_t>(lat_.LA));
        out.lb.resize(static_cast<std::size_t>(lat_.LB));
        for (int j = 0; j < lat_.LA; ++j) out.la[static_cast<std::size_t>(j)] = g_.l_a.locate(g_.l_a.value(j) + da);
        for (int j = 0; j < lat_.LB; ++j) out.lb[static_cast<std::size_t>(j)] = g_.l_b.locate(g_.l_b.value(j) + db);
        out.ns = 0;
        out.s_clamped = false;
        for (int qi = 0; qi < rule_.n; ++qi) {
            const auto q = static_cast<std::size_t>(qi);
            const auto bs = g_.s.locate(s + sd_ * rule_.z[q]);
            out.s_clamped = out.s_clamped || bs.clamped;
            const int pts = bs.i0 == bs.i1 ? 1 : 2;
            for (int a = 0; a < pts; ++a) {
                const double ws = a ? bs.w1 : 1.0 - bs.w1;
                const auto j = static_cast<std::size_t>(out.ns++);
                out.base[j] = lat_.index(a ? bs.i1 : bs.i0, na, nb, 0, 0);
                out.w[j] = rule_.w[q] * ws;
            }
        }
    }

    Stencil branch(int k, double s, int n_a, int n_b, double l_a, double l_b, Branch br) const {
        Stencil st;
        int na = n_a, nb = n_b;
        double da = penalty(Player::a, k, n_a), db = penalty(Player::b, k, n_b);
        if (br == Branch::a_trade) {
            da += s;
            if (++na > lat_.NA - 1) {
                na = lat_.NA - 1;
                st.n_clamped = true;
            }
        } else if (br == Branch::b_trade) {
            db -= s;
            if (++nb > lat_.NB - 1) {
                nb = lat_.NB - 1;
                st.n_clamped = true;
            }
        }
        const double la = l_a + da, lb = l_b + db;
        const auto ba = g_.l_a.locate(la);
        const auto bb = g_.l_b.locate(lb);
        st.l_clamped = ba.clamped || bb.clamped;

        const std::array<std::pair<int, double>, 2> pa{{{ba.i0, 1.0 - ba.w1}, {ba.i1, ba.w1}}};
        const std::array<std::pair<int, double>, 2> pb{{{bb.i0, 1.0 - bb.w1}, {bb.i1, bb.w1}}};
        const int npa = ba.i0 == ba.i1 ? 1 : 2;
        const int npb = bb.i0 == bb.i1 ? 1 : 2;

        for (int qi = 0; qi < rule_.n; ++qi) {
            const auto q = static_cast<std::size_t>(qi);
            const auto bs = g_.s.locate(s + sd_ * rule_.z[q]);
            st.s_clamped = st.s_clamped || bs.clamped;
            const std::array<std::pair<int, double>, 2> ps{{{bs.i0, 1.0 - bs.w1}, {bs.i1, bs.w1}}};
            const int nps = bs.i0 == bs.i1 ? 1 : 2;
            for (int a = 0; a < nps; ++a) {
                for (int b = 0; b < npa; ++b) {
                    for (int c = 0; c < npb; ++c) {
                        const auto& [is, ws] = ps[static_cast<std::size_t>(a)];
                        const auto& [ja, wa] = pa[static_cast<std::size_t>(b)];
                        const auto& [jb, wb] = pb[static_cast<std::size_t>(c)];
                        const double w = rule_.w[q] * ws * wa * wb;
                        if (w == 0.0) continue;
                        const auto j = static_cast<std::size_t>(st.size++);
                        st.idx[j] = static_cast<std::uint32_t>(lat_.index(is, na, nb, ja, jb));
                        st.w[j] = w;
                    }
                }
            }
        }
        return st;
    }

private:
    ModelParams p_;
    GridSpec g_;
    OuterLattice lat_;
    QuadratureRule rule_;
    bool trading_;
    double sd_;
};

/// One-step expectation of `next` from `node` under fixed intensities.
inline double step_expectation(const std::vector<double>& next, const OuterState& node, double lambda_a,
                               double lambda_b, const ModelParams& p, const GridSpec& g,
                               Quadrature q = Quadrature::gauss_hermite3, bool trading_enabled = true) {
    if (p.delta * (lambda_a + lambda_b) >= 1.0) throw ConfigError("step_expectation: delta (lambda_a + lambda_b) >= 1");
    const OuterStepper st(p, g, q, trading_enabled);
    const double pa = st.trade_probability(Player::a, node.s, lambda_a);
    const double pb = st.trade_probability(Player::b, node.s, lambda_b);
    double e = (1.0 - pa - pb) * st.branch(node.k, node.s, node.n_a, node.n_b, node.l_a, node.l_b, Branch::none).apply(next);
    if (pa > 0.0) e += pa * st.branch(node.k, node.s, node.n_a, node.n_b, node.l_a, node.l_b, Branch::a_trade).apply(next);
    if (pb > 0.0) e += pb * st.branch(node.k, node.s, node.n_a, node.n_b, node.l_a, node.l_b, Branch::b_trade).apply(next);
    if (!std::isfinite(e)) throw NumericalError("step_expectation: non-finite result");
    return e;
}

/// Per-interval Nash intensities at `node`. Only the player whose orders are
/// accepted at s has a live choice; the other plays lambda_minus.
inline std::pair<double, double> nash_step_intensities(const std::vector<double>& next_a,
                                                       const std::vector<double>& next_b,
                                                       const OuterState& node, const ModelParams& p,
                                                       const GridSpec& g,
                                                       Quadrature q = Quadrature::gauss_hermite3) {
    const OuterStepper st(p, g, q);
    const auto none = st.branch(node.k, node.s, node.n_a, node.n_b, node.l_a, node.l_b, Branch::none);
    if (node.s > 0.0) {
        const auto tr = st.branch(node.k, node.s, node.n_a, node.n_b, node.l_a, node.l_b, Branch::a_trade);
        return {bang_bang_intensity(tr.apply(next_a) - none.apply(next_a), Side::minimizer, p), p.lambda_minus};
    }
    if (node.s < 0.0) {
        const auto tr = st.branch(node.k, node.s, node.n_a, node.n_b, node.l_a, node.l_b, Branch::b_trade);
        return {p.lambda_minus, bang_bang_intensity(tr.apply(next_b) - none.apply(next_b), Side::maximizer, p)};
    }
    return {p.lambda_minus, p.lambda_minus};
}

enum class EquilibriumMode : std::uint8_t { pure, mixed };

struct GameOptions {
    EquilibriumMode mode = EquilibriumMode::mixed;
    Quadrature quadrature = Quadrature::gauss_hermite3;
    bool trading_enabled = true;
    bool keep_policies = true;    // policy slices for every k (simulation, duration)
    bool keep_values = false;     // U slices for every k
    bool compute_duration = true; // duration recursion alongside the values
    int threads = 1;
    double memory_budget_bytes = 8.0e9;
    std::optional<std::pair<double, double>> forced_p0;  // (p_a, p_b) imposed at k = 0
};

/// Policy of one time slice. code bits: 0 a plays lambda_plus, 1 b plays
/// lambda_plus, 2-3 class of p_a, 4-5 class of p_b (0 zero, 1 one, 2 mixed).
struct PolicySlice {
    struct Mixed {
        std::uint32_t node;
        double p_a;
        double p_b;
    };
    std::vector<std::uint8_t> code;
    std::vector<Mixed> mixed;  // sorted by node

    static std::uint8_t encode(bool la_high, bool lb_high, double p_a, double p_b) {
        auto cls = [](double x) -> unsigned { return x == 0.0 ? 0u : (x == 1.0 ? 1u : 2u); };
        return static_cast<std::uint8_t>((la_high ? 1u : 0u) | (lb_high ? 2u : 0u) | (cls(p_a) << 2) |
                                         (cls(p_b) << 4));
    }

    std::pair<double, double> probabilities(std::size_t node) const {
        const auto c = code[node];
        const unsigned ca = (c >> 2) & 3u, cb = (c >> 4) & 3u;
        if (ca != 2u && cb != 2u) return {static_cast<double>(ca), static_cast<double>(cb)};
        const auto it = std::lower_bound(mixed.begin(), mixed.end(), node,
                                         [](const Mixed& m, std::size_t n) { return m.node < n; });
        return {it->p_a, it->p_b};
    }

    bool high(Player who, std::size_t node) const {
        return (code[node] & (who == Player::a ? 1u : 2u)) != 0;
    }
};

struct GameStats {
    ClampCounts clamps;
    std::uint64_t mixed_nodes = 0;
    std::uint64_t multiple_pure = 0;  // nodes with more than one pure equilibrium
    double max_indifference_gap = 0.0;  // max |p - p_indifference| over mixed nodes
    std::size_t subgame_solves = 0;
    std::vector<std::string> warnings;
};

/// Solved outer game.
struct GameFields {
    ModelParams params;
    GridSpec grid;
    GameOptions options;
    OuterLattice lattice;
    int steps = 0;

    std::vector<PolicySlice> policy;  // k = 0..steps when kept
    std::vector<double> U_a0, U_b0;   // values at k = 0
    std::vector<double> E0;           // duration at k = 0 (when computed)
    std::vector<std::vector<double>> U_a, U_b;  // every k when kept
    GameStats stats;

    bool has_policies() const { return !policy.empty(); }

    double s_value(int is) const { return grid.s.value(is); }
    double l_value(Player who, int j) const { return who == Player::a ? grid.l_a.value(j) : grid.l_b.value(j); }

    std::pair<double, double> probabilities(int k, std::size_t node) const {
        return policy.at(static_cast<std::size_t>(k)).probabilities(node);
    }

    double intensity(Player who, int k, std::size_t node) const {
        return policy.at(static_cast<std::size_t>(k)).high(who, node) ? params.lambda_plus : params.lambda_minus;
    }

    /// Linear interpolation of a k = 0 slice in (s, l_a, l_b) at integer counts.
    double interpolate0(const std::vector<double>& f, double s, int n_a, int n_b, double l_a, double l_b) const {
        if (f.empty()) throw ConfigError("requested field slice was not computed");
        const auto bs = grid.s.locate(s);
        const auto ba = grid.l_a.locate(l_a);
        const auto bb = grid.l_b.locate(l_b);
        const int na = std::clamp(n_a, 0, lattice.NA - 1), nb = std::clamp(n_b, 0, lattice.NB - 1);
        double acc = 0.0;
        for (int a = 0; a < 2; ++a) {
            const double ws = a ? bs.w1 : 1.0 - bs.w1;
            if (ws == 0.0) continue;
            for (int b = 0; b < 2; ++b) {
                const double wa = b ? ba.w1 : 1.0 - ba.w1;
                if (wa == 0.0) continue;
                for (int c = 0; c < 2; ++c) {
                    const double wb = c ? bb.w1 : 1.0 - bb.w1;
                    if (wb == 0.0) continue;
                    acc += ws * wa * wb *
                           f[lattice.index(a ? bs.i1 : bs.i0, na, nb, b ? ba.i1 : ba.i0, c ? bb.i1 : bb.i0)];
                }
            }
        }
        return acc;
    }

    double value0(Player who, double s, int n_a = 0, int n_b = 0, double l_a = 0.0, double l_b = 0.0) const {
        return interpolate0(who == Player::a ? U_a0 : U_b0, s, n_a, n_b, l_a, l_b);
    }

    double duration0(double s, int n_a = 0, int n_b = 0, double l_a = 0.0, double l_b = 0.0) const {
        return interpolate0(E0, s, n_a, n_b, l_a, l_b);
    }
};

/// Rough peak memory of a solve, bytes.
inline double game_memory_estimate(const ModelParams& p, const GridSpec& g, const GameOptions& o) {
    const double nodes = static_cast<double>(OuterLattice(g).size());
    const double slices = p.steps() + 1.0;
    double bytes = nodes * 8.0 * 8.0;  // rolling value/duration slices and scratch
    if (o.keep_policies) bytes += nodes * slices * 1.1;
    if (o.keep_values) bytes += nodes * slices * 16.0;
    return bytes;
}

/// Backward induction. Pure mode applies the threshold rule and requires
/// all commitments to vanish.
inline GameFields backward_induction(const ModelParams& p, const GridSpec& g, SubgameCache& cache,
                                     const GameOptions& opt = {}) {
    p.validate();
    GameFields f;
    f.params = p;
    f.grid = g;
    f.options = opt;
    f.stats.warnings = g.validate(p);
    f.lattice = OuterLattice(g);
    f.steps = p.steps();
    if (opt.mode == EquilibriumMode::pure &&
        (p.n_hat != 0 || (p.sim_mode == SimTriggerMode::fixed && p.n_hat_ab != 0))) {
        throw ConfigError("pure mode requires n_hat = 0 and zero simultaneous commitments");
    }
    const double est = game_memory_estimate(p, g, opt);
    if (est > opt.memory_budget_bytes) {
        char buf[200];
        std::snprintf(buf, sizeof buf, "outer solve needs about %.2f GB, budget is %.2f GB", est / 1e9,
                      opt.memory_budget_bytes / 1e9);
        throw BudgetError(buf);
    }
    if (OuterLattice(g).size() >= (std::size_t{1} << 32)) throw BudgetError("outer lattice exceeds 2^32 nodes");

    const std::size_t solves_before = cache.solves();
    const OuterLattice& lat = f.lattice;
    const std::size_t N = lat.size();
    const int K = f.steps;
    const OuterStepper stepper(p, g, opt.quadrature, opt.trading_enabled);

    std::vector<double> ua(N), ub(N), e(N), ua_next(N), ub_next(N), e_next(N), pa_tmp(N), pb_tmp(N);
    std::vector<std::uint8_t> lam_bits(N);
    if (opt.keep_policies) f.policy.resize(static_cast<std::size_t>(K) + 1);
    if (opt.keep_values) {
        f.U_a.resize(static_cast<std::size_t>(K) + 1);
        f.U_b.resize(static_cast<std::size_t>(K) + 1);
    }

    std::vector<RoleValues> roles(static_cast<std::size_t>(lat.NA) * lat.NB);
    auto load_roles = [&](int k, bool at_T) {
        const double t = p.time(k);
        std::vector<SubgameKey> keys;
        for (int na = 0; na < lat.NA; ++na)
            for (int nb = 0; nb < lat.NB; ++nb) append_role_keys(keys, t, na, nb, p, at_T);
        cache.prefill(keys, opt.threads);
        for (int na = 0; na < lat.NA; ++na) {
            for (int nb = 0; nb < lat.NB; ++nb) {
                RoleValues r;
                if (at_T) {
                    const auto v = cache.values(role_key(Role::at_T, Player::a, t, na, nb, p));
                    r.first_a = r.second_a = r.sim_a = v.g_a;
                    r.first_b = r.second_b = r.sim_b = v.g_b;
                } else {
                    r = role_values(t, na, nb, p, cache);
                }
                roles[static_cast<std::size_t>(na) * lat.NB + nb] = r;
            }
        }
    };

    auto store_policy = [&](int k) {
        if (!opt.keep_policies) return;
        PolicySlice& ps = f.policy[static_cast<std::size_t>(k)];
        ps.code.resize(N);
        for (std::size_t i = 0; i < N; ++i) {
            ps.code[i] = PolicySlice::encode(lam_bits[i] & 1u, lam_bits[i] & 2u, pa_tmp[i], pb_tmp[i]);
            if ((ps.code[i] >> 2 & 3u) == 2u || (ps.code[i] >> 4 & 3u) == 2u) {
                ps.mixed.push_back({static_cast<std::uint32_t>(i), pa_tmp[i], pb_tmp[i]});
            }
        }
        ps.mixed.shrink_to_fit();
    };

    // Terminal slice: forced auction at T.
    load_roles(K, true);
    {
        const double denom = p.T + p.h;
        for (std::size_t i = 0; i < N; ++i) {
            const auto c = lat.decode(i);
            const auto& r = roles[static_cast<std::size_t>(c.na) * lat.NB + c.nb];
            ua[i] = (g.l_a.value(c.ja) + r.sim_a) / denom;
            ub[i] = (-g.l_b.value(c.jb) + r.sim_b) / denom;
            e[i] = 0.0;
            pa_tmp[i] = pb_tmp[i] = 1.0;
            lam_bits[i] = 0;
        }
        store_policy(K);
        if (opt.keep_values) {
            f.U_a[static_cast<std::size_t>(K)] = ua;
            f.U_b[static_cast<std::size_t>(K)] = ub;
        }
    }

    std::mutex stats_mutex;
    for (int k = K - 1; k >= 0; --k) {
        std::swap(ua, ua_next);
        std::swap(ub, ub_next);
        std::swap(e, e_next);
        load_roles(k, false);
        const double t = p.time(k);
        const double denom = t + p.h;
        const bool forced = k == 0 && opt.forced_p0.has_value();

        const std::size_t blocks = static_cast<std::size_t>(lat.S) * lat.NA * lat.NB;
        const std::size_t block_size = static_cast<std::size_t>(lat.LA) * lat.LB;
        parallel_for(blocks, opt.threads, [&](std::size_t lo, std::size_t hi) {
            GameStats local;
            BlockBranch none, tr;
            for (std::size_t blk = lo; blk < hi; ++blk) {
                const int nb_ = static_cast<int>(blk % lat.NB);
                const int na_ = static_cast<int>((blk / lat.NB) % lat.NA);
                const int is = static_cast<int>(blk / (static_cast<std::size_t>(lat.NB) * lat.NA));
                const double s = g.s.value(is);
                const bool a_live = opt.trading_enabled && s > 0.0;
                const bool b_live = opt.trading_enabled && s < 0.0;
                stepper.prepare(k, is, na_, nb_, Branch::none, none);
                if (a_live || b_live) stepper.prepare(k, is, na_, nb_, a_live ? Branch::a_trade : Branch::b_trade, tr);
                const auto& r = roles[static_cast<std::size_t>(na_) * lat.NB + nb_];

                for (int ja = 0; ja < lat.LA; ++ja) {
                    for (int jb = 0; jb < lat.LB; ++jb) {
                        const std::size_t i = blk * block_size + static_cast<std::size_t>(ja) * lat.LB + jb;
                        const double la = g.l_a.value(ja), lb = g.l_b.value(jb);
                        double cont_a = none.apply(ua_next, ja, jb, lat.LB);
                        double cont_b = none.apply(ub_next, ja, jb, lat.LB);
                        double dur = opt.compute_duration ? none.apply(e_next, ja, jb, lat.LB) : 0.0;
                        local.clamps.s += none.s_clamped;
                        local.clamps.l += none.l_clamped(ja, jb);
                        std::uint8_t bits = 0;

                        if (a_live || b_live) {
                            const double xa = tr.apply(ua_next, ja, jb, lat.LB);
                            const double xb = tr.apply(ub_next, ja, jb, lat.LB);
                            double lambda;
                            if (a_live) {
                                lambda = bang_bang_intensity(xa - cont_a, Side::minimizer, p);
                                if (lambda == p.lambda_plus) bits |= 1u;
                            } else {
                                lambda = bang_bang_intensity(xb - cont_b, Side::maximizer, p);
                                if (lambda == p.lambda_plus) bits |= 2u;
                            }
                            const double pj = lambda * p.delta;
                            cont_a = (1.0 - pj) * cont_a + pj * xa;
                            cont_b = (1.0 - pj) * cont_b + pj * xb;
                            if (opt.compute_duration) dur = (1.0 - pj) * dur + pj * tr.apply(e_next, ja, jb, lat.LB);
                            local.clamps.s += tr.s_clamped;
                            local.clamps.l += tr.l_clamped(ja, jb);
                            local.clamps.n += tr.n_clamped;
                        }

                        StopGame2x2 game;
                        game.a_sim = (la + r.sim_a) / denom;
                        game.a_first = (la + r.first_a) / denom;
                        game.a_second = (la + r.second_a) / denom;
                        game.a_cont = cont_a;
                        game.b_sim = (-lb + r.sim_b) / denom;
                        game.b_first = (-lb + r.first_b) / denom;
                        game.b_second = (-lb + r.second_b) / denom;
                        game.b_cont = cont_b;

                        StopDecision d;
                        if (forced) {
                            d.p_a = opt.forced_p0->first;
                            d.p_b = opt.forced_p0->second;
                        } else if (opt.mode == EquilibriumMode::pure) {
                            if (!game.finite()) throw NumericalError("non-finite stopping game entry");
                            d = threshold_rule(game);
                        } else {
                            d = stopping_probabilities(game);
                            if (d.diag.pure_equilibria > 1) ++local.multiple_pure;
                            if (d.diag.kind == StopKind::mixed) {
                                ++local.mixed_nodes;
                                local.max_indifference_gap =
                                    std::max({local.max_indifference_gap, std::abs(d.p_a - d.diag.indiff_p_a),
                                              std::abs(d.p_b - d.diag.indiff_p_b)});
                            }
                        }
                        if (!(d.p_a >= 0.0 && d.p_a <= 1.0 && d.p_b >= 0.0 && d.p_b <= 1.0)) {
                            char buf[160];
                            std::snprintf(buf, sizeof buf,
                                          "stopping probability outside [0,1] at k=%d node=%zu (%g, %g)", k, i,
                                          d.p_a, d.p_b);
                            throw NumericalError(buf);
                        }
                        const auto u = mixed_values(game, d.p_a, d.p_b);
                        if (!std::isfinite(u[0]) || !std::isfinite(u[1])) {
                            throw NumericalError("non-finite value at k=" + std::to_string(k) +
                                                 " node=" + std::to_string(i));
                        }
                        ua[i] = u[0];
                        ub[i] = u[1];
                        pa_tmp[i] = d.p_a;
                        pb_tmp[i] = d.p_b;
                        lam_bits[i] = bits;
                        if (opt.compute_duration) {
                            const double ek = (1.0 - d.p_a) * (1.0 - d.p_b) * (p.delta + dur);
                            if (ek < -1e-9 || ek > p.T - t + 1e-9) {
                                throw NumericalError("duration outside [0, T - t] at k=" + std::to_string(k));
                            }
                            e[i] = ek;
                        }
                    }
                }
            }
            std::lock_guard lock(stats_mutex);
            f.stats.clamps.s += local.clamps.s;
            f.stats.clamps.l += local.clamps.l;
            f.stats.clamps.n += local.clamps.n;
            f.stats.mixed_nodes += local.mixed_nodes;
            f.stats.multiple_pure += local.multiple_pure;
            f.stats.max_indifference_gap = std::max(f.stats.max_indifference_gap, local.max_indifference_gap);
        }, 16);

        store_policy(k);
        if (opt.keep_values) {
            f.U_a[static_cast<std::size_t>(k)] = ua;
            f.U_b[static_cast<std::size_t>(k)] = ub;
        }
    }

    f.U_a0 = std::move(ua);
    f.U_b0 = std::move(ub);
    if (opt.compute_duration) f.E0 = std::move(e);
    f.stats.subgame_solves = cache.solves() - solves_before;
    return f;
}

}  // namespace ahead

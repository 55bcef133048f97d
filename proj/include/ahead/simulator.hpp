#pragma once

// Forward Monte Carlo of the continuous phase, the randomised stopping
// decisions and the auction under solved (or deviated) policies.

#include <ahead/game.hpp>
#include <ahead/parallel.hpp>
#include <ahead/rng.hpp>
#include <ahead/subgame.hpp>

#include <atomic>
#include <cmath>
#include <cstdint>
#include <mutex>
#include <ostream>
#include <string>
#include <vector>

namespace ahead {

enum class GapIncrements : std::uint8_t { gaussian, quadrature };
enum class StateLookup : std::uint8_t { nearest, stochastic_rounding };
enum class PenaltyRule : std::uint8_t { closed_form, left_point };

inline const char* to_string(GapIncrements g) { return g == GapIncrements::gaussian ? "gaussian" : "quadrature"; }
inline const char* to_string(StateLookup s) { return s == StateLookup::nearest ? "nearest" : "stochastic_rounding"; }
inline const char* to_string(PenaltyRule r) { return r == PenaltyRule::closed_form ? "closed_form" : "left_point"; }

struct SimOptions {
    GapIncrements increments = GapIncrements::gaussian;
    // stochastic_rounding moves the state onto a lattice node drawn with the
    // interpolation weights, so paths sample the solver's own Markov chain.
    StateLookup lookup = StateLookup::nearest;
    PenaltyRule penalty = PenaltyRule::closed_form;
    int threads = 1;
    std::size_t record_paths = 0;  // full PathSample for the first paths

    /// Settings under which paths follow the lattice chain of the solver.
    static SimOptions scheme_consistent() {
        SimOptions o;
        o.increments = GapIncrements::quadrature;
        o.lookup = StateLookup::stochastic_rounding;
        o.penalty = PenaltyRule::left_point;
        return o;
    }
};

enum class DeviationKind : std::uint8_t {
    identity,
    never_trigger,
    trigger_immediately,
    shift_up,        // trigger probability of the next gap node up
    shift_down,
    delay_trigger,   // p_{k-1}
    advance_trigger, // p_{k+1}
    flip_band,       // swap lambda_minus / lambda_plus within `band` gap nodes of 0
    always_plus,
    always_minus,
};

inline const char* to_string(DeviationKind d) {
    switch (d) {
        case DeviationKind::identity: return "identity";
        case DeviationKind::never_trigger: return "never_trigger";
        case DeviationKind::trigger_immediately: return "trigger_immediately";
        case DeviationKind::shift_up: return "shift_up";
        case DeviationKind::shift_down: return "shift_down";
        case DeviationKind::delay_trigger: return "delay_trigger";
        case DeviationKind::advance_trigger: return "advance_trigger";
        case DeviationKind::flip_band: return "flip_band";
        case DeviationKind::always_plus: return "always_plus";
        case DeviationKind::always_minus: return "always_minus";
    }
    return "?";
}

struct Deviation {
    DeviationKind kind = DeviationKind::identity;
    Player who = Player::a;
    int band = 3;
};

/// The standard family of unilateral edits for one player.
inline std::vector<Deviation> standard_deviations(Player who) {
    std::vector<Deviation> out;
    for (auto k : {DeviationKind::identity, DeviationKind::never_trigger, DeviationKind::trigger_immediately,
                   DeviationKind::shift_up, DeviationKind::shift_down, DeviationKind::delay_trigger,
                   DeviationKind::advance_trigger, DeviationKind::flip_band, DeviationKind::always_plus,
                   DeviationKind::always_minus}) {
        out.push_back({k, who, 3});
    }
    return out;
}

enum class TriggerKind : std::uint8_t { a, b, both, forced_at_T };

inline const char* to_string(TriggerKind t) {
    switch (t) {
        case TriggerKind::a: return "a";
        case TriggerKind::b: return "b";
        case TriggerKind::both: return "both";
        case TriggerKind::forced_at_T: return "forced_at_T";
    }
    return "?";
}

struct PathEvent {
    std::size_t path_id = 0;
    double t = 0.0;
    std::string event;  // trade_a, trade_b, trigger_a, trigger_b, trigger_both, auction_end
    double s = 0.0;
    int n_a = 0, n_b = 0;
    double l_a = 0.0, l_b = 0.0;
};

struct PathSample {
    std::uint64_t seed = 0;
    std::size_t path = 0;
    std::vector<double> s_path;  // gap at each visited grid time
    std::vector<std::pair<double, Player>> trades;
    double tau = 0.0;
    TriggerKind trigger = TriggerKind::forced_at_T;
    int tie_winner = -1;  // 0 = a, 1 = b, when both triggered in randomized mode
    int m_a = 0, m_b = 0;
    double payoff_a = 0.0, payoff_b = 0.0;
    std::vector<PathEvent> events;
};

struct MCStats {
    std::size_t M = 0;
    double mean_a = 0.0, se_a = 0.0;
    double mean_b = 0.0, se_b = 0.0;
    double mean_duration = 0.0, se_duration = 0.0;
    std::uint64_t triggers_a = 0, triggers_b = 0, triggers_both = 0, forced_at_T = 0;
    std::uint64_t off_grid_lookups = 0;   // state outside the lattice at a policy lookup
    std::uint64_t n_clamps = 0;
    std::uint64_t wrong_side_trades = 0;  // must stay 0
    std::vector<PathSample> samples;
};

namespace detail {

struct PathResult {
    double payoff_a = 0.0, payoff_b = 0.0, duration = 0.0;
};

inline double mean_of(const std::vector<double>& x) { return pairwise_sum(x) / static_cast<double>(x.size()); }

inline double se_of(const std::vector<double>& x, double mean) {
    if (x.size() < 2) return 0.0;
    std::vector<double> sq(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) sq[i] = (x[i] - mean) * (x[i] - mean);
    return std::sqrt(pairwise_sum(sq) / static_cast<double>(x.size() - 1) / static_cast<double>(x.size()));
}

/// Integral of (v u - n)^2 for u in [t0, t1].
inline double penalty_integral(double v, double n, double t0, double t1) {
    const double a = v * t0 - n, b = v * t1 - n;
    return (b * b * b - a * a * a) / (3.0 * v);
}

}  // namespace detail

/// Exact exponential-clock simulation of the auction under the table policy,
/// piecewise constant over each solver step. Returns (m_a, m_b).
inline std::pair<int, int> simulate_auction(const SubgameTable& t, StreamRng& rng) {
    if (t.policy.empty()) throw ConfigError("simulate_auction needs a table with policies");
    int ma = 0, mb = 0;
    double now = 0.0;
    for (int j = 0; j < t.steps; ++j) {
        const double end = (j + 1) * t.delta_auc;
        for (;;) {
            const double ra = ma < t.m_max ? t.intensity(Player::a, j, ma, mb) : 0.0;
            const double rb = mb < t.m_max ? t.intensity(Player::b, j, ma, mb) : 0.0;
            const double R = ra + rb;
            if (R <= 0.0) break;
            const double w = rng.exponential(R);
            if (now + w >= end) break;
            now += w;
            if (rng.uniform() * R < ra) ++ma;
            else ++mb;
        }
        now = end;
    }
    return {ma, mb};
}

struct SubgameMC {
    double mean_a = 0.0, se_a = 0.0, mean_b = 0.0, se_b = 0.0;
};

/// Auction-only Monte Carlo of a solved table.
inline SubgameMC simulate_subgame(const SubgameTable& t, const ModelParams& p, std::size_t M, std::uint64_t seed,
                                  int threads = 1) {
    std::vector<double> a(M), b(M);
    parallel_for(M, threads, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            StreamRng rng(seed, i, 0);
            const auto [ma, mb] = simulate_auction(t, rng);
            const auto pay = terminal_auction_payoff(t.key.x_a, t.key.x_b, ma, mb, t.key.np_a, t.key.np_b, p);
            a[i] = pay.a;
            b[i] = pay.b;
        }
    });
    SubgameMC r;
    r.mean_a = detail::mean_of(a);
    r.se_a = detail::se_of(a, r.mean_a);
    r.mean_b = detail::mean_of(b);
    r.se_b = detail::se_of(b, r.mean_b);
    return r;
}

/// Policy lookup on a solved game, with an optional unilateral deviation.
class PolicyView {
public:
    PolicyView(const GameFields& f, Deviation dev = {}) : f_(f), dev_(dev) {
        if (!f.has_policies()) throw ConfigError("simulation needs the policy slices of every k");
    }

    struct Decision {
        double p_a, p_b, lambda_a, lambda_b;
    };

    Decision at(int k, int is, int na, int nb, int ja, int jb) const {
        const auto& lat = f_.lattice;
        const std::size_t node = lat.index(is, na, nb, ja, jb);
        auto [pa, pb] = f_.probabilities(k, node);
        Decision d{pa, pb, f_.intensity(Player::a, k, node), f_.intensity(Player::b, k, node)};
        if (dev_.kind == DeviationKind::identity) return d;

        const bool is_a = dev_.who == Player::a;
        double& p_own = is_a ? d.p_a : d.p_b;
        double& l_own = is_a ? d.lambda_a : d.lambda_b;
        auto own_p = [&](int kk, int iss) {
            const auto pr = f_.probabilities(kk, lat.index(iss, na, nb, ja, jb));
            return is_a ? pr.first : pr.second;
        };
        const double lm = f_.params.lambda_minus, lp = f_.params.lambda_plus;
        switch (dev_.kind) {
            case DeviationKind::identity: break;
            case DeviationKind::never_trigger: p_own = 0.0; break;
            case DeviationKind::trigger_immediately: p_own = 1.0; break;
            case DeviationKind::shift_up: p_own = own_p(k, std::min(is + 1, lat.S - 1)); break;
            case DeviationKind::shift_down: p_own = own_p(k, std::max(is - 1, 0)); break;
            case DeviationKind::delay_trigger: p_own = k >= 1 ? own_p(k - 1, is) : 0.0; break;
            case DeviationKind::advance_trigger: p_own = own_p(k + 1, is); break;
            case DeviationKind::flip_band:
                if (std::abs(is - (lat.S - 1) / 2) <= dev_.band) l_own = l_own == lp ? lm : lp;
                break;
            case DeviationKind::always_plus: l_own = lp; break;
            case DeviationKind::always_minus: l_own = lm; break;
        }
        return d;
    }

private:
    const GameFields& f_;
    Deviation dev_;
};

namespace detail {

inline constexpr std::uint64_t kAuctionTag = 0xA0C7100000000000ULL;

struct PathCounters {
    std::uint64_t trig_a = 0, trig_b = 0, trig_both = 0, forced = 0, off_grid = 0, n_clamps = 0, wrong_side = 0;
};

inline PathResult simulate_path(const GameFields& f, SubgameCache& cache, const PolicyView& pol,
                                const SimOptions& opt, std::uint64_t seed, std::size_t path, PathCounters& cnt,
                                PathSample* rec) {
    const ModelParams& p = f.params;
    const GridSpec& g = f.grid;
    const auto& lat = f.lattice;
    const int K = f.steps;
    const double sd = p.sigma * std::sqrt(p.delta);
    const QuadratureRule rule = quadrature_rule(f.options.quadrature);
    const bool trading = f.options.trading_enabled;

    double s = p.p_minus_pstar0, la = 0.0, lb = 0.0;
    int na = 0, nb = 0;
    auto event = [&](double t, const char* name) {
        if (rec) rec->events.push_back({path, t, name, s, na, nb, la, lb});
    };

    for (int k = 0; k <= K; ++k) {
        const double t = p.time(k);
        StreamRng rng(seed, path, static_cast<std::uint64_t>(k) + 1);
        const double u_round_s = rng.uniform(), u_round_a = rng.uniform(), u_round_b = rng.uniform();
        const double u_stop_a = rng.uniform(), u_stop_b = rng.uniform(), u_tie = rng.uniform();
        const double u_jump = rng.uniform(), u_when = rng.uniform(), u_quad = rng.uniform();
        const double z_gauss = rng.normal();

        int is, ja, jb;
        if (opt.lookup == StateLookup::stochastic_rounding) {
            auto pick = [](const UniformAxis::Bracket& br, double u) { return u < br.w1 ? br.i1 : br.i0; };
            const auto bs = g.s.locate(s), ba = g.l_a.locate(la), bb = g.l_b.locate(lb);
            cnt.off_grid += bs.clamped || ba.clamped || bb.clamped;
            is = pick(bs, u_round_s);
            ja = pick(ba, u_round_a);
            jb = pick(bb, u_round_b);
            s = g.s.value(is);
            la = g.l_a.value(ja);
            lb = g.l_b.value(jb);
        } else {
            cnt.off_grid += s < g.s.lo || s > g.s.hi || la < g.l_a.lo || la > g.l_a.hi || lb < g.l_b.lo ||
                            lb > g.l_b.hi;
            is = g.s.nearest(s);
            ja = g.l_a.nearest(la);
            jb = g.l_b.nearest(lb);
        }
        if (rec) rec->s_path.push_back(s);
        const int na_l = std::min(na, lat.NA - 1), nb_l = std::min(nb, lat.NB - 1);
        cnt.n_clamps += (na_l != na) || (nb_l != nb);

        bool stop = k == K;
        TriggerKind trig = TriggerKind::forced_at_T;
        PolicyView::Decision d{1.0, 1.0, p.lambda_minus, p.lambda_minus};
        if (k < K) {
            d = pol.at(k, is, na_l, nb_l, ja, jb);
            const bool sa = u_stop_a < d.p_a, sb = u_stop_b < d.p_b;
            if (sa || sb) {
                stop = true;
                trig = sa && sb ? TriggerKind::both : (sa ? TriggerKind::a : TriggerKind::b);
            }
        }

        if (stop) {
            int np_a = 0, np_b = 0;
            switch (trig) {
                case TriggerKind::forced_at_T: ++cnt.forced; break;
                case TriggerKind::a: np_a = p.n_hat; ++cnt.trig_a; break;
                case TriggerKind::b: np_b = p.n_hat; ++cnt.trig_b; break;
                case TriggerKind::both:
                    ++cnt.trig_both;
                    if (p.sim_mode == SimTriggerMode::fixed) {
                        np_a = np_b = p.n_hat_ab;
                    } else if (u_tie < 0.5) {
                        np_a = p.n_hat;
                        if (rec) rec->tie_winner = 0;
                    } else {
                        np_b = p.n_hat;
                        if (rec) rec->tie_winner = 1;
                    }
                    break;
            }
            if (trig != TriggerKind::forced_at_T) {
                event(t, trig == TriggerKind::a ? "trigger_a" : trig == TriggerKind::b ? "trigger_b" : "trigger_both");
            }
            const SubgameKey key{target_deviation(na, p.v_a, t, p.target_rounding),
                                 target_deviation(nb, p.v_b, t, p.target_rounding), np_a, np_b};
            const auto table = cache.table(key);
            StreamRng arng(seed, path, kAuctionTag);
            const auto [ma, mb] = simulate_auction(*table, arng);
            const auto pay = terminal_auction_payoff(key.x_a, key.x_b, ma, mb, np_a, np_b, p);
            PathResult r{(la + pay.a) / (t + p.h), (-lb + pay.b) / (t + p.h), t};
            if (rec) {
                rec->tau = t;
                rec->trigger = trig;
                rec->m_a = ma;
                rec->m_b = mb;
                rec->payoff_a = r.payoff_a;
                rec->payoff_b = r.payoff_b;
                rec->events.push_back({path, t + p.h, "auction_end", s, na + ma + np_a, nb + mb + np_b, la, lb});
            }
            return r;
        }

        // Continuous phase over [t, t + delta).
        const bool trade_a = trading && s > 0.0 && u_jump < d.lambda_a * p.delta;
        const bool trade_b = trading && s < 0.0 && u_jump < d.lambda_b * p.delta;
        if (opt.penalty == PenaltyRule::left_point) {
            la += p.q * (p.v_a * t - na) * (p.v_a * t - na) * p.delta;
            lb += p.q * (p.v_b * t - nb) * (p.v_b * t - nb) * p.delta;
        } else {
            const double tj = t + u_when * p.delta, t1 = t + p.delta;
            if (trade_a) {
                la += p.q * (detail::penalty_integral(p.v_a, na, t, tj) + detail::penalty_integral(p.v_a, na + 1, tj, t1));
            } else {
                la += p.q * detail::penalty_integral(p.v_a, na, t, t1);
            }
            if (trade_b) {
                lb += p.q * (detail::penalty_integral(p.v_b, nb, t, tj) + detail::penalty_integral(p.v_b, nb + 1, tj, t1));
            } else {
                lb += p.q * detail::penalty_integral(p.v_b, nb, t, t1);
            }
        }
        if (trade_a) {
            if (!(s > 0.0)) ++cnt.wrong_side;
            la += s;
            ++na;
            if (rec) rec->trades.push_back({t, Player::a});
            event(t, "trade_a");
        } else if (trade_b) {
            if (!(s < 0.0)) ++cnt.wrong_side;
            lb -= s;
            ++nb;
            if (rec) rec->trades.push_back({t, Player::b});
            event(t, "trade_b");
        }
        if (opt.lookup == StateLookup::stochastic_rounding && na > lat.NA - 1) na = lat.NA - 1;
        if (opt.lookup == StateLookup::stochastic_rounding && nb > lat.NB - 1) nb = lat.NB - 1;

        double z = z_gauss;
        if (opt.increments == GapIncrements::quadrature) {
            double acc = 0.0;
            z = rule.z[static_cast<std::size_t>(rule.n - 1)];
            for (int q = 0; q < rule.n; ++q) {
                acc += rule.w[static_cast<std::size_t>(q)];
                if (u_quad < acc) {
                    z = rule.z[static_cast<std::size_t>(q)];
                    break;
                }
            }
        }
        s += sd * z;
    }
    throw NumericalError("path ended without an auction");
}

struct RunResult {
    std::vector<double> a, b, dur;
    MCStats stats;
};

inline RunResult run_paths(const GameFields& f, SubgameCache& cache, std::size_t M, std::uint64_t seed,
                           const SimOptions& opt, const Deviation& dev) {
    if (M < 1) throw ConfigError("simulate needs M >= 1");
    const PolicyView pol(f, dev);
    RunResult out;
    out.a.resize(M);
    out.b.resize(M);
    out.dur.resize(M);
    out.stats.samples.resize(std::min(opt.record_paths, M));
    std::mutex mu;
    parallel_for(
        M, opt.threads,
        [&](std::size_t lo, std::size_t hi) {
            PathCounters cnt;
            for (std::size_t i = lo; i < hi; ++i) {
                PathSample* rec = i < out.stats.samples.size() ? &out.stats.samples[i] : nullptr;
                if (rec) {
                    rec->seed = seed;
                    rec->path = i;
                }
                const PathResult r = simulate_path(f, cache, pol, opt, seed, i, cnt, rec);
                out.a[i] = r.payoff_a;
                out.b[i] = r.payoff_b;
                out.dur[i] = r.duration;
            }
            std::lock_guard lock(mu);
            out.stats.triggers_a += cnt.trig_a;
            out.stats.triggers_b += cnt.trig_b;
            out.stats.triggers_both += cnt.trig_both;
            out.stats.forced_at_T += cnt.forced;
            out.stats.off_grid_lookups += cnt.off_grid;
            out.stats.n_clamps += cnt.n_clamps;
            out.stats.wrong_side_trades += cnt.wrong_side;
        },
        256);
    MCStats& s = out.stats;
    s.M = M;
    s.mean_a = mean_of(out.a);
    s.se_a = se_of(out.a, s.mean_a);
    s.mean_b = mean_of(out.b);
    s.se_b = se_of(out.b, s.mean_b);
    s.mean_duration = mean_of(out.dur);
    s.se_duration = se_of(out.dur, s.mean_duration);
    return out;
}

}  // namespace detail

inline MCStats simulate(const GameFields& f, SubgameCache& cache, std::size_t M, std::uint64_t seed,
                        const SimOptions& opt = {}, const Deviation& dev = {}) {
    return detail::run_paths(f, cache, M, seed, opt, dev).stats;
}

struct DeviationResult {
    Deviation deviation;
    double base_mean = 0.0;  // deviator's objective under equilibrium play
    double dev_mean = 0.0;
    double gain = 0.0;       // improvement for the deviator (cost saved for a, gain added for b)
    double se_diff = 0.0;
    double eps = 0.0;
    bool flagged = false;    // gain > eps + 3 se_diff
};

/// Unilateral deviations simulated with common random numbers.
inline std::vector<DeviationResult> deviation_test(const GameFields& f, SubgameCache& cache,
                                                   const std::vector<Deviation>& family, std::size_t M,
                                                   std::uint64_t seed, const SimOptions& opt, double eps_a,
                                                   double eps_b) {
    std::vector<DeviationResult> out;
    if (family.empty()) return out;
    SimOptions o = opt;
    o.record_paths = 0;
    const auto base = detail::run_paths(f, cache, M, seed, o, {});
    for (const auto& dev : family) {
        const auto run = detail::run_paths(f, cache, M, seed, o, dev);
        const bool is_a = dev.who == Player::a;
        const auto& b0 = is_a ? base.a : base.b;
        const auto& b1 = is_a ? run.a : run.b;
        std::vector<double> diff(M);
        for (std::size_t i = 0; i < M; ++i) diff[i] = is_a ? b0[i] - b1[i] : b1[i] - b0[i];
        DeviationResult r;
        r.deviation = dev;
        r.base_mean = is_a ? base.stats.mean_a : base.stats.mean_b;
        r.dev_mean = is_a ? run.stats.mean_a : run.stats.mean_b;
        r.gain = detail::mean_of(diff);
        r.se_diff = detail::se_of(diff, r.gain);
        r.eps = is_a ? eps_a : eps_b;
        r.flagged = r.gain > r.eps + 3.0 * r.se_diff;
        out.push_back(r);
    }
    return out;
}

inline void write_path_log(std::ostream& os, const std::vector<PathSample>& samples) {
    os << "path_id,t,event,s,n_a,n_b,l_a,l_b\n";
    char buf[256];
    for (const auto& smp : samples) {
        for (const auto& e : smp.events) {
            std::snprintf(buf, sizeof buf, "%zu,%.12g,%s,%.12g,%d,%d,%.12g,%.12g\n", e.path_id, e.t, e.event.c_str(),
                          e.s, e.n_a, e.n_b, e.l_a, e.l_b);
            os << buf;
        }
    }
}

}  // namespace ahead

#pragma once

// Average length of the continuous phase: E_T = 0 and
//   E_k = (1 - p_a)(1 - p_b) (delta + E[E_{k+1}])
// under the stored equilibrium intensities.

#include <ahead/game.hpp>

#include <string>
#include <vector>

namespace ahead {

struct DurationField {
    std::vector<double> E0;              // k = 0 slice
    std::vector<std::vector<double>> E;  // every k when requested
    double max_bound_violation = 0.0;    // max over nodes of distance outside [0, T - t]

    double at0(const GameFields& f, double s, int n_a = 0, int n_b = 0, double l_a = 0.0, double l_b = 0.0) const {
        return f.interpolate0(E0, s, n_a, n_b, l_a, l_b);
    }
};

inline DurationField average_duration(const GameFields& f, int threads = 1, bool keep_all = false) {
    if (!f.has_policies()) throw ConfigError("average_duration needs the policy slices of every k");
    const ModelParams& p = f.params;
    const OuterLattice& lat = f.lattice;
    const std::size_t N = lat.size();
    const int K = f.steps;
    for (int k = 0; k <= K; ++k) {
        if (f.policy[static_cast<std::size_t>(k)].code.size() != N) {
            throw ConfigError("missing policy slice at k=" + std::to_string(k));
        }
    }
    const OuterStepper stepper(p, f.grid, f.options.quadrature, f.options.trading_enabled);

    DurationField out;
    if (keep_all) out.E.resize(static_cast<std::size_t>(K) + 1);
    std::vector<double> e(N, 0.0), next(N);
    if (keep_all) out.E[static_cast<std::size_t>(K)] = e;
    std::vector<double> violation(N, 0.0);

    for (int k = K - 1; k >= 0; --k) {
        std::swap(e, next);
        const double remaining = p.T - p.time(k);
        const PolicySlice& pol = f.policy[static_cast<std::size_t>(k)];
        const std::size_t blocks = static_cast<std::size_t>(lat.S) * lat.NA * lat.NB;
        const std::size_t block_size = static_cast<std::size_t>(lat.LA) * lat.LB;
        parallel_for(blocks, threads, [&](std::size_t lo, std::size_t hi) {
            BlockBranch none, tr;
            for (std::size_t blk = lo; blk < hi; ++blk) {
                const int nb = static_cast<int>(blk % lat.NB);
                const int na = static_cast<int>((blk / lat.NB) % lat.NA);
                const int is = static_cast<int>(blk / (static_cast<std::size_t>(lat.NB) * lat.NA));
                const double s = f.grid.s.value(is);
                const bool a_live = stepper.trading_enabled() && s > 0.0;
                const bool b_live = stepper.trading_enabled() && s < 0.0;
                stepper.prepare(k, is, na, nb, Branch::none, none);
                if (a_live || b_live) stepper.prepare(k, is, na, nb, a_live ? Branch::a_trade : Branch::b_trade, tr);
                for (int ja = 0; ja < lat.LA; ++ja) {
                    for (int jb = 0; jb < lat.LB; ++jb) {
                        const std::size_t i = blk * block_size + static_cast<std::size_t>(ja) * lat.LB + jb;
                        double d = none.apply(next, ja, jb, lat.LB);
                        if (a_live || b_live) {
                            const Player who = a_live ? Player::a : Player::b;
                            const double pj = pol.high(who, i) ? p.lambda_plus * p.delta : p.lambda_minus * p.delta;
                            d = (1.0 - pj) * d + pj * tr.apply(next, ja, jb, lat.LB);
                        }
                        const auto [pa, pb] = pol.probabilities(i);
                        e[i] = (1.0 - pa) * (1.0 - pb) * (p.delta + d);
                        violation[i] = std::max({violation[i], -e[i], e[i] - remaining});
                    }
                }
            }
        }, 16);
        if (keep_all) out.E[static_cast<std::size_t>(k)] = e;
    }
    for (double v : violation) out.max_bound_violation = std::max(out.max_bound_violation, v);
    if (out.max_bound_violation > 1e-9) throw NumericalError("duration left [0, T - t]");
    out.E0 = std::move(e);
    return out;
}

}  // namespace ahead

#pragma once

// Experiment runner behind the command-line tool. Each run writes
//   <out>/<kind>.csv (or .json)       one header line, fingerprint column
//   <out>/<kind>.meta.json            resolved parameters, defaults, stats
// plus kind-specific extras (path log, deviation report, policy dump).

#include <ahead/baselines.hpp>
#include <ahead/cache_file.hpp>
#include <ahead/config.hpp>
#include <ahead/duration.hpp>
#include <ahead/game.hpp>
#include <ahead/simulator.hpp>
#include <ahead/subgame.hpp>

#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace ahead {

using json = nlohmann::json;

/// Column-named rows rendered as CSV or JSON.
struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<json>> rows;

    void add(std::vector<json> row) {
        if (row.size() != columns.size()) throw std::logic_error("row width does not match the header");
        rows.push_back(std::move(row));
    }

    static std::string cell(const json& v) {
        if (v.is_number_float()) {
            char buf[40];
            std::snprintf(buf, sizeof buf, "%.12g", v.get<double>());
            return buf;
        }
        if (v.is_string()) return v.get<std::string>();
        return v.dump();
    }

    void write_csv(std::ostream& os) const {
        for (std::size_t i = 0; i < columns.size(); ++i) os << (i ? "," : "") << columns[i];
        os << "\n";
        for (const auto& r : rows) {
            for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << cell(r[i]);
            os << "\n";
        }
    }

    json to_json() const {
        json arr = json::array();
        for (const auto& r : rows) {
            json o = json::object();
            for (std::size_t i = 0; i < r.size(); ++i) o[columns[i]] = r[i];
            arr.push_back(std::move(o));
        }
        return {{"columns", columns}, {"rows", std::move(arr)}};
    }
};

/// Outcome of one run.
struct RunReport {
    std::string kind;
    std::string fingerprint;
    std::vector<std::string> files;
    std::size_t rows = 0;
    std::size_t subgame_solves = 0;
    std::size_t cache_loaded = 0;
    std::uint64_t mixed_nodes = 0;
    std::uint64_t clamps = 0;
    std::vector<std::string> warnings;
    double seconds = 0.0;
    std::string headline;  // kind-specific figures for the summary line
    json stats = json::object();

    std::string summary() const {
        char buf[160];
        std::snprintf(buf, sizeof buf, " rows=%zu subgame_solves=%zu cache_loaded=%zu mixed_nodes=%llu clamps=%llu",
                      rows, subgame_solves, cache_loaded, static_cast<unsigned long long>(mixed_nodes),
                      static_cast<unsigned long long>(clamps));
        char tail[64];
        std::snprintf(tail, sizeof tail, " time=%.1fs", seconds);
        return "[" + kind + "] fp=" + fingerprint + buf + (headline.empty() ? "" : " " + headline) + tail;
    }
};

inline json to_json(const ModelParams& p) {
    return {{"sigma", p.sigma},
            {"K", p.K},
            {"q", p.q},
            {"v_a", p.v_a},
            {"v_b", p.v_b},
            {"lambda_minus", p.lambda_minus},
            {"lambda_plus", p.lambda_plus},
            {"h", p.h},
            {"T", p.T},
            {"delta", p.delta},
            {"n_hat", p.n_hat},
            {"sim_mode", to_string(p.sim_mode)},
            {"n_hat_ab", p.n_hat_ab},
            {"p_minus_pstar0", p.p_minus_pstar0},
            {"target_rounding", to_string(p.target_rounding)}};
}

inline json to_json(const UniformAxis& a) { return {{"lo", a.lo}, {"hi", a.hi}, {"nodes", a.nodes}}; }

inline json to_json(const GridSpec& g, const ModelParams& p) {
    return {{"s", to_json(g.s)},
            {"n_max_a", g.n_max_a},
            {"n_max_b", g.n_max_b},
            {"l_a", to_json(g.l_a)},
            {"l_b", to_json(g.l_b)},
            {"m_max", g.m_max},
            {"delta_auc", g.auction_step(p)},
            {"auction_steps", g.auction_steps(p)}};
}

/// Everything that determines the output files; hashed into the fingerprint.
inline json resolved_json(const ExperimentConfig& c) {
    const GridSettings& g = c.grid;
    const SweepSpec& s = c.sweep;
    json pairs = json::array();
    for (const auto& [a, b] : s.pairs) pairs.push_back({a, b});
    return {{"kind", to_string(c.kind)},
            {"profile", to_string(c.profile)},
            {"model", to_json(c.model)},
            {"grid",
             {{"s_nodes", g.s_nodes},
              {"s_max", g.s_max},
              {"n_max_a", g.n_max_a},
              {"n_max_b", g.n_max_b},
              {"l_nodes", g.l_nodes},
              {"l_max_a", g.l_max_a},
              {"l_max_b", g.l_max_b},
              {"m_max", g.m_max},
              {"delta_auc", g.delta_auc},
              {"quadrature", to_string(g.quadrature)},
              {"auction_scheme", to_string(g.scheme)},
              {"x_quantum", g.x_quantum}}},
            {"sweep",
             {{"h", s.h},
              {"q", s.q},
              {"n_hat", s.n_hat},
              {"x_a", s.x_a},
              {"x_b", s.x_b},
              {"np_a", s.np_a},
              {"np_b", s.np_b},
              {"s", s.s},
              {"pairs", pairs}}},
            {"mc",
             {{"M", c.mc.M},
              {"seed", c.mc.seed},
              {"increments", to_string(c.mc.increments)},
              {"lookup", to_string(c.mc.lookup)},
              {"penalty", to_string(c.mc.penalty)},
              {"record_paths", c.mc.record_paths}}},
            {"emit_policies", c.emit_policies}};
}

inline std::string config_fingerprint(const ExperimentConfig& c) { return hex16(fnv1a(resolved_json(c).dump())); }

/// Sub-game cache for one parameter set, backed by the cache directory when given.
class CacheScope {
public:
    CacheScope(const ModelParams& p, const GridSpec& g, const SubgameOptions& o, const std::string& dir)
        : cache_(std::make_unique<SubgameCache>(p, g, o)) {
        if (!dir.empty()) {
            file_.emplace(dir, subgame_fingerprint(p, g, o));
            loaded_ = file_->load(*cache_);
        }
    }
    ~CacheScope() {
        try {
            save();
        } catch (...) {
        }
    }
    CacheScope(const CacheScope&) = delete;
    CacheScope& operator=(const CacheScope&) = delete;

    SubgameCache& cache() { return *cache_; }
    std::size_t loaded() const { return loaded_; }

    void save() {
        if (file_ && cache_->solves() > saved_solves_) {
            file_->save(*cache_);
            saved_solves_ = cache_->solves();
        }
    }

private:
    std::unique_ptr<SubgameCache> cache_;
    std::optional<SubgameCacheFile> file_;
    std::size_t loaded_ = 0;
    std::size_t saved_solves_ = 0;
};

namespace detail {

inline const std::vector<std::pair<double, double>>& tabulated_pairs() {
    static const std::vector<std::pair<double, double>> rows = {
        {0.1, 0.1}, {0.05, 0.1}, {0.1, 0.05}, {0.15, 0.1}, {0.1, 0.15}};
    return rows;
}

template <class T>
std::vector<T> or_default(const std::vector<T>& v, T fallback) {
    return v.empty() ? std::vector<T>{fallback} : v;
}

inline double e6(double x) { return x * 1e6; }

class Runner {
public:
    explicit Runner(const ExperimentConfig& c) : c_(c), report_() {
        report_.kind = to_string(c.kind);
        report_.fingerprint = config_fingerprint(c);
    }

    RunReport run() {
        const auto t0 = std::chrono::steady_clock::now();
        std::filesystem::create_directories(c_.out_dir);
        Table t;
        switch (c_.kind) {
            case RunKind::subgame_sweep: t = subgame_sweep(); break;
            case RunKind::game: t = game(); break;
            case RunKind::duration: t = duration(); break;
            case RunKind::baselines:
            case RunKind::table3:
            case RunKind::table4: t = baselines(); break;
            case RunKind::simulate: t = simulate_run(); break;
            case RunKind::epsilon: t = epsilon(); break;
        }
        report_.rows = t.rows.size();
        write_table(t, report_.kind);
        report_.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        write_sidecar();
        return report_;
    }

private:
    GameOptions game_options(bool keep_policies) const {
        GameOptions o;
        o.quadrature = c_.grid.quadrature;
        o.threads = c_.threads;
        o.keep_policies = keep_policies;
        o.memory_budget_bytes = c_.grid.memory_budget_gb * 1e9;
        return o;
    }

    std::unique_ptr<CacheScope> open_cache(const ModelParams& p, const GridSpec& g) {
        auto scope = std::make_unique<CacheScope>(p, g, resolve_subgame_options(c_), c_.cache_dir);
        report_.cache_loaded += scope->loaded();
        return scope;
    }

    void close_cache(CacheScope& scope) {
        report_.subgame_solves += scope.cache().solves();
        scope.save();
    }

    void absorb(const GameStats& s) {
        report_.mixed_nodes += s.mixed_nodes;
        report_.clamps += s.clamps.total();
        for (const auto& [name, v] : {std::pair{"clamps_s", s.clamps.s}, {"clamps_l", s.clamps.l}, {"clamps_n", s.clamps.n}}) {
            report_.stats[name] = report_.stats.value(name, std::uint64_t{0}) + v;
        }
        for (const auto& w : s.warnings) add_warning(w);
    }

    void add_warning(const std::string& w) {
        for (const auto& x : report_.warnings)
            if (x == w) return;
        report_.warnings.push_back(w);
    }

    std::string path_for(const std::string& stem, const char* ext) const {
        return (std::filesystem::path(c_.out_dir) / (stem + ext)).string();
    }

    void write_table(const Table& t, const std::string& stem) {
        if (c_.format == OutputFormat::csv) {
            Table with_fp;
            with_fp.columns = t.columns;
            with_fp.columns.push_back("fingerprint");
            for (auto r : t.rows) {
                r.push_back(report_.fingerprint);
                with_fp.rows.push_back(std::move(r));
            }
            const auto path = path_for(stem, ".csv");
            std::ofstream os(path, std::ios::trunc);
            if (!os) throw ConfigError("cannot write " + path);
            with_fp.write_csv(os);
            report_.files.push_back(path);
        } else {
            json j = t.to_json();
            j["fingerprint"] = report_.fingerprint;
            j["kind"] = stem;
            const auto path = path_for(stem, ".json");
            std::ofstream os(path, std::ios::trunc);
            if (!os) throw ConfigError("cannot write " + path);
            os << j.dump(1) << "\n";
            report_.files.push_back(path);
        }
    }

    void write_sidecar() {
        json j;
        j["fingerprint"] = report_.fingerprint;
        j["resolved"] = resolved_json(c_);
        j["defaults_filled"] = c_.defaults_filled;
        j["grids"] = grids_;
        j["files"] = report_.files;
        j["warnings"] = report_.warnings;
        j["stats"] = report_.stats;
        j["stats"]["subgame_solves"] = report_.subgame_solves;
        j["stats"]["cache_loaded"] = report_.cache_loaded;
        j["stats"]["mixed_nodes"] = report_.mixed_nodes;
        j["stats"]["clamps"] = report_.clamps;
        j["stats"]["seconds"] = report_.seconds;
        const std::time_t now = std::time(nullptr);
        char ts[32];
        std::strftime(ts, sizeof ts, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
        j["timestamp"] = ts;
        const auto path = path_for(report_.kind, ".meta.json");
        std::ofstream os(path, std::ios::trunc);
        if (!os) throw ConfigError("cannot write " + path);
        os << j.dump(2) << "\n";
        report_.files.push_back(path);
    }

    GridSpec grid_for(const ModelParams& p) {
        GridSpec g = resolve_grid(c_, p);
        json gj = to_json(g, p);
        bool seen = false;
        for (const auto& x : grids_) seen = seen || x == gj;
        if (!seen) grids_.push_back(std::move(gj));
        return g;
    }

    std::vector<double> s_axis(const GridSpec& g) const {
        if (!c_.sweep.s.empty()) return c_.sweep.s;
        std::vector<double> s;
        for (int i = 0; i < g.s.nodes; ++i) s.push_back(g.s.value(i));
        return s;
    }

    void emit_policies(const GameFields& f, const std::string& stem) {
        if (!c_.emit_policies) return;
        const auto path = path_for(stem + "_policies", ".csv");
        std::ofstream os(path, std::ios::trunc);
        if (!os) throw ConfigError("cannot write " + path);
        os << "k,t,s,n_a,n_b,l_a,l_b,p_a,p_b,lambda_a,lambda_b,fingerprint\n";
        const OuterLattice& lat = f.lattice;
        char buf[256];
        for (int k = 0; k <= f.steps; ++k) {
            for (std::size_t i = 0; i < lat.size(); ++i) {
                const auto c = lat.decode(i);
                const auto [pa, pb] = f.probabilities(k, i);
                std::snprintf(buf, sizeof buf, "%d,%.12g,%.12g,%d,%d,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,", k,
                              f.params.time(k), f.s_value(c.is), c.na, c.nb, f.l_value(Player::a, c.ja),
                              f.l_value(Player::b, c.jb), pa, pb, f.intensity(Player::a, k, i),
                              f.intensity(Player::b, k, i));
                os << buf << report_.fingerprint << "\n";
            }
        }
        report_.files.push_back(path);
    }

    Table subgame_sweep() {
        const SweepSpec& s = c_.sweep;
        Table t;
        t.columns = {"h", "q", "x_a", "x_b", "np_a", "np_b", "g_a", "g_b", "g_a_e6", "g_b_e6"};
        for (double h : or_default(s.h, c_.model.h)) {
            for (double q : or_default(s.q, c_.model.q)) {
                ModelParams p = c_.model;
                p.h = h;
                p.q = q;
                const GridSpec g = grid_for(p);
                auto scope = open_cache(p, g);
                std::vector<SubgameKey> keys;
                for (double xa : or_default(s.x_a, 0.0))
                    for (double xb : or_default(s.x_b, 0.0))
                        for (int na : or_default(s.np_a, 0))
                            for (int nb : or_default(s.np_b, 0)) keys.push_back({xa, xb, na, nb});
                scope->cache().prefill(keys, c_.threads);
                for (const auto& k : keys) {
                    const auto v = scope->cache().values(k);
                    t.add({h, q, k.x_a, k.x_b, k.np_a, k.np_b, v.g_a, v.g_b, e6(v.g_a), e6(v.g_b)});
                }
                close_cache(*scope);
            }
        }
        return t;
    }

    Table game() {
        Table t;
        t.columns = {"h", "q", "n_hat", "s", "U_a", "U_b", "U_a_e6", "U_b_e6", "E"};
        for (double h : or_default(c_.sweep.h, c_.model.h)) {
            for (double q : or_default(c_.sweep.q, c_.model.q)) {
                for (int nh : or_default(c_.sweep.n_hat, c_.model.n_hat)) {
                    ModelParams p = c_.model;
                    p.h = h;
                    p.q = q;
                    p.n_hat = nh;
                    const GridSpec g = grid_for(p);
                    auto scope = open_cache(p, g);
                    const GameFields f = backward_induction(p, g, scope->cache(), game_options(c_.emit_policies));
                    close_cache(*scope);
                    absorb(f.stats);
                    report_.stats["max_indifference_gap"] =
                        std::max(report_.stats.value("max_indifference_gap", 0.0), f.stats.max_indifference_gap);
                    for (double s : s_axis(g)) {
                        const double ua = f.value0(Player::a, s), ub = f.value0(Player::b, s);
                        t.add({h, q, nh, s, ua, ub, e6(ua), e6(ub), f.duration0(s)});
                    }
                    emit_policies(f, "game");
                    report_.headline = "U_a0=" + Table::cell(e6(f.value0(Player::a, p.p_minus_pstar0))) +
                                       "e-6 E0=" + Table::cell(f.duration0(p.p_minus_pstar0)) + "s";
                }
            }
        }
        return t;
    }

    Table duration() {
        Table t;
        t.columns = {"s", "E", "E_inline", "abs_diff"};
        const ModelParams& p = c_.model;
        const GridSpec g = grid_for(p);
        auto scope = open_cache(p, g);
        const GameFields f = backward_induction(p, g, scope->cache(), game_options(true));
        close_cache(*scope);
        absorb(f.stats);
        const DurationField d = average_duration(f, c_.threads);
        report_.stats["max_bound_violation"] = d.max_bound_violation;
        for (double s : s_axis(g)) {
            const double e = d.at0(f, s), ei = f.duration0(s);
            t.add({s, e, ei, std::abs(e - ei)});
        }
        emit_policies(f, "duration");
        report_.headline = "E0=" + Table::cell(d.at0(f, p.p_minus_pstar0)) + "s";
        return t;
    }

    Table baselines() {
        Table t;
        t.columns = {"v_a",    "v_b",    "design", "n_hat",  "continuous_trading", "V_a",
                     "V_b",    "V_a_e6", "V_b_e6", "duration", "duration_rounded"};
        auto pairs = c_.sweep.pairs;
        if (pairs.empty()) {
            if (c_.kind == RunKind::baselines) pairs = {{c_.model.v_a, c_.model.v_b}};
            else pairs = tabulated_pairs();
        }
        const std::vector<int> periodic_n = c_.sweep.n_hat.empty() ? std::vector<int>{3, 1} : c_.sweep.n_hat;
        auto add = [&](const BaselineReport& r, double va, double vb) {
            t.add({va, vb, to_string(r.design), r.design == Design::clob ? 0 : r.n_hat,
                   r.design == Design::ahead, r.V_a, r.V_b, e6(r.V_a), e6(r.V_b), r.duration,
                   round_to(r.duration, 1)});
        };
        std::string head;
        for (const auto& [va, vb] : pairs) {
            ModelParams p = c_.model;
            p.v_a = va;
            p.v_b = vb;
            const GridSpec g = grid_for(p);
            auto scope = open_cache(p, g);
            const BaselineReport ah = ahead_values(p, g, scope->cache(), game_options(false));
            add(ah, va, vb);
            for (int nh : periodic_n) {
                ModelParams pp = p;
                pp.n_hat = nh;
                if (nh != p.n_hat) {
                    close_cache(*scope);
                    scope = open_cache(pp, g);
                }
                add(periodic_auction_values(pp, g, scope->cache(), game_options(false)), va, vb);
            }
            close_cache(*scope);
            add(clob_values(p), va, vb);
            if (head.empty()) head = "first_row_V_a_e6(ahead)=" + Table::cell(e6(ah.V_a));
        }
        report_.headline = head;
        return t;
    }

    SimOptions sim_options() const {
        SimOptions o;
        o.increments = c_.mc.increments;
        o.lookup = c_.mc.lookup;
        o.penalty = c_.mc.penalty;
        o.threads = c_.threads;
        o.record_paths = c_.mc.record_paths;
        return o;
    }

    Table simulate_run() {
        Table t;
        t.columns = {"M",       "seed",   "U_a0",      "U_b0",          "E0",          "mc_a",
                     "se_a",    "mc_b",   "se_b",      "mc_duration",   "se_duration", "z_a",
                     "z_b",     "triggers_a", "triggers_b", "triggers_both", "forced_at_T", "off_grid_lookups",
                     "n_clamps", "wrong_side_trades"};
        const ModelParams& p = c_.model;
        const GridSpec g = grid_for(p);
        auto scope = open_cache(p, g);
        const GameFields f = backward_induction(p, g, scope->cache(), game_options(true));
        absorb(f.stats);
        const MCStats m = simulate(f, scope->cache(), c_.mc.M, c_.mc.seed, sim_options());
        close_cache(*scope);
        const double ua = f.value0(Player::a, p.p_minus_pstar0), ub = f.value0(Player::b, p.p_minus_pstar0);
        const double e0 = f.duration0(p.p_minus_pstar0);
        auto z = [](double mc, double dp, double se) { return se > 0.0 ? (mc - dp) / se : 0.0; };
        t.add({m.M, c_.mc.seed, ua, ub, e0, m.mean_a, m.se_a, m.mean_b, m.se_b, m.mean_duration, m.se_duration,
               z(m.mean_a, ua, m.se_a), z(m.mean_b, ub, m.se_b), m.triggers_a, m.triggers_b, m.triggers_both,
               m.forced_at_T, m.off_grid_lookups, m.n_clamps, m.wrong_side_trades});
        if (!m.samples.empty()) {
            const auto path = path_for("simulate_paths", ".csv");
            std::ofstream os(path, std::ios::trunc);
            if (!os) throw ConfigError("cannot write " + path);
            write_path_log(os, m.samples);
            report_.files.push_back(path);
        }
        emit_policies(f, "simulate");
        char buf[128];
        std::snprintf(buf, sizeof buf, "z_a=%.2f z_b=%.2f", z(m.mean_a, ua, m.se_a), z(m.mean_b, ub, m.se_b));
        report_.headline = buf;
        return t;
    }

    Table epsilon() {
        Table t;
        t.columns = {"n_hat", "eps_a", "eps_b", "eps_a_e6", "eps_b_e6", "k_a", "n_a_at_a", "n_b_at_a",
                     "k_b",   "n_a_at_b", "n_b_at_b"};
        const bool deviations = c_.given("mc.M");
        Table dev;
        dev.columns = {"n_hat", "player", "deviation", "base_mean", "dev_mean", "gain", "se_diff", "eps", "flagged"};
        std::size_t flagged = 0;
        for (int nh : or_default(c_.sweep.n_hat, c_.model.n_hat)) {
            ModelParams p = c_.model;
            p.n_hat = nh;
            const GridSpec g = grid_for(p);
            auto scope = open_cache(p, g);
            const EpsilonBounds e = epsilon_bounds(p, g, scope->cache(), c_.threads);
            t.add({nh, e.eps_a, e.eps_b, e6(e.eps_a), e6(e.eps_b), e.k_a, e.n_a_at_a, e.n_b_at_a, e.k_b, e.n_a_at_b,
                   e.n_b_at_b});
            if (deviations) {
                const GameFields f = backward_induction(p, g, scope->cache(), game_options(true));
                absorb(f.stats);
                for (Player who : {Player::a, Player::b}) {
                    const auto res = deviation_test(f, scope->cache(), standard_deviations(who), c_.mc.M, c_.mc.seed,
                                                    sim_options(), e.eps_a, e.eps_b);
                    for (const auto& r : res) {
                        flagged += r.flagged ? 1 : 0;
                        dev.add({nh, who == Player::a ? "a" : "b", to_string(r.deviation.kind), r.base_mean,
                                 r.dev_mean, r.gain, r.se_diff, r.eps, r.flagged});
                    }
                }
            }
            close_cache(*scope);
        }
        if (deviations) {
            write_table(dev, "epsilon_deviations");
            report_.headline = "flagged_deviations=" + std::to_string(flagged);
        }
        return t;
    }

    const ExperimentConfig& c_;
    RunReport report_;
    json grids_ = json::array();
};

}  // namespace detail

/// Outer-solve work of a run, in lattice node-steps.
inline double estimated_work(const ExperimentConfig& c) {
    if (c.kind == RunKind::subgame_sweep) return 0.0;
    ModelParams p = c.model;
    const GridSpec g = resolve_grid(c, p);
    const double per_solve = static_cast<double>(OuterLattice(g).size()) * p.steps();
    const auto n = [](std::size_t k) { return static_cast<double>(std::max<std::size_t>(k, 1)); };
    const SweepSpec& s = c.sweep;
    switch (c.kind) {
        case RunKind::game: return per_solve * n(s.h.size()) * n(s.q.size()) * n(s.n_hat.size());
        case RunKind::baselines:
        case RunKind::table3:
        case RunKind::table4: {
            const double rows = s.pairs.empty() ? (c.kind == RunKind::baselines ? 1.0 : 5.0) : s.pairs.size();
            const double designs = 1.0 + (s.n_hat.empty() ? 2.0 : static_cast<double>(s.n_hat.size()));
            return per_solve * rows * designs;
        }
        case RunKind::epsilon: return c.given("mc.M") ? per_solve * n(s.n_hat.size()) : 0.0;
        default: return per_solve;
    }
}

/// Node-steps the solver gets through per second on one core, measured on the desk lattice.
inline constexpr double kNodeStepsPerSecond = 1.5e7;

/// Resolves defaults, checks the runtime budget and runs.
inline RunReport run_experiment(ExperimentConfig c) {
    resolve_profile(c);
    c.model.validate();
    if (c.cache_dir.empty()) {
        if (const char* env = std::getenv("AHEAD_CACHE_DIR")) c.cache_dir = env;
    }
    const double seconds = estimated_work(c) / (kNodeStepsPerSecond * std::max(1, c.threads));
    if (c.profile == Profile::repro && seconds > 600.0 && !c.confirm_long) {
        char buf[200];
        std::snprintf(buf, sizeof buf,
                      "repro run estimated at %.1f hours of outer solves; rerun with --confirm-long to proceed",
                      seconds / 3600.0);
        throw BudgetError(buf);
    }
    detail::Runner r(c);
    return r.run();
}

}  // namespace ahead

#pragma once

// Experiment configuration: sectioned key = value text.
//
//   kind = table3          # top level: kind, profile, threads
//   profile = desk
//   [model]   sigma K q v_a v_b lambda_minus lambda_plus h T delta n_hat
//             sim_mode n_hat_ab p_minus_pstar0 target_rounding
//   [grid]    s_nodes s_max n_max_a n_max_b l_nodes l_max_a l_max_b m_max
//             delta_auc quadrature auction_scheme x_quantum memory_budget_gb
//   [sweep]   h q n_hat np_a np_b x_a x_b s pairs
//   [mc]      M seed increments lookup penalty record_paths
//   [output]  dir cache format emit_policies
//
// Lists are comma separated; lo:hi:step expands to an inclusive range;
// pairs are written v_a/v_b. Numbers accept a/b fractions ("1/3").
// '#' and ';' start comments.

#include <ahead/game.hpp>
#include <ahead/model.hpp>
#include <ahead/simulator.hpp>
#include <ahead/subgame.hpp>

#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace ahead {

enum class RunKind : std::uint8_t { subgame_sweep, game, duration, baselines, table3, table4, simulate, epsilon };
enum class Profile : std::uint8_t { desk, repro };
enum class OutputFormat : std::uint8_t { csv, json };

inline const char* to_string(RunKind k) {
    switch (k) {
        case RunKind::subgame_sweep: return "subgame_sweep";
        case RunKind::game: return "game";
        case RunKind::duration: return "duration";
        case RunKind::baselines: return "baselines";
        case RunKind::table3: return "table3";
        case RunKind::table4: return "table4";
        case RunKind::simulate: return "simulate";
        case RunKind::epsilon: return "epsilon";
    }
    return "?";
}

inline const char* to_string(Profile p) { return p == Profile::desk ? "desk" : "repro"; }
inline const char* to_string(OutputFormat f) { return f == OutputFormat::csv ? "csv" : "json"; }

struct GridSettings {
    int s_nodes = 0;        // 0: profile default
    double s_max = 0.0;     // 0: 10 sigma sqrt(3 delta) scaled to s_nodes
    int n_max_a = -1;       // -1: profile default
    int n_max_b = -1;
    int l_nodes = 0;
    double l_max_a = 0.0;   // 0: automatic
    double l_max_b = 0.0;
    int m_max = 0;          // 0: minimum admissible
    double delta_auc = 0.0; // 0: automatic
    Quadrature quadrature = Quadrature::gauss_hermite3;
    AuctionScheme scheme = AuctionScheme::exponential;
    double x_quantum = 0.0; // 0: profile default
    double memory_budget_gb = 4.0;
};

struct SweepSpec {
    std::vector<double> h, q, x_a, x_b, s;
    std::vector<int> n_hat, np_a, np_b;
    std::vector<std::pair<double, double>> pairs;
};

struct McSettings {
    std::size_t M = 10000;
    std::uint64_t seed = 1;
    GapIncrements increments = GapIncrements::gaussian;
    StateLookup lookup = StateLookup::nearest;
    PenaltyRule penalty = PenaltyRule::closed_form;
    std::size_t record_paths = 0;
};

struct ExperimentConfig {
    RunKind kind = RunKind::game;
    Profile profile = Profile::desk;
    int threads = 1;
    ModelParams model;
    GridSettings grid;
    SweepSpec sweep;
    McSettings mc;
    std::string out_dir = "out";
    std::string cache_dir;
    OutputFormat format = OutputFormat::csv;
    bool emit_policies = false;
    bool confirm_long = false;
    std::string source = "<config>";

    std::set<std::string> explicit_keys;       // "section.key" given in the file or on the command line
    std::vector<std::string> defaults_filled;  // model keys resolved from defaults

    bool given(const std::string& key) const { return explicit_keys.count(key) != 0; }
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, sep)) out.push_back(trim(cur));
    return out;
}

class LineError {
public:
    LineError(std::string source, int line) : source_(std::move(source)), line_(line) {}
    [[noreturn]] void fail(const std::string& msg) const {
        throw ConfigError(source_ + ":" + std::to_string(line_) + ": " + msg);
    }

private:
    std::string source_;
    int line_;
};

inline double parse_number(const std::string& text, const LineError& err, const std::string& key) {
    auto one = [&](const std::string& t) {
        const std::string s = trim(t);
        char* end = nullptr;
        const double v = std::strtod(s.c_str(), &end);
        if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v)) {
            err.fail("key '" + key + "': cannot parse '" + text + "' as a number");
        }
        return v;
    };
    const auto slash = text.find('/');
    if (slash == std::string::npos) return one(text);
    const double den = one(text.substr(slash + 1));
    if (den == 0.0) err.fail("key '" + key + "': zero denominator in '" + text + "'");
    return one(text.substr(0, slash)) / den;
}

inline int parse_int(const std::string& text, const LineError& err, const std::string& key) {
    const double v = parse_number(text, err, key);
    if (v != std::floor(v) || std::abs(v) > 2e9) err.fail("key '" + key + "': '" + text + "' is not an integer");
    return static_cast<int>(v);
}

inline bool parse_bool(const std::string& text, const LineError& err, const std::string& key) {
    if (text == "true" || text == "1" || text == "yes") return true;
    if (text == "false" || text == "0" || text == "no") return false;
    err.fail("key '" + key + "': expected true/false, got '" + text + "'");
}

inline std::vector<double> parse_list(const std::string& text, const LineError& err, const std::string& key) {
    std::vector<double> out;
    for (const auto& item : split(text, ',')) {
        if (item.empty()) continue;
        const auto parts = split(item, ':');
        if (parts.size() == 1) {
            out.push_back(parse_number(item, err, key));
        } else if (parts.size() == 3) {
            const double lo = parse_number(parts[0], err, key), hi = parse_number(parts[1], err, key),
                         st = parse_number(parts[2], err, key);
            if (!(st > 0.0) || hi < lo) err.fail("key '" + key + "': range '" + item + "' needs lo <= hi, step > 0");
            const long n = std::lround(std::floor((hi - lo) / st + 1e-9));
            if (n > 1000000) err.fail("key '" + key + "': range '" + item + "' is too long");
            for (long i = 0; i <= n; ++i) out.push_back(lo + st * static_cast<double>(i));
        } else {
            err.fail("key '" + key + "': malformed list item '" + item + "'");
        }
    }
    if (out.empty()) err.fail("key '" + key + "': empty list");
    return out;
}

inline std::vector<int> parse_int_list(const std::string& text, const LineError& err, const std::string& key) {
    std::vector<int> out;
    for (double v : parse_list(text, err, key)) {
        if (v != std::floor(v) || v < 0) err.fail("key '" + key + "': '" + text + "' must list integers >= 0");
        out.push_back(static_cast<int>(v));
    }
    return out;
}

template <class Enum>
Enum parse_enum(const std::string& text, const LineError& err, const std::string& key,
                std::initializer_list<std::pair<const char*, Enum>> options) {
    std::string names;
    for (const auto& [name, value] : options) {
        if (text == name) return value;
        names += names.empty() ? name : std::string("|") + name;
    }
    err.fail("key '" + key + "': expected one of " + names + ", got '" + text + "'");
}

}  // namespace detail

/// Applies one key = value assignment. `section` is "" for top-level keys.
inline void apply_setting(ExperimentConfig& c, const std::string& section, const std::string& key,
                          const std::string& value, const detail::LineError& err) {
    using namespace detail;
    const std::string full = section.empty() ? key : section + "." + key;
    auto num = [&] { return parse_number(value, err, full); };
    auto integer = [&] { return parse_int(value, err, full); };
    ModelParams& m = c.model;
    GridSettings& g = c.grid;
    bool known = true;

    if (section.empty() || section == "run") {
        if (key == "kind") {
            c.kind = parse_enum<RunKind>(value, err, full,
                                         {{"subgame_sweep", RunKind::subgame_sweep}, {"game", RunKind::game},
                                          {"duration", RunKind::duration}, {"baselines", RunKind::baselines},
                                          {"table3", RunKind::table3}, {"table4", RunKind::table4},
                                          {"simulate", RunKind::simulate}, {"epsilon", RunKind::epsilon}});
        } else if (key == "profile") {
            c.profile = parse_enum<Profile>(value, err, full, {{"desk", Profile::desk}, {"repro", Profile::repro}});
        } else if (key == "threads") {
            c.threads = integer();
            if (c.threads < 1) err.fail("threads must be >= 1");
        } else {
            known = false;
        }
    } else if (section == "model") {
        if (key == "sigma") m.sigma = num();
        else if (key == "K") m.K = num();
        else if (key == "q") m.q = num();
        else if (key == "v_a") m.v_a = num();
        else if (key == "v_b") m.v_b = num();
        else if (key == "lambda_minus") m.lambda_minus = num();
        else if (key == "lambda_plus") m.lambda_plus = num();
        else if (key == "h") m.h = num();
        else if (key == "T") m.T = num();
        else if (key == "delta") m.delta = num();
        else if (key == "n_hat") m.n_hat = integer();
        else if (key == "n_hat_ab") m.n_hat_ab = integer();
        else if (key == "p_minus_pstar0") m.p_minus_pstar0 = num();
        else if (key == "sim_mode")
            m.sim_mode = parse_enum<SimTriggerMode>(
                value, err, full, {{"fixed", SimTriggerMode::fixed}, {"randomized_half", SimTriggerMode::randomized_half}});
        else if (key == "target_rounding")
            m.target_rounding = parse_enum<TargetRounding>(
                value, err, full,
                {{"continuous", TargetRounding::continuous}, {"nearest_integer", TargetRounding::nearest_integer}});
        else known = false;
    } else if (section == "grid") {
        if (key == "s_nodes") g.s_nodes = integer();
        else if (key == "s_max") g.s_max = num();
        else if (key == "n_max_a") g.n_max_a = integer();
        else if (key == "n_max_b") g.n_max_b = integer();
        else if (key == "n_max") g.n_max_a = g.n_max_b = integer();
        else if (key == "l_nodes") g.l_nodes = integer();
        else if (key == "l_max_a") g.l_max_a = num();
        else if (key == "l_max_b") g.l_max_b = num();
        else if (key == "m_max") g.m_max = integer();
        else if (key == "delta_auc") g.delta_auc = num();
        else if (key == "x_quantum") g.x_quantum = num();
        else if (key == "memory_budget_gb") g.memory_budget_gb = num();
        else if (key == "quadrature") {
            const int n = integer();
            if (n != 3 && n != 5) err.fail("grid.quadrature must be 3 or 5");
            g.quadrature = n == 3 ? Quadrature::gauss_hermite3 : Quadrature::gauss_hermite5;
        } else if (key == "auction_scheme")
            g.scheme = parse_enum<AuctionScheme>(value, err, full,
                                                 {{"exponential", AuctionScheme::exponential}, {"euler", AuctionScheme::euler}});
        else known = false;
    } else if (section == "sweep") {
        SweepSpec& s = c.sweep;
        if (key == "h") s.h = parse_list(value, err, full);
        else if (key == "q") s.q = parse_list(value, err, full);
        else if (key == "x_a") s.x_a = parse_list(value, err, full);
        else if (key == "x_b") s.x_b = parse_list(value, err, full);
        else if (key == "s") s.s = parse_list(value, err, full);
        else if (key == "n_hat") s.n_hat = parse_int_list(value, err, full);
        else if (key == "np_a") s.np_a = parse_int_list(value, err, full);
        else if (key == "np_b") s.np_b = parse_int_list(value, err, full);
        else if (key == "pairs") {
            s.pairs.clear();
            for (const auto& item : split(value, ',')) {
                const auto ab = split(item, '/');
                if (ab.size() != 2) err.fail("key 'sweep.pairs': expected v_a/v_b, got '" + item + "'");
                s.pairs.push_back({parse_number(ab[0], err, full), parse_number(ab[1], err, full)});
            }
            if (s.pairs.empty()) err.fail("key 'sweep.pairs': empty list");
        } else known = false;
    } else if (section == "mc") {
        McSettings& mc = c.mc;
        if (key == "M") {
            const double v = num();
            if (v < 1 || v != std::floor(v)) err.fail("mc.M must be a positive integer");
            mc.M = static_cast<std::size_t>(v);
        } else if (key == "seed") {
            char* end = nullptr;
            mc.seed = std::strtoull(value.c_str(), &end, 10);
            if (value.empty() || *end != '\0') err.fail("mc.seed must be an unsigned integer");
        } else if (key == "increments")
            mc.increments = parse_enum<GapIncrements>(value, err, full,
                                                      {{"gaussian", GapIncrements::gaussian}, {"quadrature", GapIncrements::quadrature}});
        else if (key == "lookup")
            mc.lookup = parse_enum<StateLookup>(value, err, full,
                                                {{"nearest", StateLookup::nearest}, {"stochastic_rounding", StateLookup::stochastic_rounding}});
        else if (key == "penalty")
            mc.penalty = parse_enum<PenaltyRule>(value, err, full,
                                                 {{"closed_form", PenaltyRule::closed_form}, {"left_point", PenaltyRule::left_point}});
        else if (key == "record_paths") mc.record_paths = static_cast<std::size_t>(std::max(0, integer()));
        else known = false;
    } else if (section == "output") {
        if (key == "dir") c.out_dir = value;
        else if (key == "cache") c.cache_dir = value;
        else if (key == "format")
            c.format = parse_enum<OutputFormat>(value, err, full, {{"csv", OutputFormat::csv}, {"json", OutputFormat::json}});
        else if (key == "emit_policies") c.emit_policies = parse_bool(value, err, full);
        else known = false;
    } else {
        err.fail("unknown section [" + section + "]");
    }
    if (!known) err.fail("unknown key '" + key + "'" + (section.empty() ? "" : " in [" + section + "]"));
    c.explicit_keys.insert(full);
}

inline ExperimentConfig parse_config(std::istream& is, const std::string& source = "<config>") {
    ExperimentConfig c;
    c.source = source;
    std::string line, section;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const detail::LineError err(source, lineno);
        const auto cut = line.find_first_of("#;");
        std::string text = detail::trim(cut == std::string::npos ? line : line.substr(0, cut));
        if (text.empty()) continue;
        if (text.front() == '[') {
            if (text.back() != ']') err.fail("malformed section header '" + text + "'");
            section = detail::trim(text.substr(1, text.size() - 2));
            if (section != "model" && section != "grid" && section != "sweep" && section != "mc" &&
                section != "output" && section != "run") {
                err.fail("unknown section [" + section + "]");
            }
            continue;
        }
        const auto eq = text.find('=');
        if (eq == std::string::npos) err.fail("expected key = value, got '" + text + "'");
        const std::string key = detail::trim(text.substr(0, eq)), value = detail::trim(text.substr(eq + 1));
        if (key.empty()) err.fail("missing key before '='");
        if (value.empty()) err.fail("key '" + key + "' has no value");
        apply_setting(c, section, key, value, err);
    }
    return c;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file '" + path + "'");
    return parse_config(is, path);
}

/// Fills profile defaults and checks the repro requirements. Idempotent.
inline void resolve_profile(ExperimentConfig& c) {
    ModelParams& m = c.model;
    auto fill = [&](const char* key, auto& field, auto value) {
        if (c.given(std::string("model.") + key)) return;
        field = value;
        c.defaults_filled.push_back(key);
    };
    c.defaults_filled.clear();
    const bool table = c.kind == RunKind::table3 || c.kind == RunKind::table4;
    if (c.kind == RunKind::table4) fill("q", m.q, 0.005);
    if (c.profile == Profile::desk) {
        fill("T", m.T, 20.0);
        // 1/3 makes 1/(2 v delta) integral for v in {0.05, 0.1, 0.15}.
        fill("delta", m.delta, table ? 1.0 / 3.0 : 0.25);
        fill("target_rounding", m.target_rounding, TargetRounding::nearest_integer);
        if (c.grid.x_quantum == 0.0) c.grid.x_quantum = 1e-9;
    } else {
        for (const char* k : {"lambda_minus", "lambda_plus", "sigma"}) {
            if (!c.given(std::string("model.") + k)) {
                throw ConfigError(c.source + ": repro profile requires an explicit model." + k);
            }
        }
        fill("T", m.T, 100.0);
        fill("delta", m.delta, 0.05);
        fill("target_rounding", m.target_rounding, TargetRounding::continuous);
        if (c.grid.x_quantum == 0.0) {
            c.grid.x_quantum = m.target_rounding == TargetRounding::continuous ? 0.1 : 1e-9;
        }
    }
    for (const char* k : {"sigma", "lambda_minus", "lambda_plus"}) {
        if (!c.given(std::string("model.") + k)) c.defaults_filled.push_back(k);
    }
}

/// Outer lattice for the resolved parameters.
inline GridSpec resolve_grid(const ExperimentConfig& c, const ModelParams& p) {
    GridSpec g = GridSpec::desk(p);
    const GridSettings& s = c.grid;
    if (c.profile == Profile::repro) {
        g.n_max_a = g.n_max_b = 30;
    }
    if (s.s_nodes > 0 || s.s_max > 0.0) {
        const int nodes = s.s_nodes > 0 ? s.s_nodes : g.s.nodes;
        if (nodes < 3 || nodes % 2 == 0) throw ConfigError("grid.s_nodes must be odd and >= 3");
        const double ds = p.sigma > 0.0 ? p.sigma * std::sqrt(3.0 * p.delta) : 0.01;
        const double hi = s.s_max > 0.0 ? s.s_max : ds * (nodes - 1) / 2;
        g.s = {-hi, hi, nodes};
    }
    if (s.n_max_a >= 0) g.n_max_a = s.n_max_a;
    if (s.n_max_b >= 0) g.n_max_b = s.n_max_b;
    if (s.l_nodes > 0) {
        g.l_a.nodes = g.l_b.nodes = s.l_nodes;
    }
    if (s.l_max_a > 0.0) g.l_a.hi = s.l_max_a;
    if (s.l_max_b > 0.0) g.l_b.hi = s.l_max_b;
    if (s.m_max > 0) g.m_max = s.m_max;
    g.delta_auc = s.delta_auc;
    return g;
}

inline SubgameOptions resolve_subgame_options(const ExperimentConfig& c) {
    SubgameOptions o;
    o.scheme = c.grid.scheme;
    o.x_quantum = c.grid.x_quantum > 0.0 ? c.grid.x_quantum : 1e-9;
    return o;
}

}  // namespace ahead

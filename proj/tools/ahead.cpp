// Command-line front end: ahead --config run.ini [--out dir] [--cache dir] ...

#include <ahead/experiments.hpp>

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"Ad-hoc auction game solver and experiment runner"};
    std::string config_path, out, cache, profile, format;
    int threads = 0;
    std::uint64_t seed = 0;
    bool confirm_long = false, emit_policies = false;
    app.add_option("--config", config_path, "Experiment config file")->required()->check(CLI::ExistingFile);
    app.add_option("--out", out, "Output directory (overrides [output] dir)");
    app.add_option("--cache", cache, "Sub-game cache directory (falls back to AHEAD_CACHE_DIR)");
    app.add_option("--profile", profile, "Parameter profile")->check(CLI::IsMember({"desk", "repro"}));
    app.add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
    auto* seed_opt = app.add_option("--seed", seed, "Monte Carlo seed");
    app.add_flag("--confirm-long", confirm_long, "Allow repro runs estimated above ten minutes");
    app.add_flag("--emit-policies", emit_policies, "Dump full policy fields of solved games");
    app.add_option("--format", format, "Output table format")->check(CLI::IsMember({"csv", "json"}));
    CLI11_PARSE(app, argc, argv);

    try {
        ahead::ExperimentConfig c = ahead::load_config(config_path);
        // Command-line values override the file.
        const ahead::detail::LineError cli("<command line>", 0);
        if (!profile.empty()) ahead::apply_setting(c, "", "profile", profile, cli);
        if (threads > 0) ahead::apply_setting(c, "", "threads", std::to_string(threads), cli);
        if (*seed_opt) ahead::apply_setting(c, "mc", "seed", std::to_string(seed), cli);
        if (!format.empty()) ahead::apply_setting(c, "output", "format", format, cli);
        if (!out.empty()) c.out_dir = out;
        if (!cache.empty()) c.cache_dir = cache;
        if (emit_policies) c.emit_policies = true;
        c.confirm_long = confirm_long;

        const ahead::RunReport r = ahead::run_experiment(c);
        std::cout << r.summary() << "\n";
        for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
        return 0;
    } catch (const ahead::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const ahead::BudgetError& e) {
        std::cerr << "refused: " << e.what() << "\n";
        return 3;
    } catch (const ahead::NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

#include "commands.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    using namespace gradstab::cli;

    CLI::App app{"Gradient-stability experiments for BDF1-3 on semiconvex energies"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    std::string format = "csv";
    std::vector<std::string> overrides;
    app.add_option("--config", config_path, "INI experiment config")->check(CLI::ExistingFile);
    auto* out_opt = app.add_option("--out", out_dir, "Directory for data files (nothing is written without it)");
    auto* seed_opt = app.add_option("--seed", seed, "Seed for every pseudo-random choice");
    app.add_option("--format", format, "Table format")->check(CLI::IsMember({"csv", "json"}));
    app.add_option("--set", overrides, "Config override section.key=value (repeatable)");

    auto* certify = app.add_subcommand("certify-beta3", "Maximise f over Omega and check beta_3 = 95/96");
    auto* decomp = app.add_subcommand("decompose", "Print a decomposition certifying a given beta");
    std::string beta;
    auto* beta_opt = decomp->add_option("--beta", beta, "beta as a decimal or p/q (default 95/96)");
    auto* run = app.add_subcommand("run", "Run a BDFk trajectory and audit its descent");
    auto* counter = app.add_subcommand("counterexample", "Run the (-1)^n barrier trajectory of order k");
    int k = 3;
    auto* k_opt = counter->add_option("--k", k, "BDF order")->check(CLI::Range(1, 3));
    auto* order = app.add_subcommand("order-study", "Fit convergence orders against a reference solution");
    auto* multi = app.add_subcommand("multivalued-demo", "Enumerate step branches and audit each one");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // --help exits 0; every usage error is a config error
        return app.exit(e) == 0 ? ExitCode::ok : ExitCode::config_error;
    }

    return guarded(
        [&]() -> int {
            Context ctx;
            if (!config_path.empty()) ctx.config = ExperimentConfig::load(config_path);
            for (const auto& o : overrides) ctx.config.assign(o);
            if (*out_opt) ctx.out_dir = out_dir;
            if (*seed_opt) ctx.seed = seed;
            ctx.format = format == "json" ? Format::json : Format::csv;
            ctx.out = &std::cout;

            if (*certify) return cmd_certify_beta3(ctx);
            if (*decomp) return cmd_decompose(ctx, *beta_opt ? std::optional<std::string>(beta) : std::nullopt);
            if (*run) return cmd_run(ctx);
            if (*counter) return cmd_counterexample(ctx, *k_opt ? std::optional<int>(k) : std::nullopt);
            if (*order) return cmd_order_study(ctx);
            if (*multi) return cmd_multivalued_demo(ctx);
            return ExitCode::config_error;
        },
        std::cerr);
}

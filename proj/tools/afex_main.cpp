#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "afex/cli.hpp"

namespace {

std::optional<std::uint64_t> opt_seed(const CLI::Option* flag, std::uint64_t value) {
    if (flag->count() == 0) return std::nullopt;
    return value;
}

std::optional<std::string> opt_dir(const CLI::Option* flag, const std::string& value) {
    if (flag->count() == 0) return std::nullopt;
    return value;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"attention-like feature explanations for black-box models"};
    app.require_subcommand(1);

    std::string config_path, checkpoint_path, request_path, out_dir;
    std::uint64_t seed = 0;

    CLI::App* train = app.add_subcommand("train", "train a model against an oracle");
    train->add_option("--config", config_path, "run configuration JSON")->required();
    const CLI::Option* train_out = train->add_option("--out", out_dir, "output directory");
    const CLI::Option* train_seed =
        train->add_option("--seed", seed, "override the configured seed");

    CLI::App* explain = app.add_subcommand("explain", "explain a point with a checkpoint");
    explain->add_option("--checkpoint", checkpoint_path, "trained checkpoint JSON")
        ->required();
    explain->add_option("--request", request_path, "explanation request JSON")->required();
    const CLI::Option* explain_out =
        explain->add_option("--out", out_dir, "output directory");
    const CLI::Option* explain_seed =
        explain->add_option("--seed", seed, "override the request seed");

    CLI::App* compare =
        app.add_subcommand("compare-weighting", "train once per weighting method");
    compare->add_option("--config", config_path, "run configuration JSON")->required();
    const CLI::Option* compare_out =
        compare->add_option("--out", out_dir, "output directory");
    const CLI::Option* compare_seed =
        compare->add_option("--seed", seed, "override the configured seed");

    CLI::App* oracle_eval =
        app.add_subcommand("oracle-eval", "evaluate an oracle on a CSV of points");
    oracle_eval->add_option("--config", config_path, "oracle+data JSON")->required();
    const CLI::Option* oracle_out =
        oracle_eval->add_option("--out", out_dir, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);  // prints help, exit 0
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;  // usage problems are config errors
    }

    if (train->parsed()) {
        return afex::cli::run_train(config_path, opt_dir(train_out, out_dir),
                                    opt_seed(train_seed, seed));
    }
    if (explain->parsed()) {
        return afex::cli::run_explain(checkpoint_path, request_path,
                                      opt_dir(explain_out, out_dir),
                                      opt_seed(explain_seed, seed));
    }
    if (compare->parsed()) {
        return afex::cli::run_compare(config_path, opt_dir(compare_out, out_dir),
                                      opt_seed(compare_seed, seed));
    }
    if (oracle_eval->parsed()) {
        return afex::cli::run_oracle_eval(config_path, opt_dir(oracle_out, out_dir));
    }
    return 1;
}

#pragma once

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "afex/explain.hpp"
#include "afex/oracle.hpp"
#include "afex/tensor.hpp"
#include "afex/trainer.hpp"

namespace afex::cli {

/// Anything wrong with user-supplied configuration; maps to exit code 1.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Black-box reference as it appears in config files.
struct OracleSpec {
    std::string kind;  // "analytic", "file" or "command"
    std::string name;
    std::size_t dim = 0;  // 0 = the function's usual dimension
    std::string path;
    std::vector<std::string> argv;
};

struct RunConfig {
    OracleSpec oracle;
    TrainConfig train;
    std::vector<WeightMethod> methods;  // compare-weighting series
    std::string out_dir = ".";
    bool emit_svg = true;
};

struct ExplainSpec {
    OracleSpec oracle;
    ExplainRequest request;
    bool emit_svg = true;
};

RunConfig load_run_config(const std::string& path);
ExplainSpec load_explain_spec(const std::string& path);
std::unique_ptr<Oracle> make_oracle(const OracleSpec& spec);

/// Numeric CSV with the target in the last column.
std::pair<Tensor, Tensor> load_csv_dataset(const std::string& path);

/// Command bodies behind the CLI verbs. Each returns a process exit code:
/// 0 success, 1 configuration problem, 2 runtime or numerical failure.
int run_train(const std::string& config_path, const std::optional<std::string>& out_dir,
              std::optional<std::uint64_t> seed);
int run_explain(const std::string& checkpoint_path, const std::string& request_path,
                const std::optional<std::string>& out_dir,
                std::optional<std::uint64_t> seed);
int run_compare(const std::string& config_path, const std::optional<std::string>& out_dir,
                std::optional<std::uint64_t> seed);
int run_oracle_eval(const std::string& config_path,
                    const std::optional<std::string>& out_dir);

}  // namespace afex::cli

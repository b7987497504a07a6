#pragma once

#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "afex/tensor.hpp"

namespace afex {

struct OracleError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A black-box prediction source: one finite real per input row. All
/// subclasses are stateless with respect to eval (a concatenated batch gives
/// the concatenation of the per-batch results).
class Oracle {
public:
    virtual ~Oracle() = default;

    std::size_t dim() const { return d_; }

    /// x is n x d (or a length-d vector for a single row); returns length n.
    Tensor eval(const Tensor& x) const;

protected:
    explicit Oracle(std::size_t d) : d_(d) {}
    virtual Tensor eval_rows(const Tensor& x) const = 0;

    std::size_t d_;
};

enum class AnalyticFn { Conditional, Chessboard, Product, Wedge, QuadLinear };

const char* analytic_name(AnalyticFn fn);
AnalyticFn analytic_by_name(const std::string& name);  // throws OracleError

/// The dimension each named function is usually run with (2 for the
/// two-variable functions, 5 where only the first two of five matter).
std::size_t analytic_default_dim(AnalyticFn fn);

double analytic_value(AnalyticFn fn, const double* row);

class AnalyticOracle : public Oracle {
public:
    AnalyticOracle(AnalyticFn fn, std::size_t d);
    AnalyticFn fn() const { return fn_; }

protected:
    Tensor eval_rows(const Tensor& x) const override;

private:
    AnalyticFn fn_;
};

/// Nearest-neighbour lookup into a CSV of (x_1..x_d, y) rows under Euclidean
/// distance; no interpolation. The distance to the matched row is exposed
/// for auditability.
class FileOracle : public Oracle {
public:
    explicit FileOracle(const std::string& path);

    std::size_t size() const { return y_.size(); }

    /// As eval, but also fills the nearest-row distance per query.
    Tensor eval_with_distance(const Tensor& x, std::vector<double>* distance) const;

protected:
    Tensor eval_rows(const Tensor& x) const override;

private:
    std::vector<std::vector<double>> rows_;
    std::vector<double> y_;
};

/// Runs an external program per batch: CSV rows on its standard input, one
/// real per line on its standard output. Invocations on the same instance
/// are serialized.
class CommandOracle : public Oracle {
public:
    CommandOracle(std::vector<std::string> argv, std::size_t d);

protected:
    Tensor eval_rows(const Tensor& x) const override;

private:
    std::vector<std::string> argv_;
    mutable std::mutex run_mutex_;
};

std::unique_ptr<Oracle> make_analytic_oracle(const std::string& name, std::size_t d = 0);
std::unique_ptr<Oracle> make_file_oracle(const std::string& path);
std::unique_ptr<Oracle> make_command_oracle(std::vector<std::string> argv, std::size_t d);

}  // namespace afex

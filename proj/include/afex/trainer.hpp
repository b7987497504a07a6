#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "afex/basis.hpp"
#include "afex/oracle.hpp"
#include "afex/rng.hpp"
#include "afex/tensor.hpp"
#include "afex/weighting.hpp"

namespace afex {

struct TrainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TrainConfig {
    std::size_t batch_size = 1000;
    std::size_t iterations = 2000;
    double learning_rate = 1e-3;
    double center_stddev = 1.0;  // centers drawn from N(0, stddev^2) per coordinate
    double local_radius = 0.5;   // half-width of the uniform box around the center
    std::size_t k = 5;           // basis functions per feature
    double lambda_ridge = 0.1;
    bool surrogate_enabled = false;
    double lambda_surrogate = 1.0;
    std::vector<std::size_t> surrogate_hidden = {10, 10, 10, 10, 10};
    bool pairwise_enabled = false;
    bool standardize = false;  // calibrate an input affine transform up front
    std::uint64_t seed = 0;
    WeightMethod method = WeightMethod::LinearRegression;

    /// Assembled feature-matrix width for d features: k d singles, the pair
    /// block when enabled, plus the bias column (regression method only;
    /// the scorers have no bias concept).
    std::size_t feature_width(std::size_t d) const;

    /// Throws TrainError when a field is out of range or the batch cannot
    /// cover the feature width.
    void validate(std::size_t d) const;
};

/// Fully-connected ReLU network approximating the black box; its output z
/// replaces y inside the weight solve when enabled.
struct SurrogateNet {
    std::size_t d = 0;
    std::vector<std::size_t> hidden;
    std::vector<Tensor> weights;  // hidden.size()+1 matrices
    std::vector<Tensor> biases;

    static SurrogateNet initialize(std::size_t d, std::vector<std::size_t> hidden,
                                   Rng& rng);

    std::vector<Tensor*> parameters();
    std::vector<const Tensor*> parameters() const;

    /// Numeric forward pass; returns length n.
    Tensor forward(const Tensor& x) const;
};

struct SurrogateGraph {
    std::vector<ad::NodePtr> flat_params;  // same order as SurrogateNet::parameters()
    ad::NodePtr z;                         // n x 1
};

SurrogateGraph build_surrogate_graph(const SurrogateNet& net, const Tensor& x);

/// Per-feature affine input transform x -> (x - mean) / scale, calibrated
/// once before training when TrainConfig::standardize is set.
struct Standardizer {
    std::vector<double> mean;
    std::vector<double> scale;

    Tensor apply(const Tensor& x) const;
    double apply_one(std::size_t feature, double v) const;
};

/// Adaptive moment estimation over an explicit parameter list. State is
/// positional: the list order must never change between steps.
struct Adam {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::size_t t = 0;
    std::vector<Tensor> m;
    std::vector<Tensor> v;

    void init(const std::vector<Tensor*>& params);
    void step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads);
};

struct Batch {
    Tensor x;  // n x d
    Tensor y;  // n
};

/// Center from N(0, center_stddev^2), rows uniform in the box of half-width
/// local_radius around it, targets from the oracle.
Batch sample_batch(const TrainConfig& config, Rng& rng, const Oracle& oracle);

struct StepStats {
    double loss = 0.0;            // full training objective (mean-per-row form)
    double mse = 0.0;             // ||F w - y||^2 / n
    double target_variance = 0.0; // variance of the batch targets
    bool ridge_path = false;      // regression method only
};

/// One forward/backward/update on a prepared batch; the returned numbers
/// describe the state before the parameter update.
StepStats train_step(BasisBank& bank, SurrogateNet* surrogate, Adam& opt,
                     const Batch& batch, const TrainConfig& config,
                     const Standardizer* standardizer = nullptr);

struct TrainReport {
    std::vector<double> loss_trace;      // per-iteration objective
    std::vector<double> mse_trace;       // per-iteration ||F w - y||^2 / n
    std::vector<double> variance_trace;  // per-iteration batch target variance
    double final_loss = 0.0;
    double wall_seconds = 0.0;
    std::size_t qr_steps = 0;
    std::size_t ridge_steps = 0;
};

/// Runs the sampled-batch training loop, mutating bank (and surrogate) in
/// place. rng drives batch sampling only.
TrainReport train(BasisBank& bank, SurrogateNet* surrogate, const Oracle& oracle,
                  const TrainConfig& config, Rng& rng, Adam& opt,
                  const Standardizer* standardizer = nullptr);

struct TrainedModel {
    BasisBank bank;
    std::optional<SurrogateNet> surrogate;
    std::optional<Standardizer> standardizer;
    TrainConfig config;
    Adam optimizer;
    TrainReport report;
};

/// Seeds everything from config.seed, initializes a fresh bank (and
/// surrogate when enabled) and trains it against the oracle.
TrainedModel train_fresh(const Oracle& oracle, const TrainConfig& config);

struct MethodTrace {
    WeightMethod method = WeightMethod::LinearRegression;
    std::vector<double> mse_trace;
    std::vector<double> variance_trace;
    double final_mse = 0.0;
};

/// Trains one independent system per method, identical seeds, and returns
/// the aligned loss traces.
std::vector<MethodTrace> compare_weighting(const Oracle& oracle, const TrainConfig& config,
                                           const std::vector<WeightMethod>& methods);

}  // namespace afex

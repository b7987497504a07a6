#include "afex/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstddef>
#include <utility>

#include "afex/autodiff.hpp"
#include "afex/kernels.hpp"

namespace afex {

namespace {

double glorot_limit(std::size_t fan_in, std::size_t fan_out) {
    return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

Tensor glorot_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
    Tensor w = Tensor::matrix(rows, cols);
    const double limit = glorot_limit(rows, cols);
    for (std::size_t i = 0; i < w.numel(); ++i) w[i] = rng.uniform(-limit, limit);
    return w;
}

double population_variance(const Tensor& y) {
    const std::size_t n = y.numel();
    if (n == 0) return 0.0;
    const double mean = kernels::sum(y) / static_cast<double>(n);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dy = y[i] - mean;
        acc += dy * dy;
    }
    return acc / static_cast<double>(n);
}

Tensor flat_copy(const Tensor& t) {
    return Tensor({t.numel()}, std::vector<double>(t.ptr(), t.ptr() + t.numel()));
}

}  // namespace

std::size_t TrainConfig::feature_width(std::size_t d) const {
    std::size_t width = k * d;
    if (pairwise_enabled) width += k * k * d * (d - 1) / 2;
    if (method == WeightMethod::LinearRegression) width += 1;  // bias column
    return width;
}

void TrainConfig::validate(std::size_t d) const {
    if (d == 0) throw TrainError("config: zero-dimensional input space");
    if (k == 0) throw TrainError("config: k must be at least 1");
    if (learning_rate <= 0.0) throw TrainError("config: learning rate must be positive");
    if (center_stddev <= 0.0) throw TrainError("config: center stddev must be positive");
    if (local_radius <= 0.0) throw TrainError("config: local radius must be positive");
    if (lambda_ridge <= 0.0) throw TrainError("config: ridge lambda must be positive");
    if (surrogate_enabled && lambda_surrogate <= 0.0) {
        throw TrainError("config: surrogate lambda must be positive when enabled");
    }
    const std::size_t width = feature_width(d);
    if (batch_size <= width) {
        throw TrainError("config: batch size " + std::to_string(batch_size) +
                         " must exceed the feature width " + std::to_string(width) +
                         " for a well-posed least-squares solve");
    }
}

SurrogateNet SurrogateNet::initialize(std::size_t d, std::vector<std::size_t> hidden,
                                      Rng& rng) {
    if (d == 0) throw TrainError("surrogate: zero-dimensional input");
    for (std::size_t h : hidden) {
        if (h == 0) throw TrainError("surrogate: zero-width hidden layer");
    }
    SurrogateNet net;
    net.d = d;
    net.hidden = std::move(hidden);
    std::size_t prev = d;
    for (std::size_t h : net.hidden) {
        net.weights.push_back(glorot_matrix(prev, h, rng));
        net.biases.push_back(Tensor({h}));
        prev = h;
    }
    net.weights.push_back(glorot_matrix(prev, 1, rng));
    net.biases.push_back(Tensor({1}));
    return net;
}

std::vector<Tensor*> SurrogateNet::parameters() {
    std::vector<Tensor*> out;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        out.push_back(&weights[l]);
        out.push_back(&biases[l]);
    }
    return out;
}

std::vector<const Tensor*> SurrogateNet::parameters() const {
    std::vector<const Tensor*> out;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        out.push_back(&weights[l]);
        out.push_back(&biases[l]);
    }
    return out;
}

Tensor SurrogateNet::forward(const Tensor& x) const {
    if (x.rank() != 2 || x.cols() != d) {
        throw TrainError("surrogate: input shape " + x.shape_string() + " does not match " +
                         std::to_string(d) + " features");
    }
    Tensor a = x;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        Tensor pre;
        kernels::gemm(a, weights[l], pre);
        Tensor shifted;
        kernels::add_rowvec(pre, biases[l], shifted);
        if (l + 1 < weights.size()) {
            kernels::map_relu(shifted, a);
        } else {
            a = shifted;
        }
    }
    return flat_copy(a);  // n x 1 down to a plain vector
}

SurrogateGraph build_surrogate_graph(const SurrogateNet& net, const Tensor& x) {
    if (x.rank() != 2 || x.cols() != net.d) {
        throw TrainError("surrogate: input shape " + x.shape_string() + " does not match " +
                         std::to_string(net.d) + " features");
    }
    SurrogateGraph graph;
    ad::NodePtr a = ad::input(x, "sx");
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        ad::NodePtr w = ad::input(net.weights[l], "sw" + std::to_string(l));
        ad::NodePtr b = ad::input(net.biases[l], "sb" + std::to_string(l));
        graph.flat_params.push_back(w);
        graph.flat_params.push_back(b);
        ad::NodePtr pre = ad::add(ad::matmul(a, w), b);
        a = (l + 1 < net.weights.size()) ? ad::relu(pre) : pre;
    }
    graph.z = a;  // n x 1
    return graph;
}

Tensor Standardizer::apply(const Tensor& x) const {
    const std::size_t d = mean.size();
    if (x.rank() != 2 || x.cols() != d) {
        throw TrainError("standardizer: shape " + x.shape_string() + " does not match " +
                         std::to_string(d) + " features");
    }
    Tensor out = x;
    for (std::size_t i = 0; i < x.rows(); ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            out.at(i, j) = (x.at(i, j) - mean[j]) / scale[j];
        }
    }
    return out;
}

double Standardizer::apply_one(std::size_t feature, double v) const {
    if (feature >= mean.size()) throw TrainError("standardizer: feature out of range");
    return (v - mean[feature]) / scale[feature];
}

void Adam::init(const std::vector<Tensor*>& params) {
    t = 0;
    m.clear();
    v.clear();
    for (const Tensor* p : params) {
        m.emplace_back(p->shape());
        v.emplace_back(p->shape());
    }
}

void Adam::step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads) {
    if (params.size() != grads.size()) {
        throw TrainError("optimizer: parameter/gradient count mismatch");
    }
    if (m.empty()) init(params);
    if (m.size() != params.size()) {
        throw TrainError("optimizer: state was built for a different parameter list");
    }
    ++t;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& p = *params[i];
        const Tensor& g = grads[i];
        if (g.numel() != p.numel()) {
            throw TrainError("optimizer: gradient shape mismatch at slot " +
                             std::to_string(i));
        }
        for (std::size_t j = 0; j < p.numel(); ++j) {
            m[i][j] = beta1 * m[i][j] + (1.0 - beta1) * g[j];
            v[i][j] = beta2 * v[i][j] + (1.0 - beta2) * g[j] * g[j];
            const double mhat = m[i][j] / bc1;
            const double vhat = v[i][j] / bc2;
            p[j] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

Batch sample_batch(const TrainConfig& config, Rng& rng, const Oracle& oracle) {
    const std::size_t d = oracle.dim();
    const std::size_t n = config.batch_size;
    std::vector<double> center(d);
    for (std::size_t j = 0; j < d; ++j) center[j] = rng.normal(0.0, config.center_stddev);

    Batch batch;
    batch.x = Tensor::matrix(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            batch.x.at(i, j) = center[j] + rng.uniform(-config.local_radius,
                                                       config.local_radius);
        }
    }
    try {
        batch.y = flat_copy(oracle.eval(batch.x));
    } catch (const std::exception& e) {
        throw TrainError(std::string("oracle failed on a sampled batch: ") + e.what());
    }
    return batch;
}

StepStats train_step(BasisBank& bank, SurrogateNet* surrogate, Adam& opt,
                     const Batch& batch, const TrainConfig& config,
                     const Standardizer* standardizer) {
    const std::size_t n = batch.x.rows();
    if (batch.x.rank() != 2 || batch.x.cols() != bank.d) {
        throw TrainError("batch shape " + batch.x.shape_string() + " does not match a " +
                         std::to_string(bank.d) + "-feature bank");
    }
    if (batch.y.numel() != n) throw TrainError("batch target length mismatch");
    if (config.surrogate_enabled && surrogate == nullptr) {
        throw TrainError("surrogate enabled but no network supplied");
    }

    const Tensor x = standardizer ? standardizer->apply(batch.x) : batch.x;
    const Tensor y = flat_copy(batch.y);

    BankGraph graph = build_bank_graph(bank, x);
    const bool with_bias = config.method == WeightMethod::LinearRegression;
    ad::NodePtr f = feature_matrix_node(graph, bank.d, bank.k, config.pairwise_enabled,
                                        with_bias, n);
    ad::NodePtr y_vec = ad::input(y, "y");

    SurrogateGraph sg;
    if (config.surrogate_enabled) sg = build_surrogate_graph(*surrogate, x);

    StepStats stats;
    stats.target_variance = population_variance(y);

    // The weights: a differentiable solve for the regression method, a
    // detached per-batch constant for the scorer methods.
    ad::NodePtr w;
    if (config.method == WeightMethod::LinearRegression) {
        const ad::NodePtr rhs = config.surrogate_enabled ? sg.z : y_vec;
        auto [wnode, report] = solve_weights_node(f, rhs, config.lambda_ridge);
        w = wnode;
        stats.ridge_path = report.path == RankReport::Path::Ridge;
    } else {
        const Tensor& fv = ad::forward(f);
        const Tensor target =
            config.surrogate_enabled ? flat_copy(ad::forward(sg.z)) : y;
        const AttentionWeights aw =
            compute_method_weights(config.method, fv, target, config.lambda_ridge);
        w = ad::input(aw.w, "w");
    }

    const double inv_n = 1.0 / static_cast<double>(n);
    ad::NodePtr residual = ad::add(ad::matmul(f, w), ad::affine(y_vec, -1.0, 0.0));
    ad::NodePtr mse_node = ad::affine(ad::sum(ad::square(residual)), inv_n, 0.0);

    ad::NodePtr total = mse_node;
    if (config.surrogate_enabled) {
        // z and the surrogate residual live in column shape, so the target
        // enters once more as an n x 1 input alongside the flat y above.
        Tensor y_col({n, 1}, std::vector<double>(y.ptr(), y.ptr() + n));
        ad::NodePtr y_col_node = ad::input(y_col, "y-col");
        ad::NodePtr sres = ad::add(sg.z, ad::affine(y_col_node, -1.0, 0.0));
        ad::NodePtr sloss =
            ad::affine(ad::sum(ad::square(sres)), config.lambda_surrogate * inv_n, 0.0);
        total = ad::add(mse_node, sloss);
    }

    stats.loss = ad::forward(total)[0];
    stats.mse = mse_node->value[0];
    ad::backward(total);

    std::vector<Tensor*> params = bank.parameters();
    std::vector<Tensor> grads;
    grads.reserve(params.size() + sg.flat_params.size());
    for (const ad::NodePtr& node : graph.flat_params) grads.push_back(node->grad);
    if (config.surrogate_enabled) {
        for (Tensor* p : surrogate->parameters()) params.push_back(p);
        for (const ad::NodePtr& node : sg.flat_params) grads.push_back(node->grad);
    }
    opt.step(params, grads);
    return stats;
}

TrainReport train(BasisBank& bank, SurrogateNet* surrogate, const Oracle& oracle,
                  const TrainConfig& config, Rng& rng, Adam& opt,
                  const Standardizer* standardizer) {
    config.validate(oracle.dim());
    if (oracle.dim() != bank.d) {
        throw TrainError("oracle dimension " + std::to_string(oracle.dim()) +
                         " does not match the bank's " + std::to_string(bank.d));
    }

    TrainReport report;
    report.loss_trace.reserve(config.iterations);
    report.mse_trace.reserve(config.iterations);
    report.variance_trace.reserve(config.iterations);
    const auto start = std::chrono::steady_clock::now();

    for (std::size_t it = 0; it < config.iterations; ++it) {
        StepStats stats;
        try {
            const Batch batch = sample_batch(config, rng, oracle);
            stats = train_step(bank, surrogate, opt, batch, config, standardizer);
        } catch (const std::exception& e) {
            throw TrainError("training aborted at iteration " + std::to_string(it) +
                             ": " + e.what());
        }
        if (!std::isfinite(stats.loss)) {
            throw TrainError("training aborted at iteration " + std::to_string(it) +
                             ": non-finite loss");
        }
        report.loss_trace.push_back(stats.loss);
        report.mse_trace.push_back(stats.mse);
        report.variance_trace.push_back(stats.target_variance);
        if (config.method == WeightMethod::LinearRegression) {
            if (stats.ridge_path) {
                ++report.ridge_steps;
            } else {
                ++report.qr_steps;
            }
        }
    }

    const auto stop = std::chrono::steady_clock::now();
    report.wall_seconds = std::chrono::duration<double>(stop - start).count();
    report.final_loss = report.loss_trace.empty() ? 0.0 : report.loss_trace.back();
    return report;
}

TrainedModel train_fresh(const Oracle& oracle, const TrainConfig& config) {
    const std::size_t d = oracle.dim();
    config.validate(d);

    TrainedModel model;
    model.config = config;

    Rng rng(config.seed);
    model.bank = BasisBank::initialize(d, config.k, rng);
    if (config.surrogate_enabled) {
        model.surrogate = SurrogateNet::initialize(d, config.surrogate_hidden, rng);
    }
    if (config.standardize) {
        const Batch calibration = sample_batch(config, rng, oracle);
        Standardizer st;
        st.mean.resize(d);
        st.scale.resize(d);
        const double n = static_cast<double>(calibration.x.rows());
        for (std::size_t j = 0; j < d; ++j) {
            double mean = 0.0;
            for (std::size_t i = 0; i < calibration.x.rows(); ++i) {
                mean += calibration.x.at(i, j);
            }
            mean /= n;
            double var = 0.0;
            for (std::size_t i = 0; i < calibration.x.rows(); ++i) {
                const double dx = calibration.x.at(i, j) - mean;
                var += dx * dx;
            }
            var /= n;
            st.mean[j] = mean;
            st.scale[j] = var > 1e-24 ? std::sqrt(var) : 1.0;
        }
        model.standardizer = std::move(st);
    }

    model.optimizer.lr = config.learning_rate;
    std::vector<Tensor*> params = model.bank.parameters();
    if (model.surrogate) {
        for (Tensor* p : model.surrogate->parameters()) params.push_back(p);
    }
    model.optimizer.init(params);

    model.report = train(model.bank, model.surrogate ? &*model.surrogate : nullptr,
                         oracle, config, rng, model.optimizer,
                         model.standardizer ? &*model.standardizer : nullptr);
    return model;
}

std::vector<MethodTrace> compare_weighting(const Oracle& oracle, const TrainConfig& config,
                                           const std::vector<WeightMethod>& methods) {
    std::vector<MethodTrace> traces;
    traces.reserve(methods.size());
    for (WeightMethod method : methods) {
        TrainConfig per_method = config;
        per_method.method = method;
        const TrainedModel model = train_fresh(oracle, per_method);
        MethodTrace trace;
        trace.method = method;
        trace.mse_trace = model.report.mse_trace;
        trace.variance_trace = model.report.variance_trace;
        trace.final_mse = trace.mse_trace.empty() ? 0.0 : trace.mse_trace.back();
        traces.push_back(std::move(trace));
    }
    return traces;
}

}  // namespace afex

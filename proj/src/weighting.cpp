#include "afex/weighting.hpp"

#include <cmath>

#include "afex/kernels.hpp"
#include "afex/linalg.hpp"

namespace afex {

const char* weight_method_name(WeightMethod method) {
    switch (method) {
        case WeightMethod::LinearRegression: return "linear-regression";
        case WeightMethod::DotSoftmax: return "dot-softmax";
        case WeightMethod::Cosine: return "cosine";
        case WeightMethod::Pearson: return "pearson";
        case WeightMethod::PearsonSoftmax: return "pearson-softmax";
    }
    return "?";
}

WeightMethod weight_method_by_name(const std::string& name) {
    if (name == "linear-regression") return WeightMethod::LinearRegression;
    if (name == "dot-softmax") return WeightMethod::DotSoftmax;
    if (name == "cosine") return WeightMethod::Cosine;
    if (name == "pearson") return WeightMethod::Pearson;
    if (name == "pearson-softmax") return WeightMethod::PearsonSoftmax;
    throw WeightingError("unknown weighting method: " + name);
}

namespace {

void check_batch(const Tensor& f, const Tensor& y) {
    if (f.rank() != 2 || f.rows() == 0 || f.cols() == 0) {
        throw WeightingError("empty batch: feature matrix is " + f.shape_string());
    }
    if (y.numel() != f.rows()) {
        throw WeightingError("target length " + std::to_string(y.numel()) +
                             " does not match " + std::to_string(f.rows()) + " rows");
    }
}

Tensor ridge_system_solve(const Tensor& f, const Tensor& y, double lambda) {
    Tensor a;
    kernels::gemm_tn(f, f, a);
    for (std::size_t i = 0; i < a.rows(); ++i) a.at(i, i) += lambda;
    Tensor fty;
    kernels::matvec_t(f, y, fty);
    return linalg::solve_utu(linalg::cholesky_upper(a), fty);
}

}  // namespace

std::pair<AttentionWeights, RankReport> solve_weights_regression(const Tensor& f,
                                                                 const Tensor& y,
                                                                 double lambda) {
    check_batch(f, y);
    const std::size_t m = f.cols();

    const linalg::RankEstimate est = linalg::estimate_rank(f);
    RankReport report;
    report.estimated_rank = est.rank;
    report.threshold = est.threshold;

    AttentionWeights weights;
    weights.method = WeightMethod::LinearRegression;

    if (est.rank == m) {
        report.path = RankReport::Path::Qr;
        weights.lambda = 0.0;
        weights.w = linalg::qr_solve(linalg::qr_decompose(f), y);
    } else {
        report.path = RankReport::Path::Ridge;
        weights.lambda = lambda;
        weights.w = ridge_system_solve(f, y, lambda);
    }
    return {std::move(weights), report};
}

std::pair<AttentionWeights, RankReport> solve_weights_regression(const FeatureMatrix& f,
                                                                 const Tensor& y,
                                                                 double lambda) {
    if (!f.has_bias()) {
        throw WeightingError("regression weighting expects the bias column");
    }
    return solve_weights_regression(f.values, y, lambda);
}

std::pair<ad::NodePtr, RankReport> solve_weights_node(const ad::NodePtr& f,
                                                      const ad::NodePtr& y,
                                                      double lambda) {
    const Tensor& fv = ad::forward(f);
    check_batch(fv, ad::forward(y));

    const linalg::RankEstimate est = linalg::estimate_rank(fv);
    RankReport report;
    report.estimated_rank = est.rank;
    report.threshold = est.threshold;
    const bool full = est.rank == fv.cols();
    report.path = full ? RankReport::Path::Qr : RankReport::Path::Ridge;
    return {ad::ridge_solve(f, y, full ? 0.0 : lambda), report};
}

double score_dot(const Tensor& y, const Tensor& g) {
    return kernels::dot(y, g);  // throws on length mismatch
}

double score_cosine(const Tensor& y, const Tensor& g) {
    const double yn = std::sqrt(kernels::dot(y, y));
    const double gn = std::sqrt(kernels::dot(g, g));
    if (yn == 0.0 || gn == 0.0) {
        throw WeightingError("cosine score degenerate: zero vector");
    }
    return kernels::dot(y, g) / (yn * gn);
}

double score_pearson(const Tensor& y, const Tensor& g) {
    const std::size_t n = y.numel();
    if (n != g.numel()) throw WeightingError("pearson score: length mismatch");
    const double ym = kernels::sum(y) / static_cast<double>(n);
    const double gm = kernels::sum(g) / static_cast<double>(n);
    double num = 0.0, yv = 0.0, gv = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dy = y[i] - ym;
        const double dg = g[i] - gm;
        num += dy * dg;
        yv += dy * dy;
        gv += dg * dg;
    }
    if (yv == 0.0 || gv == 0.0) {
        throw WeightingError("pearson score degenerate: zero variance");
    }
    return num / std::sqrt(yv * gv);
}

Tensor softmax_weights(const Tensor& scores) {
    if (!scores.all_finite()) {
        throw WeightingError("softmax over non-finite scores");
    }
    const std::size_t m = scores.numel();
    if (m == 0) throw WeightingError("softmax over empty score vector");

    double max = scores[0];
    for (std::size_t i = 1; i < m; ++i) max = std::max(max, scores[i]);

    Tensor out({m});
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        out[i] = std::exp(scores[i] - max);
        total += out[i];
    }
    for (std::size_t i = 0; i < m; ++i) out[i] /= total;
    return out;
}

AttentionWeights compute_method_weights(WeightMethod method, const Tensor& f,
                                        const Tensor& y, double lambda) {
    if (method == WeightMethod::LinearRegression) {
        return solve_weights_regression(f, y, lambda).first;
    }
    check_batch(f, y);
    const std::size_t n = f.rows(), m = f.cols();

    Tensor col({n});
    Tensor scores({m});
    for (std::size_t c = 0; c < m; ++c) {
        for (std::size_t r = 0; r < n; ++r) col[r] = f.at(r, c);
        switch (method) {
            case WeightMethod::DotSoftmax:
                scores[c] = score_dot(y, col);
                break;
            case WeightMethod::Cosine:
                scores[c] = score_cosine(y, col);
                break;
            case WeightMethod::Pearson:
            case WeightMethod::PearsonSoftmax:
                scores[c] = score_pearson(y, col);
                break;
            case WeightMethod::LinearRegression:
                break;  // handled above
        }
    }

    AttentionWeights weights;
    weights.method = method;
    if (method == WeightMethod::DotSoftmax || method == WeightMethod::PearsonSoftmax) {
        weights.w = softmax_weights(scores);
    } else {
        weights.w = std::move(scores);
    }
    return weights;
}

Tensor predict(const Tensor& f, const AttentionWeights& weights) {
    if (weights.w.numel() != f.cols()) {
        throw WeightingError("predict: weight length " +
                             std::to_string(weights.w.numel()) + " vs " +
                             std::to_string(f.cols()) + " columns");
    }
    Tensor out;
    kernels::matvec(f, weights.w, out);
    return out;
}

}  // namespace afex

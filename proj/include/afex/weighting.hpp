#pragma once

#include <stdexcept>
#include <string>
#include <utility>

#include "afex/autodiff.hpp"
#include "afex/basis.hpp"
#include "afex/tensor.hpp"

namespace afex {

struct WeightingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// How the column weights of the feature matrix are obtained. The
/// regression method is the production path; the scorers exist for the
/// comparison harness.
enum class WeightMethod {
    LinearRegression,
    DotSoftmax,
    Cosine,
    Pearson,
    PearsonSoftmax,
};

const char* weight_method_name(WeightMethod method);
WeightMethod weight_method_by_name(const std::string& name);

struct RankReport {
    enum class Path { Qr, Ridge };
    std::size_t estimated_rank = 0;
    double threshold = 0.0;  // absolute |R_ii| cutoff that was applied
    Path path = Path::Qr;
};

struct AttentionWeights {
    Tensor w;
    WeightMethod method = WeightMethod::LinearRegression;
    double lambda = 0.0;  // ridge parameter actually used (0 on the QR path)
};

/// Rank-driven least squares: if the estimated rank equals the column count
/// the weights solve min ||F w - y||^2 by QR, otherwise the regularized
/// system (F^T F + lambda I) w = F^T y is solved.
std::pair<AttentionWeights, RankReport> solve_weights_regression(const Tensor& f,
                                                                 const Tensor& y,
                                                                 double lambda = 0.1);

/// FeatureMatrix front end; the regression solve expects the bias column to
/// be present already.
std::pair<AttentionWeights, RankReport> solve_weights_regression(const FeatureMatrix& f,
                                                                 const Tensor& y,
                                                                 double lambda = 0.1);

/// Graph-side variant for training: decides the path from F's current value,
/// then emits a differentiable solve node.
std::pair<ad::NodePtr, RankReport> solve_weights_node(const ad::NodePtr& f,
                                                      const ad::NodePtr& y,
                                                      double lambda = 0.1);

double score_dot(const Tensor& y, const Tensor& g);
double score_cosine(const Tensor& y, const Tensor& g);   // degenerate on zero vectors
double score_pearson(const Tensor& y, const Tensor& g);  // degenerate on constants

/// Stable softmax (max subtraction); positive entries summing to one.
Tensor softmax_weights(const Tensor& scores);

/// Column weights for any method. Scorer methods weigh each column by its
/// score against y (softmax-normalized for the softmax family); they are
/// plain per-batch numbers, not differentiable solves.
AttentionWeights compute_method_weights(WeightMethod method, const Tensor& f,
                                        const Tensor& y, double lambda = 0.1);

/// F * w.
Tensor predict(const Tensor& f, const AttentionWeights& weights);

}  // namespace afex

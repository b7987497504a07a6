#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "afex/basis.hpp"
#include "afex/oracle.hpp"
#include "afex/tensor.hpp"
#include "afex/trainer.hpp"
#include "afex/weighting.hpp"

namespace afex {

struct ExplainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Sampling region around the explained point: either explicit per-feature
/// half-widths, or a fraction of each feature's known range (a fraction of
/// 0.1 spans one tenth of the range, centered on the point).
struct Neighborhood {
    enum class Kind { Box, FractionOfRange };
    Kind kind = Kind::Box;
    std::vector<double> half_widths;  // Box: one entry per feature
    double fraction = 0.1;            // FractionOfRange
    std::vector<double> feature_min;
    std::vector<double> feature_max;

    static Neighborhood box(std::vector<double> half_widths);
    static Neighborhood uniform_box(std::size_t d, double half_width);
    static Neighborhood fraction_of_range(double fraction, std::vector<double> feature_min,
                                          std::vector<double> feature_max);

    /// Per-coordinate half-widths, whichever way they were specified.
    std::vector<double> resolve(std::size_t d) const;
};

struct ExplainRequest {
    std::vector<double> center;
    Neighborhood neighborhood;
    std::size_t sample_count = 1000;
    std::size_t grid_resolution = 101;
    std::size_t heatmap_resolution = 51;
    bool all_pairs = true;  // when false, only the listed pairs are rendered
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    std::uint64_t seed = 0;

    /// width is the assembled feature-matrix width the request must cover.
    void validate(std::size_t d, std::size_t width, bool pairwise_trained) const;
};

struct ShapeCurve {
    std::size_t feature = 0;
    std::vector<double> grid;          // strictly increasing feature values
    std::vector<double> contribution;  // weighted sum of the feature's basis shapes
    double importance = 0.0;           // max - min of contribution over the grid
};

/// Interaction surface for a feature pair on a grid product. raw holds the
/// cross terms only; adjusted adds both marginal curves on top, which is the
/// view that actually tracks the underlying dependence.
struct PairHeatmap {
    std::size_t i = 0, s = 0;
    std::vector<double> grid_i;
    std::vector<double> grid_s;
    Tensor raw;       // grid_i.size() x grid_s.size()
    Tensor adjusted;
};

struct Explanation {
    ExplainRequest request;
    AttentionWeights weights;
    RankReport rank;
    std::vector<ColumnDesc> columns;  // layout the weights refer to
    std::vector<ShapeCurve> curves;   // one per feature
    std::vector<PairHeatmap> heatmaps;
    double residual_mse = 0.0;        // local fit quality on the sampled points
};

/// Weighted shape curve of one feature on an explicit grid (raw feature
/// units; the standardizer, when present, is applied before the subnets).
ShapeCurve shape_curve(const BasisBank& bank, const std::vector<ColumnDesc>& columns,
                       const Tensor& w, std::size_t feature,
                       const std::vector<double>& grid,
                       const Standardizer* standardizer = nullptr);

/// Interaction heatmap of the pair (i, s), i < s. Requires pair columns in
/// the layout; throws ExplainError otherwise.
PairHeatmap pair_heatmap(const BasisBank& bank, const std::vector<ColumnDesc>& columns,
                         const Tensor& w, std::size_t i, std::size_t s,
                         const std::vector<double>& grid_i,
                         const std::vector<double>& grid_s,
                         const Standardizer* standardizer = nullptr);

/// Full local explanation: sample the neighborhood, query the oracle, solve
/// the attention weights with the frozen bank, and materialize curves,
/// heatmaps and the residual. Never mutates the model.
Explanation explain_point(const TrainedModel& model, const Oracle& oracle,
                          const ExplainRequest& request);

/// Features ordered by descending curve importance; ties break toward the
/// lower feature index.
std::vector<std::pair<std::size_t, double>> rank_features(const Explanation& explanation);

}  // namespace afex

#include "afex/explain.hpp"

#include <algorithm>
#include <cmath>

#include "afex/rng.hpp"

namespace afex {

namespace {

/// Evenly spaced, inclusive of both ends.
std::vector<double> linspace(double lo, double hi, std::size_t count) {
    std::vector<double> grid(count);
    const double span = hi - lo;
    for (std::size_t t = 0; t < count; ++t) {
        grid[t] = lo + span * static_cast<double>(t) / static_cast<double>(count - 1);
    }
    return grid;
}

/// One subnet evaluated on a scalar grid, standardized if needed; returns
/// the grid.size() response values.
Tensor subnet_on_grid(const Subnet& subnet, std::size_t feature,
                      const std::vector<double>& grid, const Standardizer* standardizer) {
    Tensor col({grid.size(), 1});
    for (std::size_t t = 0; t < grid.size(); ++t) {
        col[t] = standardizer ? standardizer->apply_one(feature, grid[t]) : grid[t];
    }
    return subnet_forward(subnet, col);
}

/// The k weights attached to one feature's single columns, in basis order.
std::vector<double> single_weights(const std::vector<ColumnDesc>& columns, const Tensor& w,
                                   std::size_t feature, std::size_t k) {
    std::vector<double> out(k, 0.0);
    std::vector<bool> seen(k, false);
    for (std::size_t c = 0; c < columns.size(); ++c) {
        const ColumnDesc& desc = columns[c];
        if (desc.kind == ColumnDesc::Kind::Single && desc.i == feature) {
            if (desc.j >= k || seen[desc.j]) {
                throw ExplainError("column layout is not in canonical form");
            }
            out[desc.j] = w[c];
            seen[desc.j] = true;
        }
    }
    for (bool s : seen) {
        if (!s) {
            throw ExplainError("missing single column for feature " +
                               std::to_string(feature));
        }
    }
    return out;
}

}  // namespace

Neighborhood Neighborhood::box(std::vector<double> half_widths) {
    Neighborhood n;
    n.kind = Kind::Box;
    n.half_widths = std::move(half_widths);
    return n;
}

Neighborhood Neighborhood::uniform_box(std::size_t d, double half_width) {
    return box(std::vector<double>(d, half_width));
}

Neighborhood Neighborhood::fraction_of_range(double fraction,
                                             std::vector<double> feature_min,
                                             std::vector<double> feature_max) {
    Neighborhood n;
    n.kind = Kind::FractionOfRange;
    n.fraction = fraction;
    n.feature_min = std::move(feature_min);
    n.feature_max = std::move(feature_max);
    return n;
}

std::vector<double> Neighborhood::resolve(std::size_t d) const {
    if (kind == Kind::Box) {
        if (half_widths.size() != d) {
            throw ExplainError("neighborhood lists " + std::to_string(half_widths.size()) +
                               " half-widths for " + std::to_string(d) + " features");
        }
        return half_widths;
    }
    if (feature_min.size() != d || feature_max.size() != d) {
        throw ExplainError("neighborhood range needs min and max per feature");
    }
    if (fraction <= 0.0) throw ExplainError("neighborhood fraction must be positive");
    std::vector<double> out(d);
    for (std::size_t j = 0; j < d; ++j) {
        const double range = feature_max[j] - feature_min[j];
        if (range <= 0.0) {
            throw ExplainError("feature " + std::to_string(j) + " has an empty range");
        }
        out[j] = 0.5 * fraction * range;
    }
    return out;
}

void ExplainRequest::validate(std::size_t d, std::size_t width,
                              bool pairwise_trained) const {
    if (center.size() != d) {
        throw ExplainError("center has " + std::to_string(center.size()) +
                           " coordinates, the model expects " + std::to_string(d));
    }
    if (grid_resolution < 2 || heatmap_resolution < 2) {
        throw ExplainError("grid resolutions must be at least 2");
    }
    if (sample_count <= width) {
        throw ExplainError("sample count " + std::to_string(sample_count) +
                           " must exceed the feature width " + std::to_string(width));
    }
    const std::vector<double> hw = neighborhood.resolve(d);
    for (std::size_t j = 0; j < d; ++j) {
        if (!(hw[j] > 0.0)) {
            throw ExplainError("half-width for feature " + std::to_string(j) +
                               " must be positive");
        }
    }
    if (!pairs.empty() && !pairwise_trained) {
        throw ExplainError("pair heatmaps requested but the model was trained "
                           "without pairwise interactions");
    }
    for (const auto& [i, s] : pairs) {
        if (!(i < s && s < d)) {
            throw ExplainError("invalid pair (" + std::to_string(i) + ", " +
                               std::to_string(s) + ")");
        }
    }
}

ShapeCurve shape_curve(const BasisBank& bank, const std::vector<ColumnDesc>& columns,
                       const Tensor& w, std::size_t feature,
                       const std::vector<double>& grid,
                       const Standardizer* standardizer) {
    if (feature >= bank.d) {
        throw ExplainError("feature " + std::to_string(feature) + " out of range");
    }
    if (columns.size() != w.numel()) {
        throw ExplainError("weight vector does not match the column layout");
    }
    for (std::size_t t = 1; t < grid.size(); ++t) {
        if (!(grid[t - 1] < grid[t])) {
            throw ExplainError("curve grid must be strictly increasing");
        }
    }

    const std::vector<double> wf = single_weights(columns, w, feature, bank.k);
    ShapeCurve curve;
    curve.feature = feature;
    curve.grid = grid;
    curve.contribution.assign(grid.size(), 0.0);
    for (std::size_t j = 0; j < bank.k; ++j) {
        const Tensor g = subnet_on_grid(bank.at(feature, j), feature, grid, standardizer);
        for (std::size_t t = 0; t < grid.size(); ++t) {
            curve.contribution[t] += wf[j] * g[t];
        }
    }
    if (!grid.empty()) {
        const auto [lo, hi] =
            std::minmax_element(curve.contribution.begin(), curve.contribution.end());
        curve.importance = *hi - *lo;
    }
    return curve;
}

PairHeatmap pair_heatmap(const BasisBank& bank, const std::vector<ColumnDesc>& columns,
                         const Tensor& w, std::size_t i, std::size_t s,
                         const std::vector<double>& grid_i,
                         const std::vector<double>& grid_s,
                         const Standardizer* standardizer) {
    if (!(i < s && s < bank.d)) {
        throw ExplainError("pair (" + std::to_string(i) + ", " + std::to_string(s) +
                           ") is not an ordered feature pair");
    }
    if (columns.size() != w.numel()) {
        throw ExplainError("weight vector does not match the column layout");
    }

    const std::size_t k = bank.k;
    // Pair weights indexed [j][l]; missing block means the bank was solved
    // without interactions.
    std::vector<std::vector<double>> wp(k, std::vector<double>(k, 0.0));
    bool found = false;
    for (std::size_t c = 0; c < columns.size(); ++c) {
        const ColumnDesc& desc = columns[c];
        if (desc.kind == ColumnDesc::Kind::Pair && desc.i == i && desc.s == s) {
            wp[desc.j][desc.l] = w[c];
            found = true;
        }
    }
    if (!found) {
        throw ExplainError("no pairwise columns for (" + std::to_string(i) + ", " +
                           std::to_string(s) + "); train with pairwise interactions");
    }

    // Per-subnet responses on both grids, then the two marginal curves.
    std::vector<Tensor> gi, gs;
    for (std::size_t j = 0; j < k; ++j) {
        gi.push_back(subnet_on_grid(bank.at(i, j), i, grid_i, standardizer));
        gs.push_back(subnet_on_grid(bank.at(s, j), s, grid_s, standardizer));
    }
    const std::vector<double> wi = single_weights(columns, w, i, k);
    const std::vector<double> ws = single_weights(columns, w, s, k);

    PairHeatmap map;
    map.i = i;
    map.s = s;
    map.grid_i = grid_i;
    map.grid_s = grid_s;
    map.raw = Tensor::matrix(grid_i.size(), grid_s.size());
    map.adjusted = Tensor::matrix(grid_i.size(), grid_s.size());
    for (std::size_t p = 0; p < grid_i.size(); ++p) {
        double marginal_i = 0.0;
        for (std::size_t j = 0; j < k; ++j) marginal_i += wi[j] * gi[j][p];
        for (std::size_t q = 0; q < grid_s.size(); ++q) {
            double cross = 0.0;
            for (std::size_t j = 0; j < k; ++j) {
                for (std::size_t l = 0; l < k; ++l) {
                    cross += wp[j][l] * gi[j][p] * gs[l][q];
                }
            }
            double marginal_s = 0.0;
            for (std::size_t l = 0; l < k; ++l) marginal_s += ws[l] * gs[l][q];
            map.raw.at(p, q) = cross;
            map.adjusted.at(p, q) = marginal_i + marginal_s + cross;
        }
    }
    return map;
}

Explanation explain_point(const TrainedModel& model, const Oracle& oracle,
                          const ExplainRequest& request) {
    const BasisBank& bank = model.bank;
    const std::size_t d = bank.d;
    const std::size_t k = bank.k;
    if (oracle.dim() != d) {
        throw ExplainError("oracle dimension " + std::to_string(oracle.dim()) +
                           " does not match the model's " + std::to_string(d));
    }
    const bool pairwise = model.config.pairwise_enabled;
    std::size_t width = k * d + 1;  // the explanation solve always carries a bias
    if (pairwise) width += k * k * d * (d - 1) / 2;
    request.validate(d, width, pairwise);
    const std::vector<double> hw = request.neighborhood.resolve(d);

    // Sample the neighborhood and query the black box on raw coordinates.
    Rng rng(request.seed);
    const std::size_t n = request.sample_count;
    Tensor x = Tensor::matrix(n, d);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t j = 0; j < d; ++j) {
            x.at(r, j) = request.center[j] + rng.uniform(-hw[j], hw[j]);
        }
    }
    const Tensor y = oracle.eval(x);

    const Standardizer* standardizer =
        model.standardizer ? &*model.standardizer : nullptr;
    const Tensor xs = standardizer ? standardizer->apply(x) : x;

    FeatureMatrix fstar = build_feature_matrix(bank, xs);
    if (pairwise) fstar = append_pair_block(fstar, build_pair_columns(fstar));
    fstar = append_bias(fstar);

    Explanation out;
    out.request = request;
    out.columns = fstar.columns;
    auto [weights, rank] =
        solve_weights_regression(fstar, y, model.config.lambda_ridge);
    out.weights = std::move(weights);
    out.rank = rank;

    const Tensor fitted = predict(fstar.values, out.weights);
    double residual = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        const double dr = fitted[r] - y[r];
        residual += dr * dr;
    }
    out.residual_mse = residual / static_cast<double>(n);

    for (std::size_t j = 0; j < d; ++j) {
        const auto grid = linspace(request.center[j] - hw[j], request.center[j] + hw[j],
                                   request.grid_resolution);
        out.curves.push_back(
            shape_curve(bank, out.columns, out.weights.w, j, grid, standardizer));
    }

    if (pairwise) {
        std::vector<std::pair<std::size_t, std::size_t>> wanted = request.pairs;
        if (request.all_pairs && wanted.empty()) {
            for (std::size_t i = 0; i < d; ++i) {
                for (std::size_t s = i + 1; s < d; ++s) wanted.emplace_back(i, s);
            }
        }
        for (const auto& [i, s] : wanted) {
            const auto gi = linspace(request.center[i] - hw[i], request.center[i] + hw[i],
                                     request.heatmap_resolution);
            const auto gs = linspace(request.center[s] - hw[s], request.center[s] + hw[s],
                                     request.heatmap_resolution);
            out.heatmaps.push_back(
                pair_heatmap(bank, out.columns, out.weights.w, i, s, gi, gs, standardizer));
        }
    }
    return out;
}

std::vector<std::pair<std::size_t, double>> rank_features(const Explanation& explanation) {
    std::vector<std::pair<std::size_t, double>> ranked;
    ranked.reserve(explanation.curves.size());
    for (const ShapeCurve& curve : explanation.curves) {
        ranked.emplace_back(curve.feature, curve.importance);
    }
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    return ranked;
}

}  // namespace afex

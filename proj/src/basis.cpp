#include "afex/basis.hpp"

#include <cmath>

#include "afex/kernels.hpp"

namespace afex {

namespace {

double glorot_limit(std::size_t fan_in, std::size_t fan_out) {
    return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

void fill_uniform(Tensor& t, Rng& rng, double limit) {
    for (double& v : t.data()) v = rng.uniform(-limit, limit);
}

Tensor as_column(const Tensor& x) {
    if (x.rank() == 2 && x.cols() == 1) return x;
    if (x.rank() == 1) {
        return Tensor({x.numel(), 1}, std::vector<double>(x.ptr(), x.ptr() + x.numel()));
    }
    throw BasisError("subnet_forward: expected a single column, got " + x.shape_string());
}

}  // namespace

void Subnet::init(Rng& rng) {
    w1 = Tensor({1, kHiddenWidth});
    b1 = Tensor({kHiddenWidth});
    w2 = Tensor({kHiddenWidth, kHiddenWidth});
    b2 = Tensor({kHiddenWidth});
    w3 = Tensor({kHiddenWidth, 1});
    b3 = Tensor({1});
    alpha = Tensor({1}, 0.9);

    fill_uniform(w1, rng, glorot_limit(1, kHiddenWidth));
    fill_uniform(w2, rng, glorot_limit(kHiddenWidth, kHiddenWidth));
    // w3, b3 stay zero: h == 0 initially, so g starts as the plain
    // alpha * x line.
}

std::vector<Tensor*> Subnet::parameters() {
    return {&w1, &b1, &w2, &b2, &w3, &b3, &alpha};
}

std::vector<const Tensor*> Subnet::parameters() const {
    return {&w1, &b1, &w2, &b2, &w3, &b3, &alpha};
}

Tensor subnet_forward(const Subnet& subnet, const Tensor& x) {
    const Tensor col = as_column(x);
    if (!col.all_finite()) throw BasisError("subnet_forward: non-finite input");
    const std::size_t n = col.rows();

    Tensor h, pre;
    kernels::gemm(col, subnet.w1, pre);
    kernels::add_rowvec(pre, subnet.b1, h);
    kernels::map_tanh(h, pre);
    Tensor h2;
    kernels::gemm(pre, subnet.w2, h2);
    kernels::add_rowvec(h2, subnet.b2, pre);
    kernels::map_tanh(pre, h2);
    Tensor out;
    kernels::gemm(h2, subnet.w3, out);
    kernels::scale_shift(out, 1.0, subnet.b3[0], pre);

    // g = (1 - alpha) h + alpha x, with the same kernel calls the graph
    // builder uses so both paths agree bit for bit.
    const double a = subnet.alpha[0];
    const double one_minus = -1.0 * a + 1.0;
    Tensor th, tx, gcol;
    kernels::scale_shift(pre, one_minus, 0.0, th);
    kernels::scale_shift(col, a, 0.0, tx);
    kernels::add(th, tx, gcol);

    Tensor g({n});
    for (std::size_t i = 0; i < n; ++i) g[i] = gcol[i];
    return g;
}

BasisBank BasisBank::initialize(std::size_t d, std::size_t k, Rng& rng) {
    if (d == 0 || k == 0) throw BasisError("BasisBank: d and k must be positive");
    BasisBank bank;
    bank.d = d;
    bank.k = k;
    bank.subnets.resize(d * k);
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            Subnet& s = bank.at(i, j);
            s.feature = i;
            s.basis = j;
            s.init(rng);
        }
    }
    return bank;
}

std::vector<Tensor*> BasisBank::parameters() {
    std::vector<Tensor*> out;
    out.reserve(subnets.size() * 7);
    for (Subnet& s : subnets) {
        for (Tensor* p : s.parameters()) out.push_back(p);
    }
    return out;
}

std::vector<const Tensor*> BasisBank::parameters() const {
    std::vector<const Tensor*> out;
    out.reserve(subnets.size() * 7);
    for (const Subnet& s : subnets) {
        for (const Tensor* p : s.parameters()) out.push_back(p);
    }
    return out;
}

bool FeatureMatrix::has_pairs() const {
    for (const ColumnDesc& c : columns) {
        if (c.kind == ColumnDesc::Kind::Pair) return true;
    }
    return false;
}

bool FeatureMatrix::has_bias() const {
    for (const ColumnDesc& c : columns) {
        if (c.kind == ColumnDesc::Kind::Bias) return true;
    }
    return false;
}

std::vector<ColumnDesc> single_descriptors(std::size_t d, std::size_t k) {
    std::vector<ColumnDesc> out;
    out.reserve(d * k);
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            out.push_back({ColumnDesc::Kind::Single, i, j, 0, 0});
        }
    }
    return out;
}

std::vector<ColumnDesc> pair_descriptors(std::size_t d, std::size_t k) {
    std::vector<ColumnDesc> out;
    if (d >= 2) out.reserve(k * k * d * (d - 1) / 2);
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t s = i + 1; s < d; ++s) {
            for (std::size_t j = 0; j < k; ++j) {
                for (std::size_t l = 0; l < k; ++l) {
                    out.push_back({ColumnDesc::Kind::Pair, i, j, s, l});
                }
            }
        }
    }
    return out;
}

FeatureMatrix build_feature_matrix(const BasisBank& bank, const Tensor& x) {
    if (x.rank() != 2 || x.cols() != bank.d) {
        throw BasisError("build_feature_matrix: X must be n x " + std::to_string(bank.d) +
                         ", got " + x.shape_string());
    }
    const std::size_t n = x.rows(), d = bank.d, k = bank.k;

    FeatureMatrix f;
    f.columns = single_descriptors(d, k);
    f.values = Tensor::matrix(n, d * k);

    Tensor col({n});
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t r = 0; r < n; ++r) col[r] = x.at(r, i);
        for (std::size_t j = 0; j < k; ++j) {
            const Tensor g = subnet_forward(bank.at(i, j), col);
            for (std::size_t r = 0; r < n; ++r) f.values.at(r, i * k + j) = g[r];
        }
    }
    return f;
}

namespace {

void require_base_form(const FeatureMatrix& f, const char* who) {
    if (f.columns.empty()) {
        throw BasisError(std::string(who) + ": empty feature matrix");
    }
    if (f.has_pairs() || f.has_bias()) {
        throw BasisError(std::string(who) + ": feature matrix already extended");
    }
    std::size_t k = 0;
    for (const ColumnDesc& c : f.columns) {
        if (c.i == 0) k = std::max(k, c.j + 1);
    }
    if (f.columns != single_descriptors(f.columns.back().i + 1, k)) {
        throw BasisError(std::string(who) + ": columns are not in base form");
    }
}

}  // namespace

FeatureMatrix build_pair_columns(const FeatureMatrix& base) {
    require_base_form(base, "build_pair_columns");
    const std::size_t d = base.columns.back().i + 1;
    const std::size_t k = base.columns.size() / d;

    FeatureMatrix g;
    g.columns = pair_descriptors(d, k);
    std::vector<std::pair<std::size_t, std::size_t>> index_pairs;
    index_pairs.reserve(g.columns.size());
    for (const ColumnDesc& c : g.columns) {
        index_pairs.emplace_back(c.i * k + c.j, c.s * k + c.l);
    }
    kernels::column_products(base.values, index_pairs, g.values);
    return g;
}

FeatureMatrix append_pair_block(const FeatureMatrix& base, const FeatureMatrix& pairs) {
    require_base_form(base, "append_pair_block");
    for (const ColumnDesc& c : pairs.columns) {
        if (c.kind != ColumnDesc::Kind::Pair) {
            throw BasisError("append_pair_block: second argument is not a pair block");
        }
    }
    if (pairs.rows() != base.rows()) {
        throw BasisError("append_pair_block: row count mismatch");
    }

    const std::size_t n = base.rows(), mb = base.width(), mp = pairs.width();
    FeatureMatrix out;
    out.columns = base.columns;
    out.columns.insert(out.columns.end(), pairs.columns.begin(), pairs.columns.end());
    out.values = Tensor::matrix(n, mb + mp);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < mb; ++c) out.values.at(r, c) = base.values.at(r, c);
        for (std::size_t c = 0; c < mp; ++c) {
            out.values.at(r, mb + c) = pairs.values.at(r, c);
        }
    }
    return out;
}

FeatureMatrix append_bias(const FeatureMatrix& f) {
    if (f.has_bias()) throw BasisError("append_bias: bias column already present");
    const std::size_t n = f.rows(), m = f.width();
    FeatureMatrix out;
    out.columns = f.columns;
    out.columns.push_back({ColumnDesc::Kind::Bias, 0, 0, 0, 0});
    out.values = Tensor::matrix(n, m + 1);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < m; ++c) out.values.at(r, c) = f.values.at(r, c);
        out.values.at(r, m) = 1.0;
    }
    return out;
}

BankGraph build_bank_graph(const BasisBank& bank, const Tensor& x) {
    if (x.rank() != 2 || x.cols() != bank.d) {
        throw BasisError("build_bank_graph: X must be n x " + std::to_string(bank.d) +
                         ", got " + x.shape_string());
    }
    const std::size_t n = x.rows(), d = bank.d, k = bank.k;

    BankGraph graph;
    graph.subnets.reserve(d * k);
    graph.flat_params.reserve(d * k * 7);

    for (std::size_t i = 0; i < d; ++i) {
        Tensor col = Tensor::matrix(n, 1);
        for (std::size_t r = 0; r < n; ++r) col.at(r, 0) = x.at(r, i);
        ad::NodePtr x_col = ad::input(col, "x[" + std::to_string(i) + "]");

        for (std::size_t j = 0; j < k; ++j) {
            const Subnet& s = bank.at(i, j);
            const std::string tag =
                "(" + std::to_string(i) + "," + std::to_string(j) + ")";
            SubnetNodes nodes;
            nodes.w1 = ad::input(s.w1, "w1" + tag);
            nodes.b1 = ad::input(s.b1, "b1" + tag);
            nodes.w2 = ad::input(s.w2, "w2" + tag);
            nodes.b2 = ad::input(s.b2, "b2" + tag);
            nodes.w3 = ad::input(s.w3, "w3" + tag);
            nodes.b3 = ad::input(s.b3, "b3" + tag);
            nodes.alpha = ad::input(s.alpha, "alpha" + tag);

            auto h1 = ad::tanh(ad::add(ad::matmul(x_col, nodes.w1), nodes.b1));
            auto h2 = ad::tanh(ad::add(ad::matmul(h1, nodes.w2), nodes.b2));
            auto h = ad::add(ad::matmul(h2, nodes.w3), nodes.b3);
            nodes.g = ad::add(ad::mul(ad::affine(nodes.alpha, -1.0, 1.0), h),
                              ad::mul(nodes.alpha, x_col));

            graph.flat_params.push_back(nodes.w1);
            graph.flat_params.push_back(nodes.b1);
            graph.flat_params.push_back(nodes.w2);
            graph.flat_params.push_back(nodes.b2);
            graph.flat_params.push_back(nodes.w3);
            graph.flat_params.push_back(nodes.b3);
            graph.flat_params.push_back(nodes.alpha);
            graph.subnets.push_back(std::move(nodes));
        }
    }
    return graph;
}

ad::NodePtr feature_matrix_node(const BankGraph& graph, std::size_t d, std::size_t k,
                                bool with_pairs, bool with_bias, std::size_t n) {
    if (graph.subnets.size() != d * k) {
        throw BasisError("feature_matrix_node: graph does not match d*k subnets");
    }
    std::vector<ad::NodePtr> cols;
    cols.reserve(d * k);
    for (const SubnetNodes& s : graph.subnets) cols.push_back(s.g);

    if (with_pairs) {
        for (const ColumnDesc& c : pair_descriptors(d, k)) {
            cols.push_back(
                ad::mul(graph.subnets[c.i * k + c.j].g, graph.subnets[c.s * k + c.l].g));
        }
    }
    if (with_bias) {
        cols.push_back(ad::input(Tensor::matrix(n, 1, 1.0), "bias"));
    }
    return ad::concat_cols(std::move(cols), "F");
}

}  // namespace afex

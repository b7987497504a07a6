#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "afex/autodiff.hpp"
#include "afex/rng.hpp"
#include "afex/tensor.hpp"

namespace afex {

struct BasisError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Checkpoints record this tag so a saved model is only ever read back with
/// the column convention it was written under.
inline constexpr const char* kColumnOrderTag = "singles-feature-major.pairs-lex.bias-last.v1";

inline constexpr std::size_t kHiddenWidth = 16;

/// One-feature subnetwork (1 -> 16 -> 16 -> 1, tanh hidden layers, linear
/// output) plus the trainable shortcut mix alpha. The shape function it
/// produces is g(x) = (1 - alpha) h(x) + alpha x.
struct Subnet {
    std::size_t feature = 0;  // i
    std::size_t basis = 0;    // j

    Tensor w1, b1;  // [1,16], [16]
    Tensor w2, b2;  // [16,16], [16]
    Tensor w3, b3;  // [16,1], [1]
    Tensor alpha;   // [1], initialized to 0.9

    /// Hidden layers scaled-uniform (Glorot bounds), output layer zero so
    /// the initial shape function is exactly alpha * x.
    void init(Rng& rng);

    /// Fixed order: w1, b1, w2, b2, w3, b3, alpha. Checkpoints and the
    /// optimizer both rely on it.
    std::vector<Tensor*> parameters();
    std::vector<const Tensor*> parameters() const;
};

/// Numeric (graph-free) evaluation of one subnet on a feature column.
/// x is length n (or n x 1); the result is length n.
Tensor subnet_forward(const Subnet& subnet, const Tensor& x);

struct BasisBank {
    std::size_t d = 0;  // features
    std::size_t k = 0;  // basis functions per feature
    std::vector<Subnet> subnets;  // feature-major: subnet (i,j) at i*k + j

    static BasisBank initialize(std::size_t d, std::size_t k, Rng& rng);

    Subnet& at(std::size_t i, std::size_t j) { return subnets[i * k + j]; }
    const Subnet& at(std::size_t i, std::size_t j) const { return subnets[i * k + j]; }

    /// All parameters, subnets in feature-major order.
    std::vector<Tensor*> parameters();
    std::vector<const Tensor*> parameters() const;
};

struct ColumnDesc {
    enum class Kind { Single, Pair, Bias };
    Kind kind = Kind::Single;
    std::size_t i = 0, j = 0;  // Single and Pair: first column (i,j)
    std::size_t s = 0, l = 0;  // Pair only: second column (s,l), i < s

    bool operator==(const ColumnDesc&) const = default;
};

/// Feature matrix plus a descriptor per column saying what produced it.
struct FeatureMatrix {
    Tensor values;  // n x m
    std::vector<ColumnDesc> columns;

    std::size_t rows() const { return values.rows(); }
    std::size_t width() const { return columns.size(); }
    bool has_pairs() const;
    bool has_bias() const;
};

/// Descriptor enumerations; the canonical column orders.
std::vector<ColumnDesc> single_descriptors(std::size_t d, std::size_t k);
/// Pairs of distinct features only, (i,s) with i < s lexicographic outer,
/// (j,l) lexicographic inner; k^2 d(d-1)/2 entries.
std::vector<ColumnDesc> pair_descriptors(std::size_t d, std::size_t k);

/// F in base form: n x (k d), column (i,j) = subnet_forward(subnet_ij, X col i).
FeatureMatrix build_feature_matrix(const BasisBank& bank, const Tensor& x);

/// The pair-product block G for a base-form F. Columns of the same feature
/// are never multiplied together.
FeatureMatrix build_pair_columns(const FeatureMatrix& base);

/// [F | G] with descriptors; F must be base form, G a pair block.
FeatureMatrix append_pair_block(const FeatureMatrix& base, const FeatureMatrix& pairs);

/// Appends the all-ones bias column.
FeatureMatrix append_bias(const FeatureMatrix& f);

/// Graph-side construction. Parameter input nodes are exposed so a trainer
/// can map gradients back onto the bank's tensors.
struct SubnetNodes {
    ad::NodePtr w1, b1, w2, b2, w3, b3, alpha;
    ad::NodePtr g;  // the subnet's output column, n x 1
};

struct BankGraph {
    std::vector<SubnetNodes> subnets;      // feature-major
    std::vector<ad::NodePtr> flat_params;  // same order as BasisBank::parameters()
};

/// One shape-function column per subnet, built from fresh input nodes that
/// copy the bank's current parameter values.
BankGraph build_bank_graph(const BasisBank& bank, const Tensor& x);

/// Concatenation of the graph's columns into the full feature matrix node:
/// singles, then optionally pair products, then optionally the bias column.
ad::NodePtr feature_matrix_node(const BankGraph& graph, std::size_t d, std::size_t k,
                                bool with_pairs, bool with_bias, std::size_t n);

}  // namespace afex

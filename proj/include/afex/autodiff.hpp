#pragma once

#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "afex/tensor.hpp"

namespace afex::ad {

/// Reverse-mode engine over dense tensors, define-by-run: a graph is built
/// fresh for every batch, evaluated once with forward() and differentiated
/// once with backward().

enum class OpKind {
    Input,
    Add,
    Mul,
    MatMul,
    Tanh,
    Relu,
    Sum,
    Square,
    Transpose,
    Concat,
    RidgeSolve,
    Affine,
};

const char* op_name(OpKind kind);

class Node;
using NodePtr = std::shared_ptr<Node>;

class Node {
public:
    OpKind kind;
    std::string label;
    std::vector<NodePtr> parents;

    Tensor value;
    Tensor grad;
    bool evaluated = false;

    // Affine: value = scale * parent + shift (elementwise, constants).
    double scale = 1.0;
    double shift = 0.0;

    // RidgeSolve: solves (F^T F + lambda I) w = F^T y; lambda == 0 takes the
    // QR least-squares path and requires full column rank.
    double lambda = 0.0;
    Tensor solve_r;  // cached triangular factor with R^T R = F^T F + lambda I

    Node(OpKind k, std::string lbl, std::vector<NodePtr> ps)
        : kind(k), label(std::move(lbl)), parents(std::move(ps)) {}
};

NodePtr input(Tensor value, std::string label = "input");

/// Elementwise sum. Shapes must match, except that the second operand may be
/// a single element (scalar broadcast) or a row vector broadcast over the
/// rows of a matrix.
NodePtr add(NodePtr a, NodePtr b);

/// Elementwise product; either operand may be a single element.
NodePtr mul(NodePtr a, NodePtr b);

/// [n,k] x [k,m] -> [n,m], or [n,k] x [k] -> [n].
NodePtr matmul(NodePtr a, NodePtr b);

NodePtr tanh(NodePtr x);
NodePtr relu(NodePtr x);
NodePtr square(NodePtr x);

/// Full reduction to a single element.
NodePtr sum(NodePtr x);

NodePtr transpose(NodePtr x);

/// Column-wise concatenation of [n,c_i] matrices (a vector counts as one
/// column) into [n, sum c_i].
NodePtr concat_cols(std::vector<NodePtr> columns, std::string label = "concat");

/// w = argmin ||F w - y||^2 for lambda == 0 (F full column rank), otherwise
/// the solution of (F^T F + lambda I) w = F^T y. Differentiable with respect
/// to F and y by implicit differentiation of the normal-equation system.
NodePtr ridge_solve(NodePtr f, NodePtr y, double lambda);

/// Elementwise scale * x + shift with constant coefficients.
NodePtr affine(NodePtr x, double scale, double shift);

/// Evaluates all nodes the root depends on and returns the root's value.
/// Throws ShapeError on inconsistent operand shapes and NonFiniteError when
/// any node produces a NaN or infinity, naming the node.
const Tensor& forward(const NodePtr& root);

/// Accumulates d(root)/d(node) into every reachable node's grad, seeding the
/// root with ones. forward() must have run on this root first.
void backward(const NodePtr& root);

struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NonFiniteError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct StateError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace afex::ad

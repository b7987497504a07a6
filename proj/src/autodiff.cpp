#include "afex/autodiff.hpp"

#include <atomic>
#include <unordered_set>

#include "afex/kernels.hpp"
#include "afex/linalg.hpp"

namespace afex::ad {

namespace {

std::string next_label(const char* op) {
    static std::atomic<std::uint64_t> counter{0};
    return std::string(op) + "#" + std::to_string(counter.fetch_add(1));
}

/// Topological order with all parents before their consumers.
std::vector<Node*> topo_order(const NodePtr& root) {
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(root.get(), 0);
    seen.insert(root.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* parent = node->parents[next++].get();
            if (seen.insert(parent).second) stack.emplace_back(parent, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    return order;
}

[[noreturn]] void shape_fail(const Node& node) {
    std::string msg = "shape mismatch at node '" + node.label + "' (";
    for (std::size_t i = 0; i < node.parents.size(); ++i) {
        if (i) msg += ", ";
        msg += node.parents[i]->value.shape_string();
    }
    throw ShapeError(msg + ")");
}

bool row_broadcastable(const Tensor& a, const Tensor& b) {
    // b as a row vector applied to every row of matrix a.
    return a.rank() == 2 && b.numel() == a.shape()[1] &&
           (b.rank() == 1 || (b.rank() == 2 && b.shape()[0] == 1));
}

void accumulate(Tensor& grad, const Tensor& delta) {
    for (std::size_t i = 0; i < grad.numel(); ++i) grad[i] += delta[i];
}

void eval_node(Node& node) {
    switch (node.kind) {
        case OpKind::Input:
            break;
        case OpKind::Add: {
            const Tensor& a = node.parents[0]->value;
            const Tensor& b = node.parents[1]->value;
            if (a.same_shape(b)) {
                kernels::add(a, b, node.value);
            } else if (b.numel() == 1) {
                kernels::scale_shift(a, 1.0, b[0], node.value);
            } else if (row_broadcastable(a, b)) {
                kernels::add_rowvec(a, b, node.value);
            } else {
                shape_fail(node);
            }
            break;
        }
        case OpKind::Mul: {
            const Tensor& a = node.parents[0]->value;
            const Tensor& b = node.parents[1]->value;
            if (a.same_shape(b)) {
                kernels::mul(a, b, node.value);
            } else if (b.numel() == 1) {
                kernels::scale_shift(a, b[0], 0.0, node.value);
            } else if (a.numel() == 1) {
                kernels::scale_shift(b, a[0], 0.0, node.value);
            } else {
                shape_fail(node);
            }
            break;
        }
        case OpKind::MatMul: {
            const Tensor& a = node.parents[0]->value;
            const Tensor& b = node.parents[1]->value;
            if (a.rank() != 2 || a.shape()[1] != b.shape()[0]) shape_fail(node);
            if (b.rank() == 2) {
                kernels::gemm(a, b, node.value);
            } else if (b.rank() == 1) {
                kernels::matvec(a, b, node.value);
            } else {
                shape_fail(node);
            }
            break;
        }
        case OpKind::Tanh:
            kernels::map_tanh(node.parents[0]->value, node.value);
            break;
        case OpKind::Relu:
            kernels::map_relu(node.parents[0]->value, node.value);
            break;
        case OpKind::Square:
            kernels::map_square(node.parents[0]->value, node.value);
            break;
        case OpKind::Sum:
            node.value = Tensor::scalar(kernels::sum(node.parents[0]->value));
            break;
        case OpKind::Transpose: {
            const Tensor& a = node.parents[0]->value;
            if (a.rank() != 2) shape_fail(node);
            kernels::transpose(a, node.value);
            break;
        }
        case OpKind::Concat: {
            const std::size_t n = node.parents[0]->value.rows();
            std::size_t total = 0;
            for (const NodePtr& p : node.parents) {
                if (p->value.rows() != n || p->value.rank() > 2) shape_fail(node);
                total += p->value.cols();
            }
            node.value = Tensor::matrix(n, total);
            std::size_t offset = 0;
            for (const NodePtr& p : node.parents) {
                const std::size_t c = p->value.cols();
                for (std::size_t i = 0; i < n; ++i) {
                    for (std::size_t j = 0; j < c; ++j) {
                        node.value.at(i, offset + j) = p->value[i * c + j];
                    }
                }
                offset += c;
            }
            break;
        }
        case OpKind::RidgeSolve: {
            const Tensor& f = node.parents[0]->value;
            const Tensor& y = node.parents[1]->value;
            if (f.rank() != 2 || y.numel() != f.rows()) shape_fail(node);
            if (node.lambda == 0.0) {
                auto qr = linalg::qr_decompose(f);
                node.value = linalg::qr_solve(qr, y);  // throws RankDeficientError
                node.solve_r = qr.r_factor();
            } else {
                Tensor a;
                kernels::gemm_tn(f, f, a);
                for (std::size_t i = 0; i < a.rows(); ++i) a.at(i, i) += node.lambda;
                node.solve_r = linalg::cholesky_upper(a);
                Tensor fty;
                kernels::matvec_t(f, y, fty);
                node.value = linalg::solve_utu(node.solve_r, fty);
            }
            break;
        }
        case OpKind::Affine:
            kernels::scale_shift(node.parents[0]->value, node.scale, node.shift,
                                 node.value);
            break;
    }

    if (!node.value.all_finite()) {
        throw NonFiniteError("non-finite value produced at node '" + node.label + "'");
    }
}

void backprop_node(Node& node) {
    const Tensor& g = node.grad;
    switch (node.kind) {
        case OpKind::Input:
            break;
        case OpKind::Add: {
            Node& a = *node.parents[0];
            Node& b = *node.parents[1];
            accumulate(a.grad, g);
            if (a.value.same_shape(b.value)) {
                accumulate(b.grad, g);
            } else if (b.value.numel() == 1) {
                b.grad[0] += kernels::sum(g);
            } else {
                // Row broadcast: column sums.
                const std::size_t n = g.rows(), m = g.cols();
                for (std::size_t j = 0; j < m; ++j) {
                    double acc = 0.0;
                    for (std::size_t i = 0; i < n; ++i) acc += g[i * m + j];
                    b.grad[j] += acc;
                }
            }
            break;
        }
        case OpKind::Mul: {
            Node& a = *node.parents[0];
            Node& b = *node.parents[1];
            if (a.value.same_shape(b.value)) {
                for (std::size_t i = 0; i < g.numel(); ++i) {
                    a.grad[i] += g[i] * b.value[i];
                    b.grad[i] += g[i] * a.value[i];
                }
            } else if (b.value.numel() == 1) {
                double acc = 0.0;
                for (std::size_t i = 0; i < g.numel(); ++i) {
                    a.grad[i] += g[i] * b.value[0];
                    acc += g[i] * a.value[i];
                }
                b.grad[0] += acc;
            } else {  // a is the scalar
                double acc = 0.0;
                for (std::size_t i = 0; i < g.numel(); ++i) {
                    b.grad[i] += g[i] * a.value[0];
                    acc += g[i] * b.value[i];
                }
                a.grad[0] += acc;
            }
            break;
        }
        case OpKind::MatMul: {
            Node& a = *node.parents[0];
            Node& b = *node.parents[1];
            Tensor delta;
            if (b.value.rank() == 2) {
                kernels::gemm_nt(g, b.value, delta);  // dA = g B^T
                accumulate(a.grad, delta);
                kernels::gemm_tn(a.value, g, delta);  // dB = A^T g
                accumulate(b.grad, delta);
            } else {
                kernels::outer(g, b.value, delta);  // dA = g x^T
                accumulate(a.grad, delta);
                kernels::matvec_t(a.value, g, delta);  // dx = A^T g
                accumulate(b.grad, delta);
            }
            break;
        }
        case OpKind::Tanh: {
            Node& x = *node.parents[0];
            for (std::size_t i = 0; i < g.numel(); ++i) {
                const double t = node.value[i];
                x.grad[i] += g[i] * (1.0 - t * t);
            }
            break;
        }
        case OpKind::Relu: {
            Node& x = *node.parents[0];
            for (std::size_t i = 0; i < g.numel(); ++i) {
                if (x.value[i] > 0.0) x.grad[i] += g[i];
            }
            break;
        }
        case OpKind::Square: {
            Node& x = *node.parents[0];
            for (std::size_t i = 0; i < g.numel(); ++i) {
                x.grad[i] += 2.0 * x.value[i] * g[i];
            }
            break;
        }
        case OpKind::Sum: {
            Node& x = *node.parents[0];
            for (std::size_t i = 0; i < x.grad.numel(); ++i) x.grad[i] += g[0];
            break;
        }
        case OpKind::Transpose: {
            Node& x = *node.parents[0];
            Tensor delta;
            kernels::transpose(g, delta);
            accumulate(x.grad, delta);
            break;
        }
        case OpKind::Concat: {
            std::size_t offset = 0;
            const std::size_t n = node.value.rows(), total = node.value.cols();
            for (const NodePtr& p : node.parents) {
                const std::size_t c = p->value.cols();
                for (std::size_t i = 0; i < n; ++i) {
                    for (std::size_t j = 0; j < c; ++j) {
                        p->grad[i * c + j] += g[i * total + offset + j];
                    }
                }
                offset += c;
            }
            break;
        }
        case OpKind::RidgeSolve: {
            // Implicit differentiation of (F^T F + lambda I) w = F^T y:
            //   u      = (F^T F + lambda I)^{-1} g
            //   dL/dy  = F u
            //   dL/dF  = y u^T - F (u w^T + w u^T)
            Node& fn = *node.parents[0];
            Node& yn = *node.parents[1];
            const Tensor& f = fn.value;
            const Tensor& y = yn.value;
            const Tensor& w = node.value;
            const Tensor u = linalg::solve_utu(node.solve_r, g);

            Tensor fu;
            kernels::matvec(f, u, fu);
            accumulate(yn.grad, fu);

            const std::size_t m = w.numel();
            Tensor sym = Tensor::matrix(m, m);
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t j = 0; j < m; ++j) {
                    sym.at(i, j) = u[i] * w[j] + w[i] * u[j];
                }
            }
            Tensor fsym;
            kernels::gemm(f, sym, fsym);
            Tensor yu;
            kernels::outer(y, u, yu);
            for (std::size_t i = 0; i < fn.grad.numel(); ++i) {
                fn.grad[i] += yu[i] - fsym[i];
            }
            break;
        }
        case OpKind::Affine: {
            Node& x = *node.parents[0];
            for (std::size_t i = 0; i < g.numel(); ++i) x.grad[i] += node.scale * g[i];
            break;
        }
    }
}

}  // namespace

const char* op_name(OpKind kind) {
    switch (kind) {
        case OpKind::Input: return "input";
        case OpKind::Add: return "add";
        case OpKind::Mul: return "mul";
        case OpKind::MatMul: return "matmul";
        case OpKind::Tanh: return "tanh";
        case OpKind::Relu: return "relu";
        case OpKind::Sum: return "sum";
        case OpKind::Square: return "square";
        case OpKind::Transpose: return "transpose";
        case OpKind::Concat: return "concat";
        case OpKind::RidgeSolve: return "ridge_solve";
        case OpKind::Affine: return "affine";
    }
    return "?";
}

namespace {

NodePtr make(OpKind kind, std::vector<NodePtr> parents, std::string label = {}) {
    if (label.empty()) label = next_label(op_name(kind));
    return std::make_shared<Node>(kind, std::move(label), std::move(parents));
}

}  // namespace

NodePtr input(Tensor value, std::string label) {
    NodePtr node = make(OpKind::Input, {}, std::move(label));
    node->value = std::move(value);
    node->evaluated = true;
    return node;
}

NodePtr add(NodePtr a, NodePtr b) { return make(OpKind::Add, {std::move(a), std::move(b)}); }
NodePtr mul(NodePtr a, NodePtr b) { return make(OpKind::Mul, {std::move(a), std::move(b)}); }
NodePtr matmul(NodePtr a, NodePtr b) {
    return make(OpKind::MatMul, {std::move(a), std::move(b)});
}
NodePtr tanh(NodePtr x) { return make(OpKind::Tanh, {std::move(x)}); }
NodePtr relu(NodePtr x) { return make(OpKind::Relu, {std::move(x)}); }
NodePtr square(NodePtr x) { return make(OpKind::Square, {std::move(x)}); }
NodePtr sum(NodePtr x) { return make(OpKind::Sum, {std::move(x)}); }
NodePtr transpose(NodePtr x) { return make(OpKind::Transpose, {std::move(x)}); }

NodePtr concat_cols(std::vector<NodePtr> columns, std::string label) {
    if (columns.empty()) throw std::invalid_argument("concat_cols: no columns");
    return make(OpKind::Concat, std::move(columns), std::move(label));
}

NodePtr ridge_solve(NodePtr f, NodePtr y, double lambda) {
    if (lambda < 0.0) throw std::invalid_argument("ridge_solve: lambda must be >= 0");
    NodePtr node = make(OpKind::RidgeSolve, {std::move(f), std::move(y)});
    node->lambda = lambda;
    return node;
}

NodePtr affine(NodePtr x, double scale, double shift) {
    NodePtr node = make(OpKind::Affine, {std::move(x)});
    node->scale = scale;
    node->shift = shift;
    return node;
}

const Tensor& forward(const NodePtr& root) {
    for (Node* node : topo_order(root)) {
        if (node->evaluated) continue;
        if (node->kind == OpKind::Input) {
            throw StateError("forward: input node '" + node->label + "' has no value");
        }
        eval_node(*node);
        node->evaluated = true;
    }
    if (!root->value.all_finite()) {
        throw NonFiniteError("non-finite value at graph output '" + root->label + "'");
    }
    return root->value;
}

void backward(const NodePtr& root) {
    std::vector<Node*> order = topo_order(root);
    for (Node* node : order) {
        if (!node->evaluated) {
            throw StateError("backward called before forward (node '" + node->label +
                             "' not evaluated)");
        }
        node->grad = Tensor(node->value.shape());
    }
    for (double& v : root->grad.data()) v = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) backprop_node(**it);
}

}  // namespace afex::ad

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>

#include "afex/autodiff.hpp"
#include "afex/kernels.hpp"
#include "afex/linalg.hpp"
#include "afex/rng.hpp"
#include "afex/tensor.hpp"
#include "test_util.hpp"

using afex::Rng;
using afex::Tensor;
namespace ad = afex::ad;
namespace la = afex::linalg;
namespace k = afex::kernels;
using testutil::central_diff;
using testutil::dense_inverse;
using testutil::max_abs_diff;
using testutil::uniform_tensor;

namespace {

/// Checks every entry of `target` against a central difference of `eval`,
/// which must rebuild the computation from the raw tensors on each call.
void check_grad_entries(Tensor& target, const Tensor& grad,
                        const std::function<double()>& eval, double rtol = 1e-3,
                        double atol = 1e-6) {
    REQUIRE(grad.numel() == target.numel());
    for (std::size_t i = 0; i < target.numel(); ++i) {
        const double fd = central_diff(target[i], eval);
        const double got = grad[i];
        const double bound = atol + rtol * std::max(std::abs(fd), std::abs(got));
        INFO("entry ", i, ": analytic ", got, " vs fd ", fd);
        CHECK(std::abs(fd - got) <= bound);
    }
}

}  // namespace

TEST_CASE("square of a scalar: value and gradient") {
    auto x = ad::input(Tensor::scalar(3.0), "x");
    auto loss = ad::sum(ad::square(x));
    CHECK(ad::forward(loss)[0] == doctest::Approx(9.0));
    ad::backward(loss);
    CHECK(x->grad[0] == doctest::Approx(6.0));
}

TEST_CASE("tanh at zero is zero with unit slope") {
    auto x = ad::input(Tensor::scalar(0.0), "x");
    auto loss = ad::sum(ad::tanh(x));
    CHECK(ad::forward(loss)[0] == doctest::Approx(0.0));
    ad::backward(loss);
    CHECK(x->grad[0] == doctest::Approx(1.0));
}

TEST_CASE("matmul against the identity is a no-op") {
    Rng rng(31);
    Tensor eye = Tensor::matrix(3, 3);
    for (std::size_t i = 0; i < 3; ++i) eye.at(i, i) = 1.0;
    const Tensor b = uniform_tensor(rng, {3, 4});
    auto out = ad::matmul(ad::input(eye, "I"), ad::input(b, "B"));
    CHECK(max_abs_diff(ad::forward(out), b) == 0.0);
}

TEST_CASE("sum gradient is all ones") {
    Rng rng(32);
    auto x = ad::input(uniform_tensor(rng, {3, 5}), "x");
    auto loss = ad::sum(x);
    ad::forward(loss);
    ad::backward(loss);
    for (std::size_t i = 0; i < x->grad.numel(); ++i) CHECK(x->grad[i] == 1.0);
}

TEST_CASE("diamond graph accumulates gradients from both paths") {
    // loss = sum((x*x) * x) = sum(x^3), so d/dx = 3 x^2.
    auto x = ad::input(Tensor({4}, {0.5, -1.0, 2.0, 0.1}), "x");
    auto z = ad::mul(x, x);
    auto loss = ad::sum(ad::mul(z, x));
    ad::forward(loss);
    ad::backward(loss);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(x->grad[i] == doctest::Approx(3.0 * x->value[i] * x->value[i]));
    }
}

TEST_CASE("mlp-style chain gradients match finite differences") {
    Rng rng(33);
    Tensor xv = uniform_tensor(rng, {4, 3});
    Tensor wv = uniform_tensor(rng, {3, 2});
    Tensor bv = uniform_tensor(rng, {2});

    auto eval = [&]() {
        auto x = ad::input(xv, "x");
        auto w = ad::input(wv, "w");
        auto b = ad::input(bv, "b");
        auto h = ad::tanh(ad::add(ad::matmul(x, w), b));
        return ad::forward(ad::sum(ad::square(h)))[0];
    };

    auto x = ad::input(xv, "x");
    auto w = ad::input(wv, "w");
    auto b = ad::input(bv, "b");
    auto loss = ad::sum(ad::square(ad::tanh(ad::add(ad::matmul(x, w), b))));
    ad::forward(loss);
    ad::backward(loss);

    check_grad_entries(xv, x->grad, eval);
    check_grad_entries(wv, w->grad, eval);
    check_grad_entries(bv, b->grad, eval);
}

TEST_CASE("shortcut combination gradients match finite differences") {
    // g = (1 - alpha) h + alpha x, the shortcut wiring used by the subnets.
    Rng rng(34);
    Tensor av = Tensor::scalar(0.9);
    Tensor hv = uniform_tensor(rng, {6});
    Tensor xv = uniform_tensor(rng, {6});

    auto build = [&](const Tensor& a_, const Tensor& h_, const Tensor& x_) {
        auto alpha = ad::input(a_, "alpha");
        auto h = ad::input(h_, "h");
        auto x = ad::input(x_, "x");
        auto g = ad::add(ad::mul(ad::affine(alpha, -1.0, 1.0), h), ad::mul(alpha, x));
        return std::pair{ad::sum(ad::square(g)), std::tuple{alpha, h, x}};
    };

    auto eval = [&]() { return ad::forward(build(av, hv, xv).first)[0]; };

    auto [loss, nodes] = build(av, hv, xv);
    auto [alpha, h, x] = nodes;
    ad::forward(loss);
    ad::backward(loss);

    check_grad_entries(av, alpha->grad, eval);
    check_grad_entries(hv, h->grad, eval);
    check_grad_entries(xv, x->grad, eval);
}

TEST_CASE("relu gradients match finite differences away from the kink") {
    Rng rng(35);
    Tensor xv = uniform_tensor(rng, {12});
    for (double& v : xv.data()) {
        if (std::abs(v) < 0.1) v += (v >= 0.0 ? 0.2 : -0.2);
    }
    auto eval = [&]() {
        return ad::forward(ad::sum(ad::square(ad::relu(ad::input(xv, "x")))))[0];
    };
    auto x = ad::input(xv, "x");
    auto loss = ad::sum(ad::square(ad::relu(x)));
    ad::forward(loss);
    ad::backward(loss);
    check_grad_entries(xv, x->grad, eval);
}

TEST_CASE("transpose and concat gradients match finite differences") {
    Rng rng(36);
    Tensor av = uniform_tensor(rng, {3, 4});
    Tensor bv = uniform_tensor(rng, {3, 2});
    Tensor wv = uniform_tensor(rng, {3});

    auto build = [&]() {
        auto a = ad::input(av, "a");
        auto b = ad::input(bv, "b");
        auto cat = ad::concat_cols({a, b});
        auto prod = ad::matmul(ad::transpose(cat), ad::input(wv, "w"));
        return std::pair{ad::sum(ad::square(prod)), std::pair{a, b}};
    };
    auto eval = [&]() { return ad::forward(build().first)[0]; };

    auto [loss, nodes] = build();
    ad::forward(loss);
    ad::backward(loss);
    check_grad_entries(av, nodes.first->grad, eval);
    check_grad_entries(bv, nodes.second->grad, eval);
}

TEST_CASE("ridge_solve with the identity reproduces the target") {
    Tensor eye = Tensor::matrix(2, 2);
    eye.at(0, 0) = eye.at(1, 1) = 1.0;
    auto w = ad::ridge_solve(ad::input(eye, "F"), ad::input(Tensor({2}, {1.0, 2.0}), "y"),
                             0.0);
    const Tensor& val = ad::forward(w);
    CHECK(val[0] == doctest::Approx(1.0));
    CHECK(val[1] == doctest::Approx(2.0));
}

TEST_CASE("ridge_solve recovers the slope of a consistent system") {
    auto w = ad::ridge_solve(ad::input(Tensor({3, 1}, {1.0, 2.0, 3.0}), "F"),
                             ad::input(Tensor({3}, {2.0, 4.0, 6.0}), "y"), 0.0);
    CHECK(ad::forward(w)[0] == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("ridge_solve matches the dense-inverse oracle") {
    Rng rng(37);
    const Tensor f = uniform_tensor(rng, {20, 4});
    const Tensor y = uniform_tensor(rng, {20});
    const double lambda = 0.1;

    auto w = ad::ridge_solve(ad::input(f, "F"), ad::input(y, "y"), lambda);
    const Tensor& got = ad::forward(w);

    Tensor a;
    k::gemm_tn(f, f, a);
    for (std::size_t i = 0; i < 4; ++i) a.at(i, i) += lambda;
    Tensor fty, want;
    k::matvec_t(f, y, fty);
    k::matvec(dense_inverse(a), fty, want);

    CHECK(max_abs_diff(got, want) < 1e-8);
}

TEST_CASE("ridge solution converges to the least-squares solution as lambda -> 0") {
    Rng rng(38);
    const Tensor f = uniform_tensor(rng, {25, 5});
    const Tensor y = uniform_tensor(rng, {25});

    const Tensor w_qr =
        ad::forward(ad::ridge_solve(ad::input(f, "F"), ad::input(y, "y"), 0.0));
    const Tensor w_ridge =
        ad::forward(ad::ridge_solve(ad::input(f, "F"), ad::input(y, "y"), 1e-12));
    CHECK(max_abs_diff(w_qr, w_ridge) < 1e-8);
}

TEST_CASE("ridge_solve gradients match finite differences") {
    Rng rng(39);
    Tensor fv = uniform_tensor(rng, {10, 3});
    Tensor yv = uniform_tensor(rng, {10});

    for (double lambda : {0.1, 0.0}) {
        CAPTURE(lambda);
        // loss = || F w(F, y) - y ||^2 with both consumers of F and y.
        auto build = [&]() {
            auto f = ad::input(fv, "F");
            auto y = ad::input(yv, "y");
            auto w = ad::ridge_solve(f, y, lambda);
            auto diff = ad::add(ad::matmul(f, w), ad::affine(y, -1.0, 0.0));
            return std::pair{ad::sum(ad::square(diff)), std::pair{f, y}};
        };
        auto eval = [&]() { return ad::forward(build().first)[0]; };

        auto [loss, nodes] = build();
        ad::forward(loss);
        ad::backward(loss);
        check_grad_entries(fv, nodes.first->grad, eval, 1e-3, 1e-6);
        check_grad_entries(yv, nodes.second->grad, eval, 1e-3, 1e-6);
    }
}

TEST_CASE("least-squares residual is orthogonal to the columns") {
    Rng rng(40);
    const Tensor f = uniform_tensor(rng, {18, 4});
    const Tensor y = uniform_tensor(rng, {18});
    const Tensor w =
        ad::forward(ad::ridge_solve(ad::input(f, "F"), ad::input(y, "y"), 0.0));

    Tensor fw, res, ftres;
    k::matvec(f, w, fw);
    k::sub(fw, y, res);
    k::matvec_t(f, res, ftres);
    for (std::size_t j = 0; j < 4; ++j) CHECK(std::abs(ftres[j]) < 1e-10);
}

TEST_CASE("ridge_solve at lambda zero rejects rank-deficient matrices") {
    Rng rng(41);
    Tensor f = uniform_tensor(rng, {8, 3});
    for (std::size_t i = 0; i < 8; ++i) f.at(i, 2) = f.at(i, 0);
    auto w = ad::ridge_solve(ad::input(f, "F"), ad::input(uniform_tensor(rng, {8}), "y"),
                             0.0);
    CHECK_THROWS_AS(ad::forward(w), la::RankDeficientError);
}

TEST_CASE("ridge path accepts matrices the least-squares path rejects") {
    Rng rng(42);
    Tensor f = uniform_tensor(rng, {8, 3});
    for (std::size_t i = 0; i < 8; ++i) f.at(i, 2) = f.at(i, 0);
    auto w = ad::ridge_solve(ad::input(f, "F"), ad::input(uniform_tensor(rng, {8}), "y"),
                             0.1);
    CHECK(ad::forward(w).all_finite());
}

TEST_CASE("shape errors name the failing node") {
    auto bad = ad::add(ad::input(Tensor::matrix(2, 3, 1.0), "a"),
                       ad::input(Tensor::matrix(3, 2, 1.0), "b"));
    try {
        ad::forward(bad);
        FAIL("expected ShapeError");
    } catch (const ad::ShapeError& e) {
        CHECK(std::string(e.what()).find("add") != std::string::npos);
    }
}

TEST_CASE("non-finite intermediates are reported") {
    auto loss = ad::sum(ad::square(ad::input(Tensor::scalar(1e200), "big")));
    CHECK_THROWS_AS(ad::forward(loss), ad::NonFiniteError);
}

TEST_CASE("backward before forward is a state error") {
    auto x = ad::input(Tensor::scalar(1.0), "x");
    auto loss = ad::sum(ad::square(x));
    CHECK_THROWS_AS(ad::backward(loss), ad::StateError);
}

TEST_CASE("broadcast add and mul gradients match finite differences") {
    Rng rng(43);
    Tensor av = uniform_tensor(rng, {5, 3});
    Tensor rowv = uniform_tensor(rng, {3});
    Tensor sv = Tensor::scalar(0.7);

    auto build = [&]() {
        auto a = ad::input(av, "a");
        auto row = ad::input(rowv, "row");
        auto s = ad::input(sv, "s");
        auto out = ad::mul(ad::add(a, row), s);
        return std::pair{ad::sum(ad::square(out)), std::tuple{a, row, s}};
    };
    auto eval = [&]() { return ad::forward(build().first)[0]; };

    auto [loss, nodes] = build();
    auto [a, row, s] = nodes;
    ad::forward(loss);
    ad::backward(loss);
    check_grad_entries(av, a->grad, eval);
    check_grad_entries(rowv, row->grad, eval);
    check_grad_entries(sv, s->grad, eval);
}

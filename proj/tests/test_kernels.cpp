#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <utility>
#include <vector>

#include "afex/kernels.hpp"
#include "afex/rng.hpp"
#include "test_util.hpp"

using afex::Rng;
using afex::Tensor;
namespace k = afex::kernels;
using testutil::bit_equal;
using testutil::max_abs_diff;
using testutil::uniform_tensor;

namespace {

// Ask for several threads even on a single-core box so the parallel
// paths genuinely run multi-threaded in this test.
void force_threads() {
#ifdef _OPENMP
    omp_set_num_threads(4);
#endif
}

Tensor naive_gemm(const Tensor& a, const Tensor& b) {
    Tensor out = Tensor::matrix(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double acc = 0.0;
            for (std::size_t l = 0; l < a.cols(); ++l) acc += a.at(i, l) * b.at(l, j);
            out.at(i, j) = acc;
        }
    }
    return out;
}

}  // namespace

TEST_CASE("gemm matches a naive triple loop") {
    Rng rng(11);
    const Tensor a = uniform_tensor(rng, {7, 5});
    const Tensor b = uniform_tensor(rng, {5, 9});
    Tensor out;
    k::gemm(a, b, out);
    CHECK(max_abs_diff(out, naive_gemm(a, b)) < 1e-12);
}

TEST_CASE("gemm_tn and gemm_nt match explicit transposes") {
    Rng rng(12);
    const Tensor a = uniform_tensor(rng, {6, 4});
    const Tensor b = uniform_tensor(rng, {6, 3});
    Tensor at, bt, want, got;

    k::transpose(a, at);
    k::gemm_tn(a, b, got);  // a^T b: [4,3]
    k::gemm(at, b, want);
    CHECK(max_abs_diff(got, want) < 1e-12);

    k::transpose(b, bt);
    Tensor c = uniform_tensor(rng, {5, 3});
    k::gemm_nt(c, b, got);  // c b^T: [5,6]
    k::gemm(c, bt, want);
    CHECK(max_abs_diff(got, want) < 1e-12);
}

TEST_CASE("matvec and matvec_t agree with gemm against a column") {
    Rng rng(13);
    const Tensor a = uniform_tensor(rng, {8, 5});
    const Tensor x = uniform_tensor(rng, {5});
    const Tensor y = uniform_tensor(rng, {8});
    Tensor got;

    k::matvec(a, x, got);
    for (std::size_t i = 0; i < 8; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < 5; ++j) acc += a.at(i, j) * x[j];
        CHECK(got[i] == doctest::Approx(acc).epsilon(1e-12));
    }

    k::matvec_t(a, y, got);
    for (std::size_t j = 0; j < 5; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < 8; ++i) acc += a.at(i, j) * y[i];
        CHECK(got[j] == doctest::Approx(acc).epsilon(1e-12));
    }
}

TEST_CASE("elementwise kernels and maps") {
    Rng rng(14);
    const Tensor a = uniform_tensor(rng, {4, 6});
    const Tensor b = uniform_tensor(rng, {4, 6});
    Tensor out;

    k::add(a, b, out);
    CHECK(out.at(2, 3) == doctest::Approx(a.at(2, 3) + b.at(2, 3)));
    k::sub(a, b, out);
    CHECK(out.at(1, 5) == doctest::Approx(a.at(1, 5) - b.at(1, 5)));
    k::mul(a, b, out);
    CHECK(out.at(0, 0) == doctest::Approx(a.at(0, 0) * b.at(0, 0)));

    k::scale_shift(a, 2.5, -1.0, out);
    CHECK(out.at(3, 2) == doctest::Approx(2.5 * a.at(3, 2) - 1.0));

    k::map_tanh(a, out);
    CHECK(out.at(1, 1) == doctest::Approx(std::tanh(a.at(1, 1))));
    k::map_relu(a, out);
    for (std::size_t i = 0; i < a.numel(); ++i) {
        CHECK(out[i] == (a[i] > 0.0 ? a[i] : 0.0));
    }
    k::map_square(a, out);
    CHECK(out.at(2, 2) == doctest::Approx(a.at(2, 2) * a.at(2, 2)));

    const Tensor row = uniform_tensor(rng, {6});
    k::add_rowvec(a, row, out);
    CHECK(out.at(3, 4) == doctest::Approx(a.at(3, 4) + row[4]));
}

TEST_CASE("transpose is an involution and outer matches products") {
    Rng rng(15);
    const Tensor a = uniform_tensor(rng, {5, 7});
    Tensor t, tt;
    k::transpose(a, t);
    k::transpose(t, tt);
    CHECK(bit_equal(a, tt));

    const Tensor x = uniform_tensor(rng, {4});
    const Tensor y = uniform_tensor(rng, {6});
    Tensor o;
    k::outer(x, y, o);
    CHECK(o.at(2, 5) == x[2] * y[5]);
    CHECK(o.at(0, 0) == x[0] * y[0]);
}

TEST_CASE("column_products picks out the requested column pairs") {
    Rng rng(16);
    const Tensor f = uniform_tensor(rng, {9, 4});
    const std::vector<std::pair<std::size_t, std::size_t>> pairs = {
        {0, 1}, {0, 3}, {2, 2}};
    Tensor g;
    k::column_products(f, pairs, g);
    REQUIRE(g.rows() == 9);
    REQUIRE(g.cols() == 3);
    for (std::size_t i = 0; i < 9; ++i) {
        CHECK(g.at(i, 0) == f.at(i, 0) * f.at(i, 1));
        CHECK(g.at(i, 1) == f.at(i, 0) * f.at(i, 3));
        CHECK(g.at(i, 2) == f.at(i, 2) * f.at(i, 2));
    }
    CHECK_THROWS(k::column_products(f, {{0, 4}}, g));
}

TEST_CASE("sum and dot match plain accumulation") {
    Rng rng(17);
    const Tensor x = uniform_tensor(rng, {123});
    const Tensor y = uniform_tensor(rng, {123});
    double s = 0.0, d = 0.0;
    for (std::size_t i = 0; i < x.numel(); ++i) {
        s += x[i];
        d += x[i] * y[i];
    }
    CHECK(k::sum(x) == s);  // identical order, so exact
    CHECK(k::dot(x, y) == d);
}

TEST_CASE("parallel kernels are bit-identical to the serial reference") {
    force_threads();
    Rng rng(18);

    // Large enough that the parallel if-clauses actually trigger.
    const Tensor a = uniform_tensor(rng, {160, 120});
    const Tensor b = uniform_tensor(rng, {120, 140});
    const Tensor c = uniform_tensor(rng, {160, 140});
    const Tensor v = uniform_tensor(rng, {120});
    const Tensor u = uniform_tensor(rng, {160});
    const Tensor row = uniform_tensor(rng, {120});
    Tensor p, s;

    k::gemm(a, b, p);
    k::serial::gemm(a, b, s);
    CHECK(bit_equal(p, s));

    k::gemm_tn(a, c, p);
    k::serial::gemm_tn(a, c, s);
    CHECK(bit_equal(p, s));

    k::matvec(a, v, p);
    k::serial::matvec(a, v, s);
    CHECK(bit_equal(p, s));

    k::matvec_t(a, u, p);
    k::serial::matvec_t(a, u, s);
    CHECK(bit_equal(p, s));

    const Tensor a2 = uniform_tensor(rng, {200, 160});
    k::add(a, a, p);
    k::serial::add(a, a, s);
    CHECK(bit_equal(p, s));
    k::mul(a, a, p);
    k::serial::mul(a, a, s);
    CHECK(bit_equal(p, s));
    k::add_rowvec(a, row, p);
    k::serial::add_rowvec(a, row, s);
    CHECK(bit_equal(p, s));
    k::scale_shift(a, 1.7, 0.3, p);
    k::serial::scale_shift(a, 1.7, 0.3, s);
    CHECK(bit_equal(p, s));
    k::map_tanh(a, p);
    k::serial::map_tanh(a, s);
    CHECK(bit_equal(p, s));
    k::map_relu(a, p);
    k::serial::map_relu(a, s);
    CHECK(bit_equal(p, s));
    k::map_square(a, p);
    k::serial::map_square(a, s);
    CHECK(bit_equal(p, s));
    k::transpose(a2, p);
    k::serial::transpose(a2, s);
    CHECK(bit_equal(p, s));
    k::outer(u, v, p);
    k::serial::outer(u, v, s);
    CHECK(bit_equal(p, s));

    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < 120; ++i) {
        for (std::size_t j = i + 1; j < 120; j += 17) pairs.emplace_back(i, j);
    }
    k::column_products(a, pairs, p);
    k::serial::column_products(a, pairs, s);
    CHECK(bit_equal(p, s));

    CHECK(k::sum(a) == k::serial::sum(a));
    CHECK(k::dot(v, row) == k::serial::dot(v, row));
}

TEST_CASE("gemm_nt parallel equals serial") {
    force_threads();
    Rng rng(19);
    const Tensor a = uniform_tensor(rng, {150, 110});
    const Tensor b = uniform_tensor(rng, {130, 110});
    Tensor p, s;
    k::gemm_nt(a, b, p);
    k::serial::gemm_nt(a, b, s);
    CHECK(bit_equal(p, s));
}

TEST_CASE("shape requirements are enforced") {
    Tensor a = Tensor::matrix(3, 4, 1.0);
    Tensor b = Tensor::matrix(5, 2, 1.0);
    Tensor out;
    CHECK_THROWS_AS(k::gemm(a, b, out), std::invalid_argument);
    CHECK_THROWS_AS(k::add(a, b, out), std::invalid_argument);
    CHECK_THROWS_AS(k::matvec(a, Tensor({3}), out), std::invalid_argument);
    CHECK_THROWS_AS(k::dot(Tensor({3}), Tensor({4})), std::invalid_argument);
}

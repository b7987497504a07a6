#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "afex/rng.hpp"
#include "afex/tensor.hpp"

namespace testutil {

inline afex::Tensor uniform_tensor(afex::Rng& rng, std::vector<std::size_t> shape,
                                   double lo = -1.0, double hi = 1.0) {
    afex::Tensor t(std::move(shape));
    for (double& v : t.data()) v = rng.uniform(lo, hi);
    return t;
}

inline bool close(double a, double b, double atol, double rtol = 0.0) {
    return std::abs(a - b) <= atol + rtol * std::max(std::abs(a), std::abs(b));
}

inline double max_abs_diff(const afex::Tensor& a, const afex::Tensor& b) {
    if (a.numel() != b.numel()) throw std::invalid_argument("max_abs_diff: size mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) {
        m = std::max(m, std::abs(a[i] - b[i]));
    }
    return m;
}

inline bool bit_equal(const afex::Tensor& a, const afex::Tensor& b) {
    if (a.numel() != b.numel()) return false;
    for (std::size_t i = 0; i < a.numel(); ++i) {
        if (a[i] != b[i]) return false;
    }
    return true;
}

/// Dense inverse via Gauss-Jordan with partial pivoting. Test oracle only;
/// deliberately independent of the QR/Cholesky code under test.
inline afex::Tensor dense_inverse(const afex::Tensor& a) {
    const std::size_t n = a.rows();
    if (a.cols() != n) throw std::invalid_argument("dense_inverse: not square");
    afex::Tensor work = a;
    afex::Tensor inv = afex::Tensor::matrix(n, n);
    for (std::size_t i = 0; i < n; ++i) inv.at(i, i) = 1.0;

    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r) {
            if (std::abs(work.at(r, col)) > std::abs(work.at(pivot, col))) pivot = r;
        }
        if (work.at(pivot, col) == 0.0) {
            throw std::runtime_error("dense_inverse: singular matrix");
        }
        if (pivot != col) {
            for (std::size_t j = 0; j < n; ++j) {
                std::swap(work.at(col, j), work.at(pivot, j));
                std::swap(inv.at(col, j), inv.at(pivot, j));
            }
        }
        const double d = work.at(col, col);
        for (std::size_t j = 0; j < n; ++j) {
            work.at(col, j) /= d;
            inv.at(col, j) /= d;
        }
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col) continue;
            const double f = work.at(r, col);
            if (f == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) {
                work.at(r, j) -= f * work.at(col, j);
                inv.at(r, j) -= f * inv.at(col, j);
            }
        }
    }
    return inv;
}

/// Central difference d(eval)/d(slot) with the slot restored afterwards.
/// eval must recompute the quantity from scratch (rebuild the graph).
template <typename F>
double central_diff(double& slot, F&& eval, double h = 1e-5) {
    const double saved = slot;
    slot = saved + h;
    const double up = eval();
    slot = saved - h;
    const double dn = eval();
    slot = saved;
    return (up - dn) / (2.0 * h);
}

}  // namespace testutil

#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "afex/tensor.hpp"

namespace afex::linalg {

/// Householder QR of an n x m matrix (n >= m), reflectors stored below the
/// diagonal, R above it, R's diagonal in rdiag.
struct QrFactorization {
    Tensor qr;
    std::vector<double> rdiag;
    std::size_t n = 0;
    std::size_t m = 0;

    bool full_rank(double rel_tol = 1e-10) const;
    /// The m x m triangular factor; satisfies R^T R = A^T A.
    Tensor r_factor() const;
};

QrFactorization qr_decompose(const Tensor& a);

/// Least-squares solution of min ||A x - y||^2 through an existing
/// factorization. Throws RankDeficientError when a diagonal entry of R is
/// (numerically) zero.
Tensor qr_solve(const QrFactorization& f, const Tensor& y);

struct RankEstimate {
    std::size_t rank = 0;
    double threshold = 0.0;     // absolute cutoff applied to |R_ii|
    double max_abs_diag = 0.0;
};

/// Numerical rank via QR with column pivoting: rank = number of diagonal
/// entries of R above rel_tol * max|R_ii|.
RankEstimate estimate_rank(const Tensor& a, double rel_tol = 1e-10);

/// Upper Cholesky factor U with U^T U = A for symmetric positive definite A.
/// Throws NotPositiveDefiniteError otherwise.
Tensor cholesky_upper(const Tensor& a);

/// Solves U^T U x = b given an upper triangular U (Cholesky factor or the R
/// of a full-rank QR, which satisfies R^T R = A^T A).
Tensor solve_utu(const Tensor& u, const Tensor& b);

struct RankDeficientError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NotPositiveDefiniteError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace afex::linalg

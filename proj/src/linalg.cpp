#include "afex/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace afex::linalg {

namespace {

double hypot_accumulate(double nrm, double v) {
    // Incremental 2-norm without overflow, as in the classic QR codes.
    if (v == 0.0) return nrm;
    if (std::abs(nrm) > std::abs(v)) {
        double r = v / nrm;
        return std::abs(nrm) * std::sqrt(1.0 + r * r);
    }
    double r = nrm / v;
    return std::abs(v) * std::sqrt(1.0 + r * r);
}

}  // namespace

bool QrFactorization::full_rank(double rel_tol) const {
    double max_abs = 0.0;
    for (double d : rdiag) max_abs = std::max(max_abs, std::abs(d));
    if (max_abs == 0.0) return false;
    for (double d : rdiag) {
        if (std::abs(d) <= rel_tol * max_abs) return false;
    }
    return true;
}

Tensor QrFactorization::r_factor() const {
    Tensor r = Tensor::matrix(m, m);
    for (std::size_t i = 0; i < m; ++i) {
        r.at(i, i) = rdiag[i];
        for (std::size_t j = i + 1; j < m; ++j) r.at(i, j) = qr.at(i, j);
    }
    return r;
}

QrFactorization qr_decompose(const Tensor& a) {
    const std::size_t n = a.rows(), m = a.cols();
    if (n < m) throw std::invalid_argument("qr_decompose: requires rows >= cols");

    QrFactorization f;
    f.qr = a;
    f.rdiag.assign(m, 0.0);
    f.n = n;
    f.m = m;
    Tensor& qr = f.qr;

    for (std::size_t k = 0; k < m; ++k) {
        double nrm = 0.0;
        for (std::size_t i = k; i < n; ++i) nrm = hypot_accumulate(nrm, qr.at(i, k));

        if (nrm != 0.0) {
            if (qr.at(k, k) < 0.0) nrm = -nrm;
            for (std::size_t i = k; i < n; ++i) qr.at(i, k) /= nrm;
            qr.at(k, k) += 1.0;

            // Apply the reflector to the trailing columns. Each column is
            // independent; inner order fixed, so parallel matches serial.
            const std::size_t kk = k;
#pragma omp parallel for schedule(static) if ((m - kk) * (n - kk) >= 16384)
            for (std::size_t j = kk + 1; j < m; ++j) {
                double s = 0.0;
                for (std::size_t i = kk; i < n; ++i) s += qr.at(i, kk) * qr.at(i, j);
                s = -s / qr.at(kk, kk);
                for (std::size_t i = kk; i < n; ++i) qr.at(i, j) += s * qr.at(i, kk);
            }
        }
        f.rdiag[k] = -nrm;
    }
    return f;
}

Tensor qr_solve(const QrFactorization& f, const Tensor& y) {
    const std::size_t n = f.n, m = f.m;
    if (y.numel() != n) throw std::invalid_argument("qr_solve: rhs length mismatch");
    if (!f.full_rank()) {
        throw RankDeficientError(
            "qr_solve: matrix is column-rank-deficient; use the ridge path");
    }

    std::vector<double> b(y.ptr(), y.ptr() + n);
    const Tensor& qr = f.qr;

    // b <- Q^T b
    for (std::size_t k = 0; k < m; ++k) {
        if (qr.at(k, k) == 0.0) continue;
        double s = 0.0;
        for (std::size_t i = k; i < n; ++i) s += qr.at(i, k) * b[i];
        s = -s / qr.at(k, k);
        for (std::size_t i = k; i < n; ++i) b[i] += s * qr.at(i, k);
    }

    // Back substitution with R.
    Tensor x({m});
    for (std::size_t kk = m; kk-- > 0;) {
        double acc = b[kk];
        for (std::size_t j = kk + 1; j < m; ++j) acc -= qr.at(kk, j) * x[j];
        x[kk] = acc / f.rdiag[kk];
    }
    return x;
}

RankEstimate estimate_rank(const Tensor& a, double rel_tol) {
    const std::size_t n = a.rows(), m = a.cols();
    Tensor qr = a;
    const std::size_t steps = std::min(n, m);

    std::vector<double> col_norm(m, 0.0);
    for (std::size_t j = 0; j < m; ++j) {
        double nrm = 0.0;
        for (std::size_t i = 0; i < n; ++i) nrm = hypot_accumulate(nrm, qr.at(i, j));
        col_norm[j] = nrm;
    }

    std::vector<double> rdiag(steps, 0.0);
    for (std::size_t k = 0; k < steps; ++k) {
        // Pivot: bring the column with the largest remaining norm to front.
        std::size_t pivot = k;
        for (std::size_t j = k + 1; j < m; ++j) {
            if (col_norm[j] > col_norm[pivot]) pivot = j;
        }
        if (pivot != k) {
            for (std::size_t i = 0; i < n; ++i) std::swap(qr.at(i, k), qr.at(i, pivot));
            std::swap(col_norm[k], col_norm[pivot]);
        }

        double nrm = 0.0;
        for (std::size_t i = k; i < n; ++i) nrm = hypot_accumulate(nrm, qr.at(i, k));
        if (nrm == 0.0) {
            rdiag[k] = 0.0;
            continue;
        }
        if (qr.at(k, k) < 0.0) nrm = -nrm;
        for (std::size_t i = k; i < n; ++i) qr.at(i, k) /= nrm;
        qr.at(k, k) += 1.0;
        rdiag[k] = -nrm;

        const std::size_t kk = k;
#pragma omp parallel for schedule(static) if ((m - kk) * (n - kk) >= 16384)
        for (std::size_t j = kk + 1; j < m; ++j) {
            double s = 0.0;
            for (std::size_t i = kk; i < n; ++i) s += qr.at(i, kk) * qr.at(i, j);
            s = -s / qr.at(kk, kk);
            for (std::size_t i = kk; i < n; ++i) qr.at(i, j) += s * qr.at(i, kk);
        }
        for (std::size_t j = k + 1; j < m; ++j) {
            // Recompute remaining norms from scratch; cheap at these sizes and
            // avoids the cancellation issues of the downdate formula.
            double cn = 0.0;
            for (std::size_t i = k + 1; i < n; ++i) cn = hypot_accumulate(cn, qr.at(i, j));
            col_norm[j] = cn;
        }
    }

    RankEstimate est;
    for (double d : rdiag) est.max_abs_diag = std::max(est.max_abs_diag, std::abs(d));
    est.threshold = rel_tol * est.max_abs_diag;
    for (double d : rdiag) {
        if (std::abs(d) > est.threshold) ++est.rank;
    }
    if (est.max_abs_diag == 0.0) est.rank = 0;
    return est;
}

Tensor cholesky_upper(const Tensor& a) {
    const std::size_t m = a.rows();
    if (a.cols() != m) throw std::invalid_argument("cholesky_upper: matrix not square");

    Tensor u = Tensor::matrix(m, m);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i; j < m; ++j) {
            double acc = a.at(i, j);
            for (std::size_t k = 0; k < i; ++k) acc -= u.at(k, i) * u.at(k, j);
            if (i == j) {
                if (acc <= 0.0) {
                    throw NotPositiveDefiniteError(
                        "cholesky_upper: matrix is not positive definite");
                }
                u.at(i, i) = std::sqrt(acc);
            } else {
                u.at(i, j) = acc / u.at(i, i);
            }
        }
    }
    return u;
}

Tensor solve_utu(const Tensor& u, const Tensor& b) {
    const std::size_t m = u.rows();
    if (u.cols() != m || b.numel() != m) {
        throw std::invalid_argument("solve_utu: dimension mismatch");
    }
    for (std::size_t i = 0; i < m; ++i) {
        if (u.at(i, i) == 0.0) {
            throw RankDeficientError("solve_utu: zero diagonal in triangular factor");
        }
    }

    // Forward substitution: U^T z = b.
    Tensor z({m});
    for (std::size_t i = 0; i < m; ++i) {
        double acc = b[i];
        for (std::size_t k = 0; k < i; ++k) acc -= u.at(k, i) * z[k];
        z[i] = acc / u.at(i, i);
    }
    // Back substitution: U x = z.
    Tensor x({m});
    for (std::size_t i = m; i-- > 0;) {
        double acc = z[i];
        for (std::size_t k = i + 1; k < m; ++k) acc -= u.at(i, k) * x[k];
        x[i] = acc / u.at(i, i);
    }
    return x;
}

}  // namespace afex::linalg

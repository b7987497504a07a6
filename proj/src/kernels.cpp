#include "afex/kernels.hpp"

#include <stdexcept>

namespace afex::kernels {

namespace {

// Minimum element count before a loop is worth forking threads for.
constexpr std::size_t kParallelGrain = 16 * 1024;

void require(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
}

}  // namespace

namespace serial {

void gemm(const Tensor& a, const Tensor& b, Tensor& out) {
    const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
    require(b.rows() == k, "gemm: inner dimension mismatch");
    out = Tensor::matrix(n, m);
    const double* ap = a.ptr();
    const double* bp = b.ptr();
    double* cp = out.ptr();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t l = 0; l < k; ++l) {
            const double av = ap[i * k + l];
            if (av == 0.0) continue;
            const double* brow = bp + l * m;
            double* crow = cp + i * m;
            for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
        }
    }
}

void gemm_tn(const Tensor& a, const Tensor& b, Tensor& out) {
    const std::size_t k = a.rows(), n = a.cols(), m = b.cols();
    require(b.rows() == k, "gemm_tn: inner dimension mismatch");
    out = Tensor::matrix(n, m);
    const double* ap = a.ptr();
    const double* bp = b.ptr();
    double* cp = out.ptr();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t l = 0; l < k; ++l) {
            const double av = ap[l * n + i];
            if (av == 0.0) continue;
            const double* brow = bp + l * m;
            double* crow = cp + i * m;
            for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
        }
    }
}

void gemm_nt(const Tensor& a, const Tensor& b, Tensor& out) {
    const std::size_t n = a.rows(), k = a.cols(), m = b.rows();
    require(b.cols() == k, "gemm_nt: inner dimension mismatch");
    out = Tensor::matrix(n, m);
    const double* ap = a.ptr();
    const double* bp = b.ptr();
    double* cp = out.ptr();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            double acc = 0.0;
            const double* arow = ap + i * k;
            const double* brow = bp + j * k;
            for (std::size_t l = 0; l < k; ++l) acc += arow[l] * brow[l];
            cp[i * m + j] = acc;
        }
    }
}

void matvec(const Tensor& a, const Tensor& x, Tensor& out) {
    const std::size_t n = a.rows(), m = a.cols();
    require(x.numel() == m, "matvec: dimension mismatch");
    out = Tensor({n});
    const double* ap = a.ptr();
    const double* xp = x.ptr();
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < m; ++j) acc += ap[i * m + j] * xp[j];
        out[i] = acc;
    }
}

void matvec_t(const Tensor& a, const Tensor& x, Tensor& out) {
    const std::size_t n = a.rows(), m = a.cols();
    require(x.numel() == n, "matvec_t: dimension mismatch");
    out = Tensor({m});
    const double* ap = a.ptr();
    const double* xp = x.ptr();
    for (std::size_t j = 0; j < m; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) acc += ap[i * m + j] * xp[i];
        out[j] = acc;
    }
}

void add(const Tensor& a, const Tensor& b, Tensor& out) {
    require(a.numel() == b.numel(), "add: size mismatch");
    out = Tensor(a.shape());
    for (std::size_t i = 0; i < a.numel(); ++i) out[i] = a[i] + b[i];
}

void sub(const Tensor& a, const Tensor& b, Tensor& out) {
    require(a.numel() == b.numel(), "sub: size mismatch");
    out = Tensor(a.shape());
    for (std::size_t i = 0; i < a.numel(); ++i) out[i] = a[i] - b[i];
}

void mul(const Tensor& a, const Tensor& b, Tensor& out) {
    require(a.numel() == b.numel(), "mul: size mismatch");
    out = Tensor(a.shape());
    for (std::size_t i = 0; i < a.numel(); ++i) out[i] = a[i] * b[i];
}

void add_rowvec(const Tensor& a, const Tensor& row, Tensor& out) {
    const std::size_t n = a.rows(), m = a.cols();
    require(row.numel() == m, "add_rowvec: width mismatch");
    out = Tensor(a.shape());
    const double* rp = row.ptr();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) out[i * m + j] = a[i * m + j] + rp[j];
    }
}

void scale_shift(const Tensor& x, double scale, double shift, Tensor& out) {
    out = Tensor(x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) out[i] = scale * x[i] + shift;
}

void map_tanh(const Tensor& x, Tensor& out) {
    out = Tensor(x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) out[i] = std::tanh(x[i]);
}

void map_relu(const Tensor& x, Tensor& out) {
    out = Tensor(x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void map_square(const Tensor& x, Tensor& out) {
    out = Tensor(x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) out[i] = x[i] * x[i];
}

void transpose(const Tensor& a, Tensor& out) {
    const std::size_t n = a.rows(), m = a.cols();
    out = Tensor::matrix(m, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) out[j * n + i] = a[i * m + j];
    }
}

void outer(const Tensor& x, const Tensor& y, Tensor& out) {
    const std::size_t n = x.numel(), m = y.numel();
    out = Tensor::matrix(n, m);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) out[i * m + j] = x[i] * y[j];
    }
}

void column_products(const Tensor& f,
                     const std::vector<std::pair<std::size_t, std::size_t>>& pairs,
                     Tensor& out) {
    const std::size_t n = f.rows(), m = f.cols(), p = pairs.size();
    for (const auto& [ca, cb] : pairs) {
        require(ca < m && cb < m, "column_products: column index out of range");
    }
    out = Tensor::matrix(n, p);
    const double* fp = f.ptr();
    for (std::size_t i = 0; i < n; ++i) {
        const double* frow = fp + i * m;
        double* grow = out.ptr() + i * p;
        for (std::size_t c = 0; c < p; ++c) {
            grow[c] = frow[pairs[c].first] * frow[pairs[c].second];
        }
    }
}

double sum(const Tensor& x) {
    double acc = 0.0;
    for (std::size_t i = 0; i < x.numel(); ++i) acc += x[i];
    return acc;
}

double dot(const Tensor& x, const Tensor& y) {
    require(x.numel() == y.numel(), "dot: size mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < x.numel(); ++i) acc += x[i] * y[i];
    return acc;
}

}  // namespace serial

void gemm(const Tensor& a, const Tensor& b, Tensor& out) {
    const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
    require(b.rows() == k, "gemm: inner dimension mismatch");
    out = Tensor::matrix(n, m);
    const double* ap = a.ptr();
    const double* bp = b.ptr();
    double* cp = out.ptr();
#pragma omp parallel for schedule(static) if (n * k * m >= kParallelGrain)
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t l = 0; l < k; ++l) {
            const double av = ap[i * k + l];
            if (av == 0.0) continue;
            const double* brow = bp + l * m;
            double* crow = cp + i * m;
            for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
        }
    }
}

void gemm_tn(const Tensor& a, const Tensor& b, Tensor& out) {
    const std::size_t k = a.rows(), n = a.cols(), m = b.cols();
    require(b.rows() == k, "gemm_tn: inner dimension mismatch");
    out = Tensor::matrix(n, m);
    const double* ap = a.ptr();
    const double* bp = b.ptr();
    double* cp = out.ptr();
#pragma omp parallel for schedule(static) if (n * k * m >= kParallelGrain)
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t l = 0; l < k; ++l) {
            const double av = ap[l * n + i];
            if (av == 0.0) continue;
            const double* brow = bp + l * m;
            double* crow = cp + i * m;
            for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
        }
    }
}

void gemm_nt(const Tensor& a, const Tensor& b, Tensor& out) {
    const std::size_t n = a.rows(), k = a.cols(), m = b.rows();
    require(b.cols() == k, "gemm_nt: inner dimension mismatch");
    out = Tensor::matrix(n, m);
    const double* ap = a.ptr();
    const double* bp = b.ptr();
    double* cp = out.ptr();
#pragma omp parallel for schedule(static) if (n * k * m >= kParallelGrain)
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            double acc = 0.0;
            const double* arow = ap + i * k;
            const double* brow = bp + j * k;
            for (std::size_t l = 0; l < k; ++l) acc += arow[l] * brow[l];
            cp[i * m + j] = acc;
        }
    }
}

void matvec(const Tensor& a, const Tensor& x, Tensor& out) {
    const std::size_t n = a.rows(), m = a.cols();
    require(x.numel() == m, "matvec: dimension mismatch");
    out = Tensor({n});
    const double* ap = a.ptr();
    const double* xp = x.ptr();
    double* yp = out.ptr();
#pragma omp parallel for schedule(static) if (n * m >= kParallelGrain)
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < m; ++j) acc += ap[i * m + j] * xp[j];
        yp[i] = acc;
    }
}

void matvec_t(const Tensor& a, const Tensor& x, Tensor& out) {
    const std::size_t n = a.rows(), m = a.cols();
    require(x.numel() == n, "matvec_t: dimension mismatch");
    out = Tensor({m});
    const double* ap = a.ptr();
    const double* xp = x.ptr();
    double* yp = out.ptr();
#pragma omp parallel for schedule(static) if (n * m >= kParallelGrain)
    for (std::size_t j = 0; j < m; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) acc += ap[i * m + j] * xp[i];
        yp[j] = acc;
    }
}

namespace {

template <typename F>
void elementwise(const Tensor& a, Tensor& out, F&& f) {
    out = Tensor(a.shape());
    const std::size_t n = a.numel();
    const double* ap = a.ptr();
    double* op = out.ptr();
#pragma omp parallel for schedule(static) if (n >= kParallelGrain)
    for (std::size_t i = 0; i < n; ++i) op[i] = f(ap[i]);
}

template <typename F>
void elementwise2(const Tensor& a, const Tensor& b, Tensor& out, F&& f) {
    require(a.numel() == b.numel(), "elementwise: size mismatch");
    out = Tensor(a.shape());
    const std::size_t n = a.numel();
    const double* ap = a.ptr();
    const double* bp = b.ptr();
    double* op = out.ptr();
#pragma omp parallel for schedule(static) if (n >= kParallelGrain)
    for (std::size_t i = 0; i < n; ++i) op[i] = f(ap[i], bp[i]);
}

}  // namespace

void add(const Tensor& a, const Tensor& b, Tensor& out) {
    elementwise2(a, b, out, [](double x, double y) { return x + y; });
}

void sub(const Tensor& a, const Tensor& b, Tensor& out) {
    elementwise2(a, b, out, [](double x, double y) { return x - y; });
}

void mul(const Tensor& a, const Tensor& b, Tensor& out) {
    elementwise2(a, b, out, [](double x, double y) { return x * y; });
}

void add_rowvec(const Tensor& a, const Tensor& row, Tensor& out) {
    const std::size_t n = a.rows(), m = a.cols();
    require(row.numel() == m, "add_rowvec: width mismatch");
    out = Tensor(a.shape());
    const double* ap = a.ptr();
    const double* rp = row.ptr();
    double* op = out.ptr();
#pragma omp parallel for schedule(static) if (n * m >= kParallelGrain)
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) op[i * m + j] = ap[i * m + j] + rp[j];
    }
}

void scale_shift(const Tensor& x, double scale, double shift, Tensor& out) {
    elementwise(x, out, [=](double v) { return scale * v + shift; });
}

void map_tanh(const Tensor& x, Tensor& out) {
    elementwise(x, out, [](double v) { return std::tanh(v); });
}

void map_relu(const Tensor& x, Tensor& out) {
    elementwise(x, out, [](double v) { return v > 0.0 ? v : 0.0; });
}

void map_square(const Tensor& x, Tensor& out) {
    elementwise(x, out, [](double v) { return v * v; });
}

void transpose(const Tensor& a, Tensor& out) {
    const std::size_t n = a.rows(), m = a.cols();
    out = Tensor::matrix(m, n);
    const double* ap = a.ptr();
    double* op = out.ptr();
#pragma omp parallel for schedule(static) if (n * m >= kParallelGrain)
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) op[j * n + i] = ap[i * m + j];
    }
}

void outer(const Tensor& x, const Tensor& y, Tensor& out) {
    const std::size_t n = x.numel(), m = y.numel();
    out = Tensor::matrix(n, m);
    const double* xp = x.ptr();
    const double* yp = y.ptr();
    double* op = out.ptr();
#pragma omp parallel for schedule(static) if (n * m >= kParallelGrain)
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) op[i * m + j] = xp[i] * yp[j];
    }
}

void column_products(const Tensor& f,
                     const std::vector<std::pair<std::size_t, std::size_t>>& pairs,
                     Tensor& out) {
    const std::size_t n = f.rows(), m = f.cols(), p = pairs.size();
    for (const auto& [ca, cb] : pairs) {
        require(ca < m && cb < m, "column_products: column index out of range");
    }
    out = Tensor::matrix(n, p);
    const double* fp = f.ptr();
    double* gp = out.ptr();
#pragma omp parallel for schedule(static) if (n * p >= kParallelGrain)
    for (std::size_t i = 0; i < n; ++i) {
        const double* frow = fp + i * m;
        double* grow = gp + i * p;
        for (std::size_t c = 0; c < p; ++c) {
            grow[c] = frow[pairs[c].first] * frow[pairs[c].second];
        }
    }
}

// Fixed summation order; see header.
double sum(const Tensor& x) { return serial::sum(x); }
double dot(const Tensor& x, const Tensor& y) { return serial::dot(x, y); }

}  // namespace afex::kernels

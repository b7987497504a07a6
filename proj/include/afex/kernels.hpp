#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "afex/tensor.hpp"

namespace afex::kernels {

/// Dense kernels behind the graph engine and the matrix builders.
///
/// Every kernel exists twice: the functions in kernels::serial are the plain
/// reference loops, and the functions in kernels:: are the OpenMP versions
/// used in production. The parallel loops assign each output element to
/// exactly one thread and keep the inner summation order fixed, so the two
/// variants produce bit-identical results for any thread count. Tests assert
/// that equality; the bench target measures the speed difference.
///
/// Full reductions (sum, dot) are kept serial in both namespaces: splitting
/// them across threads would change the summation order and break the
/// bit-determinism contract, and they are O(n) against the O(n*m) kernels.

namespace serial {

void gemm(const Tensor& a, const Tensor& b, Tensor& out);     // out = a * b
void gemm_tn(const Tensor& a, const Tensor& b, Tensor& out);  // out = a^T * b
void gemm_nt(const Tensor& a, const Tensor& b, Tensor& out);  // out = a * b^T

void matvec(const Tensor& a, const Tensor& x, Tensor& out);    // out = a * x
void matvec_t(const Tensor& a, const Tensor& x, Tensor& out);  // out = a^T * x

void add(const Tensor& a, const Tensor& b, Tensor& out);
void sub(const Tensor& a, const Tensor& b, Tensor& out);
void mul(const Tensor& a, const Tensor& b, Tensor& out);

/// out(i,j) = a(i,j) + row(j); broadcast of a row vector over all rows.
void add_rowvec(const Tensor& a, const Tensor& row, Tensor& out);

void scale_shift(const Tensor& x, double scale, double shift, Tensor& out);

void map_tanh(const Tensor& x, Tensor& out);
void map_relu(const Tensor& x, Tensor& out);
void map_square(const Tensor& x, Tensor& out);

void transpose(const Tensor& a, Tensor& out);
void outer(const Tensor& x, const Tensor& y, Tensor& out);  // out(i,j) = x(i)*y(j)

/// For each (ca, cb) pair, the corresponding output column is the
/// elementwise product of columns ca and cb of f.
void column_products(const Tensor& f,
                     const std::vector<std::pair<std::size_t, std::size_t>>& pairs,
                     Tensor& out);

double sum(const Tensor& x);
double dot(const Tensor& x, const Tensor& y);

}  // namespace serial

void gemm(const Tensor& a, const Tensor& b, Tensor& out);
void gemm_tn(const Tensor& a, const Tensor& b, Tensor& out);
void gemm_nt(const Tensor& a, const Tensor& b, Tensor& out);

void matvec(const Tensor& a, const Tensor& x, Tensor& out);
void matvec_t(const Tensor& a, const Tensor& x, Tensor& out);

void add(const Tensor& a, const Tensor& b, Tensor& out);
void sub(const Tensor& a, const Tensor& b, Tensor& out);
void mul(const Tensor& a, const Tensor& b, Tensor& out);
void add_rowvec(const Tensor& a, const Tensor& row, Tensor& out);
void scale_shift(const Tensor& x, double scale, double shift, Tensor& out);

void map_tanh(const Tensor& x, Tensor& out);
void map_relu(const Tensor& x, Tensor& out);
void map_square(const Tensor& x, Tensor& out);

void transpose(const Tensor& a, Tensor& out);
void outer(const Tensor& x, const Tensor& y, Tensor& out);
void column_products(const Tensor& f,
                     const std::vector<std::pair<std::size_t, std::size_t>>& pairs,
                     Tensor& out);

double sum(const Tensor& x);
double dot(const Tensor& x, const Tensor& y);

}  // namespace afex::kernels

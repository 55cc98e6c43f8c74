#pragma once

#include <cstddef>
#include <vector>

namespace mwdlp {

// Dense row-major 2-D array of doubles. Row vectors are 1 x n.
struct Tensor {
    std::vector<double> v;
    int rows = 0;
    int cols = 0;

    Tensor() = default;
    Tensor(int r, int c, double fill = 0.0) : v(size_t(r) * size_t(c), fill), rows(r), cols(c) {}

    size_t size() const { return v.size(); }
    double& at(int r, int c) { return v[size_t(r) * cols + c]; }
    double at(int r, int c) const { return v[size_t(r) * cols + c]; }
    double* row(int r) { return v.data() + size_t(r) * cols; }
    const double* row(int r) const { return v.data() + size_t(r) * cols; }

    bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }
};

// y += x * w^T with w stored [out, in]; x is [n, in], y is [n, out].
void addmm_nt(const Tensor& x, const Tensor& w, Tensor& y);
// w_grad += dy^T-outer-x accumulation: dw[o,i] += sum_b dy[b,o] * x[b,i]
void accum_outer(const Tensor& dy, const Tensor& x, Tensor& dw);
// x_grad += dy * w with w stored [out, in]
void addmm_nn(const Tensor& dy, const Tensor& w, Tensor& dx);

}  // namespace mwdlp

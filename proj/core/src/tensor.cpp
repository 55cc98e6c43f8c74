#include "mwdlp/tensor.h"

namespace mwdlp {

void addmm_nt(const Tensor& x, const Tensor& w, Tensor& y) {
    const int n = x.rows, in = x.cols, out = w.rows;
    for (int b = 0; b < n; ++b) {
        const double* xb = x.row(b);
        double* yb = y.row(b);
        for (int o = 0; o < out; ++o) {
            const double* wo = w.row(o);
            double acc = 0.0;
            for (int i = 0; i < in; ++i) acc += xb[i] * wo[i];
            yb[o] += acc;
        }
    }
}

void accum_outer(const Tensor& dy, const Tensor& x, Tensor& dw) {
    const int n = x.rows, in = x.cols, out = dy.cols;
    for (int b = 0; b < n; ++b) {
        const double* xb = x.row(b);
        const double* db = dy.row(b);
        for (int o = 0; o < out; ++o) {
            const double g = db[o];
            if (g == 0.0) continue;
            double* wo = dw.row(o);
            for (int i = 0; i < in; ++i) wo[i] += g * xb[i];
        }
    }
}

void addmm_nn(const Tensor& dy, const Tensor& w, Tensor& dx) {
    const int n = dy.rows, out = dy.cols, in = w.cols;
    for (int b = 0; b < n; ++b) {
        const double* db = dy.row(b);
        double* xb = dx.row(b);
        for (int o = 0; o < out; ++o) {
            const double g = db[o];
            if (g == 0.0) continue;
            const double* wo = w.row(o);
            for (int i = 0; i < in; ++i) xb[i] += g * wo[i];
        }
    }
}

}  // namespace mwdlp

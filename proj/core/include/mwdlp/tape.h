#pragma once

#include <array>
#include <functional>
#include <span>
#include <vector>

#include "mwdlp/tensor.h"

namespace mwdlp {

// Handle into a Tape; invalid until assigned by a tape op.
struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

// Define-by-run reverse-mode tape over Tensor ops. A fresh tape is built per
// training step; creation order is the topological order, so backward() is a
// single reverse sweep. With grads disabled the same ops run forward-only.
//
// Tapes are not movable: backward closures capture node indices plus `this`.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    void set_grad_enabled(bool on) { grad_enabled_ = on; }
    bool grad_enabled() const { return grad_enabled_; }

    Var leaf(Tensor t, bool requires_grad = false);
    Var constant(Tensor t) { return leaf(std::move(t), false); }

    const Tensor& val(Var v) const { return nodes_[size_t(v.id)].value; }
    const Tensor& grad(Var v) const { return nodes_[size_t(v.id)].grad; }
    bool requires_grad(Var v) const { return nodes_[size_t(v.id)].requires_grad; }

    // Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse. `loss` must
    // be a 1x1 node.
    void backward(Var loss);

    size_t node_count() const { return nodes_.size(); }

    // --- affine ---
    Var linear(Var x, Var w, Var b);   // x[n,in] w[out,in] b[1,out] -> [n,out]
    Var matmul_nt(Var x, Var w);       // x[n,in] w[out,in] -> [n,out]

    // --- elementwise ---
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var scale(Var a, double c);
    Var add_scalar(Var a, double c);
    Var sigmoid(Var a);
    Var tanh_op(Var a);
    Var relu(Var a);
    Var exp_op(Var a);
    Var log_op(Var a);       // requires positive input
    Var sqrt_op(Var a);      // requires non-negative input
    Var square(Var a);
    Var abs_op(Var a);
    Var tanhshrink(Var a);   // x - tanh(x)
    Var clamp_min(Var a, double lo);
    Var mul_rowvec(Var x, Var v);   // x[n,c] * v[1,c] broadcast over rows

    // --- shape ---
    Var concat_cols(std::span<const Var> parts);
    Var concat_cols(std::initializer_list<Var> parts) {
        return concat_cols(std::span<const Var>(parts.begin(), parts.size()));
    }
    Var slice_cols(Var a, int c0, int c1);
    // [n, groups*c] -> [n*groups, c], row (b*groups + g) = x[b, g*c .. (g+1)*c)
    Var split_cols_to_rows(Var a, int groups);
    // Inverse of split_cols_to_rows: [n*groups, c] -> [n, groups*c].
    Var merge_rows_to_cols(Var a, int groups);

    // --- reductions ---
    Var sum_all(Var a);    // -> [1,1]
    Var mean_all(Var a);   // -> [1,1]
    Var sum_cols(Var a);   // [n,c] -> [n,1]

    // --- lookup ---
    Var gather_rows(Var table, std::vector<int> idx);  // table[r,c], idx[n] -> [n,c]

    // --- fused / domain ops ---
    // Mean over rows of -log softmax(logits)[target]; logits [n, bins].
    Var softmax_ce(Var logits, std::vector<int> targets);
    // Row-wise softmax with max subtraction. Rejects non-finite logits.
    Var softmax(Var logits);

    // o[n, bins] + sum_k a[n,k] * onehot(hist[n][k]); hist entries < 0 are
    // absent (stream start) and contribute nothing.
    Var lp_combine(Var o, Var a, std::vector<std::vector<int>> hist);

    struct Node {
        Tensor value;
        Tensor grad;
        std::function<void()> backward;
        bool requires_grad = false;
    };

    // For custom ops defined outside the class (sampler / loss modules).
    Var push(Tensor value, bool requires_grad, std::function<void()> backward_fn);
    Tensor& grad_ref(Var v);
    void ensure_grad(Var v);

private:
    std::vector<Node> nodes_;
    bool grad_enabled_ = true;
};

}  // namespace mwdlp

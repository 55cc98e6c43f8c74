#include "mwdlp/tape.h"

#include <cmath>
#include <stdexcept>

namespace mwdlp {

Var Tape::leaf(Tensor t, bool requires_grad) {
    return push(std::move(t), requires_grad && grad_enabled_, nullptr);
}

Var Tape::push(Tensor value, bool requires_grad, std::function<void()> backward_fn) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad && grad_enabled_;
    if (n.requires_grad) n.backward = std::move(backward_fn);
    nodes_.push_back(std::move(n));
    return Var{int(nodes_.size()) - 1};
}

Tensor& Tape::grad_ref(Var v) { return nodes_[size_t(v.id)].grad; }

void Tape::ensure_grad(Var v) {
    Node& n = nodes_[size_t(v.id)];
    if (n.grad.rows != n.value.rows || n.grad.cols != n.value.cols)
        n.grad = Tensor(n.value.rows, n.value.cols, 0.0);
}

void Tape::backward(Var loss) {
    if (!grad_enabled_) throw std::logic_error("backward on a no-grad tape");
    Node& top = nodes_[size_t(loss.id)];
    if (top.value.rows != 1 || top.value.cols != 1)
        throw std::invalid_argument("backward target must be a scalar node");
    ensure_grad(loss);
    top.grad.v[0] = 1.0;
    for (int i = loss.id; i >= 0; --i) {
        Node& n = nodes_[size_t(i)];
        if (n.requires_grad && n.backward && n.grad.size() > 0) n.backward();
    }
}

namespace {
bool any_requires(const Tape& t, std::initializer_list<Var> vs) {
    for (Var v : vs)
        if (v.valid() && t.requires_grad(v)) return true;
    return false;
}
}  // namespace

Var Tape::linear(Var x, Var w, Var b) {
    const Tensor& xv = val(x);
    const Tensor& wv = val(w);
    const Tensor& bv = val(b);
    if (xv.cols != wv.cols || bv.cols != wv.rows || bv.rows != 1)
        throw std::invalid_argument("linear: shape mismatch");
    Tensor out(xv.rows, wv.rows);
    for (int r = 0; r < out.rows; ++r)
        for (int c = 0; c < out.cols; ++c) out.at(r, c) = bv.at(0, c);
    addmm_nt(xv, wv, out);

    if (!grad_enabled_ || !any_requires(*this, {x, w, b}))
        return push(std::move(out), false, nullptr);

    Var y{int(nodes_.size())};
    auto bw = [this, x, w, b, y]() {
        const Tensor& dy = grad(y);
        if (requires_grad(x)) {
            ensure_grad(x);
            addmm_nn(dy, val(w), grad_ref(x));
        }
        if (requires_grad(w)) {
            ensure_grad(w);
            accum_outer(dy, val(x), grad_ref(w));
        }
        if (requires_grad(b)) {
            ensure_grad(b);
            Tensor& db = grad_ref(b);
            for (int r = 0; r < dy.rows; ++r)
                for (int c = 0; c < dy.cols; ++c) db.at(0, c) += dy.at(r, c);
        }
    };
    return push(std::move(out), true, std::move(bw));
}

Var Tape::matmul_nt(Var x, Var w) {
    const Tensor& xv = val(x);
    const Tensor& wv = val(w);
    if (xv.cols != wv.cols) throw std::invalid_argument("matmul_nt: shape mismatch");
    Tensor out(xv.rows, wv.rows, 0.0);
    addmm_nt(xv, wv, out);
    if (!grad_enabled_ || !any_requires(*this, {x, w})) return push(std::move(out), false, nullptr);
    Var y{int(nodes_.size())};
    auto bw = [this, x, w, y]() {
        const Tensor& dy = grad(y);
        if (requires_grad(x)) {
            ensure_grad(x);
            addmm_nn(dy, val(w), grad_ref(x));
        }
        if (requires_grad(w)) {
            ensure_grad(w);
            accum_outer(dy, val(x), grad_ref(w));
        }
    };
    return push(std::move(out), true, std::move(bw));
}

Var Tape::add(Var a, Var b) {
    const Tensor& av = val(a);
    const Tensor& bv = val(b);
    if (!av.same_shape(bv)) throw std::invalid_argument("add: shape mismatch");
    Tensor out = av;
    for (size_t i = 0; i < out.size(); ++i) out.v[i] += bv.v[i];
    if (!grad_enabled_ || !any_requires(*this, {a, b})) return push(std::move(out), false, nullptr);
    Var y{int(nodes_.size())};
    auto bw = [this, a, b, y]() {
        const Tensor& dy = grad(y);
        for (Var p : {a, b}) {
            if (!requires_grad(p)) continue;
            ensure_grad(p);
            Tensor& dp = grad_ref(p);
            for (size_t i = 0; i < dy.size(); ++i) dp.v[i] += dy.v[i];
        }
    };
    return push(std::move(out), true, std::move(bw));
}

Var Tape::sub(Var a, Var b) {
    const Tensor& av = val(a);
    const Tensor& bv = val(b);
    if (!av.same_shape(bv)) throw std::invalid_argument("sub: shape mismatch");
    Tensor out = av;
    for (size_t i = 0; i < out.size(); ++i) out.v[i] -= bv.v[i];
    if (!grad_enabled_ || !any_requires(*this, {a, b})) return push(std::move(out), false, nullptr);
    Var y{int(nodes_.size())};
    auto bw = [this, a, b, y]() {
        const Tensor& dy = grad(y);
        if (requires_grad(a)) {
            ensure_grad(a);
            Tensor& da = grad_ref(a);
            for (size_t i = 0; i < dy.size(); ++i) da.v[i] += dy.v[i];
        }
        if (requires_grad(b)) {
            ensure_grad(b);
            Tensor& db = grad_ref(b);
            for (size_t i = 0; i < dy.size(); ++i) db.v[i] -= dy.v[i];
        }
    };
    return push(std::move(out), true, std::move(bw));
}

Var Tape::mul(Var a, Var b) {
    const Tensor& av = val(a);
    const Tensor& bv = val(b);
    if (!av.same_shape(bv)) throw std::invalid_argument("mul: shape mismatch");
    Tensor out = av;
    for (size_t i = 0; i < out.size(); ++i) out.v[i] *= bv.v[i];
    if (!grad_enabled_ || !any_requires(*this, {a, b})) return push(std::move(out), false, nullptr);
    Var y{int(nodes_.size())};
    auto bw = [this, a, b, y]() {
        const Tensor& dy = grad(y);
        if (requires_grad(a)) {
            ensure_grad(a);
            Tensor& da = grad_ref(a);
            const Tensor& bv2 = val(b);
            for (size_t i = 0; i < dy.size(); ++i) da.v[i] += dy.v[i] * bv2.v[i];
        }
        if (requires_grad(b)) {
            ensure_grad(b);
            Tensor& db = grad_ref(b);
            const Tensor& av2 = val(a);
            for (size_t i = 0; i < dy.size(); ++i) db.v[i] += dy.v[i] * av2.v[i];
        }
    };
    return push(std::move(out), true, std::move(bw));
}

namespace {

template <typename F, typename DF>
Var unary_op(Tape& t, Var a, F f, DF dfdx_from_xy) {
    const Tensor& av = t.val(a);
    Tensor out = av;
    for (size_t i = 0; i < out.size(); ++i) out.v[i] = f(out.v[i]);
    if (!t.grad_enabled() || !t.requires_grad(a)) return t.push(std::move(out), false, nullptr);
    Var y{int(t.node_count())};
    auto bw = [&t, a, y, dfdx_from_xy]() {
        const Tensor& dy = t.grad(y);
        const Tensor& xv = t.val(a);
        const Tensor& yv = t.val(y);
        t.ensure_grad(a);
        Tensor& da = t.grad_ref(a);
        for (size_t i = 0; i < dy.size(); ++i) da.v[i] += dy.v[i] * dfdx_from_xy(xv.v[i], yv.v[i]);
    };
    return t.push(std::move(out), true, std::move(bw));
}

}  // namespace

Var Tape::scale(Var a, double c) {
    return unary_op(*this, a, [c](double x) { return c * x; },
                    [c](double, double) { return c; });
}

Var Tape::add_scalar(Var a, double c) {
    return unary_op(*this, a, [c](double x) { return x + c; },
                    [](double, double) { return 1.0; });
}

Var Tape::sigmoid(Var a) {
    return unary_op(*this, a,
                    [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
                    [](double, double y) { return y * (1.0 - y); });
}

Var Tape::tanh_op(Var a) {
    return unary_op(*this, a, [](double x) { return std::tanh(x); },
                    [](double, double y) { return 1.0 - y * y; });
}

Var Tape::relu(Var a) {
    return unary_op(*this, a, [](double x) { return x > 0.0 ? x : 0.0; },
                    [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var Tape::exp_op(Var a) {
    return unary_op(*this, a, [](double x) { return std::exp(x); },
                    [](double, double y) { return y; });
}

Var Tape::log_op(Var a) {
    return unary_op(*this, a, [](double x) { return std::log(x); },
                    [](double x, double) { return 1.0 / x; });
}

Var Tape::sqrt_op(Var a) {
    return unary_op(*this, a, [](double x) { return std::sqrt(x); },
                    [](double, double y) { return 0.5 / (y > 0.0 ? y : 1e-300); });
}

Var Tape::square(Var a) {
    return unary_op(*this, a, [](double x) { return x * x; },
                    [](double x, double) { return 2.0 * x; });
}

Var Tape::abs_op(Var a) {
    return unary_op(*this, a, [](double x) { return std::abs(x); },
                    [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var Tape::tanhshrink(Var a) {
    return unary_op(*this, a, [](double x) { return x - std::tanh(x); },
                    [](double x, double) {
                        const double th = std::tanh(x);
                        return th * th;
                    });
}

Var Tape::clamp_min(Var a, double lo) {
    return unary_op(*this, a, [lo](double x) { return x < lo ? lo : x; },
                    [lo](double x, double) { return x < lo ? 0.0 : 1.0; });
}

Var Tape::mul_rowvec(Var x, Var vvar) {
    const Tensor& xv = val(x);
    const Tensor& vv = val(vvar);
    if (vv.rows != 1 || vv.cols != xv.cols) throw std::invalid_argument("mul_rowvec: shape mismatch");
    Tensor out = xv;
    for (int r = 0; r < out.rows; ++r)
        for (int c = 0; c < out.cols; ++c) out.at(r, c) *= vv.at(0, c);
    if (!grad_enabled_ || !any_requires(*this, {x, vvar})) return push(std::move(out), false, nullptr);
    Var y{int(nodes_.size())};
    auto bw = [this, x, vvar, y]() {
        const Tensor& dy = grad(y);
        if (requires_grad(x)) {
            ensure_grad(x);
            Tensor& dx = grad_ref(x);
            const Tensor& vv2 = val(vvar);
            for (int r = 0; r < dy.rows; ++r)
                for (int c = 0; c < dy.cols; ++c) dx.at(r, c) += dy.at(r, c) * vv2.at(0, c);
        }
        if (requires_grad(vvar)) {
            ensure_grad(vvar);
            Tensor& dv = grad_ref(vvar);
            const Tensor& xv2 = val(x);
            for (int r = 0; r < dy.rows; ++r)
                for (int c = 0; c < dy.cols; ++c) dv.at(0, c) += dy.at(r, c) * xv2.at(r, c);
        }
    };
    return push(std::move(out), true, std::move(bw));
}

Var Tape::concat_cols(std::span<const Var> parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: no parts");
    const int rows = val(parts[0]).rows;
    int cols = 0;
    bool need = false;
    for (Var p : parts) {
        if (val(p).rows != rows) throw std::invalid_argument("concat_cols: row mismatch");
        cols += val(p).cols;
        need = need || requires_grad(p);
    }
    Tensor out(rows, cols);
    int off = 0;
    for (Var p : parts) {
        const Tensor& pv = val(p);
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < pv.cols; ++c) out.at(r, off + c) = pv.at(r, c);
        off += pv.cols;
    }
    if (!grad_enabled_ || !need) return push(std::move(out), false, nullptr);
    std::vector<Var> parts_copy(parts.begin(), parts.end());
    Var y{int(nodes_.size())};
    auto bw = [this, parts_copy, y]() {
        const Tensor& dy = grad(y);
        int off2 = 0;
        for (Var p : parts_copy) {
            const int pc = val(p).cols;
            if (requires_grad(p)) {
                ensure_grad(p);
                Tensor& dp = grad_ref(p);
                for (int r = 0; r < dy.rows; ++r)
                    for (int c = 0; c < pc; ++c) dp.at(r, c) += dy.at(r, off2 + c);
            }
            off2 += pc;
        }
    };
    return push(std::move(out), true, std::move(bw));
}

Var Tape::slice_cols(Var a, int c0, int c1) {
    const Tensor& av = val(a);
    if (c0 < 0 || c1 > av.cols || c0 >= c1) throw std::invalid_argument("slice_cols: bad range");
    Tensor out(av.rows, c1 - c0);
    for (int r = 0; r < av.rows; ++r)
        for (int c = c0; c < c1; ++c) out.at(r, c - c0) = av.at(r, c);
    if (!grad_enabled_ || !requires_grad(a)) return push(std::move(out), false, nullptr);
    Var y{int(nodes_.size())};
    auto bw = [this, a, c0, y]() {
        const Tensor& dy = grad(y);
        ensure_grad(a);
        Tensor& da = grad_ref(a);
        for (int r = 0; r < dy.rows; ++r)
            for (int c = 0; c < dy.cols; ++c) da.at(r, c0 + c) += dy.at(r, c);
    };
    return push(std::move(out), true, std::move(bw));
}

Var Tape::split_cols_to_rows(Var a, int groups) {
    const Tensor& av = val(a);
    if (av.cols % groups != 0) throw std::invalid_argument("split_cols_to_rows: cols not divisible");
    const int c = av.cols / groups;
    Tensor out(av.rows * groups, c);
    for (int r = 0; r < av.rows; ++r)
        for (int g = 0; g < groups; ++g)
            for (int j = 0; j < c; ++j) out.at(r * groups + g, j) = av.at(r, g * c + j);
    if (!grad_enabled_ || !requires_grad(a)) return push(std::move(out), false, nullptr);
    Var y{int(nodes_.size())};
    auto bw = [this, a, groups, c, y]() {
        const Tensor& dy = grad(y);
        ensure_grad(a);
        Tensor& da = grad_ref(a);
        for (int r = 0; r < da.rows; ++r)
            for (int g = 0; g < groups; ++g)
                for (int j = 0; j < c; ++j) da.at(r, g * c + j) += dy.at(r * groups + g, j);
    };
    return push(std::move(out), true, std::move(bw));
}

Var Tape::merge_rows_to_cols(Var a, int groups) {
    const Tensor& av = val(a);
    if (av.rows % groups != 0) throw std::invalid_argument("merge_rows_to_cols: rows not divisible");
    const int n = av.rows / groups;
    const int c = av.cols;
    Tensor out(n, groups * c);
    for (int r = 0; r < n; ++r)
        for (int g = 0; g < groups; ++g)
            for (int j = 0; j < c; ++j) out.at(r, g * c + j) = av.at(r * groups + g, j);
    if (!grad_enabled_ || !requires_grad(a)) return push(std::move(out), false, nullptr);
    Var y{int(nodes_.size())};
    auto bw = [this, a, groups, c, n, y]() {
        const Tensor& dy = grad(y);
        ensure_grad(a);
        Tensor& da = grad_ref(a);
        for (int r = 0; r < n; ++r)
            for (int g = 0; g < groups; ++g)
                for (int j = 0; j < c; ++j) da.at(r * groups + g, j) += dy.at(r, g * c + j);
    };
    return push(std::move(out), true, std::move(bw));
}

Var Tape::sum_all(Var a) {
    const Tensor& av = val(a);
    double s = 0.0;
    for (double x : av.v) s += x;
    Tensor out(1, 1, s);
    if (!grad_enabled_ || !requires_grad(a)) return push(std::move(out), false, nullptr);
    Var y{int(nodes_.size())};
    auto bw = [this, a, y]() {
        const double g = grad(y).v[0];
        ensure_grad(a);
        for (double& d : grad_ref(a).v) d += g;
    };
    return push(std::move(out), true, std::move(bw));
}

Var Tape::mean_all(Var a) {
    const double inv = 1.0 / double(val(a).size());
    return scale(sum_all(a), inv);
}

Var Tape::sum_cols(Var a) {
    const Tensor& av = val(a);
    Tensor out(av.rows, 1);
    for (int r = 0; r < av.rows; ++r) {
        double s = 0.0;
        for (int c = 0; c < av.cols; ++c) s += av.at(r, c);
        out.at(r, 0) = s;
    }
    if (!grad_enabled_ || !requires_grad(a)) return push(std::move(out), false, nullptr);
    Var y{int(nodes_.size())};
    auto bw = [this, a, y]() {
        const Tensor& dy = grad(y);
        ensure_grad(a);
        Tensor& da = grad_ref(a);
        for (int r = 0; r < da.rows; ++r) {
            const double g = dy.at(r, 0);
            for (int c = 0; c < da.cols; ++c) da.at(r, c) += g;
        }
    };
    return push(std::move(out), true, std::move(bw));
}

Var Tape::gather_rows(Var table, std::vector<int> idx) {
    const Tensor& tv = val(table);
    Tensor out(int(idx.size()), tv.cols);
    for (size_t n = 0; n < idx.size(); ++n) {
        if (idx[n] < 0 || idx[n] >= tv.rows) throw std::out_of_range("gather_rows: bad index");
        for (int c = 0; c < tv.cols; ++c) out.at(int(n), c) = tv.at(idx[n], c);
    }
    if (!grad_enabled_ || !requires_grad(table)) return push(std::move(out), false, nullptr);
    Var y{int(nodes_.size())};
    auto bw = [this, table, idx = std::move(idx), y]() {
        const Tensor& dy = grad(y);
        ensure_grad(table);
        Tensor& dt = grad_ref(table);
        for (size_t n = 0; n < idx.size(); ++n)
            for (int c = 0; c < dy.cols; ++c) dt.at(idx[n], c) += dy.at(int(n), c);
    };
    return push(std::move(out), true, std::move(bw));
}

Var Tape::softmax(Var logits) {
    const Tensor& lv = val(logits);
    Tensor out(lv.rows, lv.cols);
    for (int r = 0; r < lv.rows; ++r) {
        double mx = -1e300;
        for (int c = 0; c < lv.cols; ++c) {
            if (!std::isfinite(lv.at(r, c))) throw std::domain_error("softmax: non-finite logit");
            mx = std::max(mx, lv.at(r, c));
        }
        double z = 0.0;
        for (int c = 0; c < lv.cols; ++c) {
            out.at(r, c) = std::exp(lv.at(r, c) - mx);
            z += out.at(r, c);
        }
        for (int c = 0; c < lv.cols; ++c) out.at(r, c) /= z;
    }
    if (!grad_enabled_ || !requires_grad(logits)) return push(std::move(out), false, nullptr);
    Var y{int(nodes_.size())};
    auto bw = [this, logits, y]() {
        const Tensor& dy = grad(y);
        const Tensor& p = val(y);
        ensure_grad(logits);
        Tensor& dl = grad_ref(logits);
        for (int r = 0; r < p.rows; ++r) {
            double dot = 0.0;
            for (int c = 0; c < p.cols; ++c) dot += dy.at(r, c) * p.at(r, c);
            for (int c = 0; c < p.cols; ++c)
                dl.at(r, c) += p.at(r, c) * (dy.at(r, c) - dot);
        }
    };
    return push(std::move(out), true, std::move(bw));
}

Var Tape::softmax_ce(Var logits, std::vector<int> targets) {
    const Tensor& lv = val(logits);
    if (int(targets.size()) != lv.rows) throw std::invalid_argument("softmax_ce: target count");
    Tensor probs(lv.rows, lv.cols);
    double nll = 0.0;
    for (int r = 0; r < lv.rows; ++r) {
        if (targets[size_t(r)] < 0 || targets[size_t(r)] >= lv.cols)
            throw std::out_of_range("softmax_ce: target out of range");
        double mx = -1e300;
        for (int c = 0; c < lv.cols; ++c) {
            if (!std::isfinite(lv.at(r, c))) throw std::domain_error("softmax_ce: non-finite logit");
            mx = std::max(mx, lv.at(r, c));
        }
        double z = 0.0;
        for (int c = 0; c < lv.cols; ++c) {
            probs.at(r, c) = std::exp(lv.at(r, c) - mx);
            z += probs.at(r, c);
        }
        for (int c = 0; c < lv.cols; ++c) probs.at(r, c) /= z;
        nll -= std::log(std::max(probs.at(r, targets[size_t(r)]), 1e-300));
    }
    Tensor out(1, 1, nll / lv.rows);
    if (!grad_enabled_ || !requires_grad(logits)) return push(std::move(out), false, nullptr);
    Var y{int(nodes_.size())};
    auto bw = [this, logits, probs = std::move(probs), targets = std::move(targets), y]() {
        const double g = grad(y).v[0] / probs.rows;
        ensure_grad(logits);
        Tensor& dl = grad_ref(logits);
        for (int r = 0; r < probs.rows; ++r)
            for (int c = 0; c < probs.cols; ++c)
                dl.at(r, c) += g * (probs.at(r, c) - (c == targets[size_t(r)] ? 1.0 : 0.0));
    };
    return push(std::move(out), true, std::move(bw));
}

Var Tape::lp_combine(Var o, Var a, std::vector<std::vector<int>> hist) {
    const Tensor& ov = val(o);
    const Tensor& av = val(a);
    if (av.rows != ov.rows || int(hist.size()) != ov.rows)
        throw std::invalid_argument("lp_combine: row mismatch");
    Tensor out = ov;
    for (int r = 0; r < ov.rows; ++r) {
        if (int(hist[size_t(r)].size()) != av.cols)
            throw std::invalid_argument("lp_combine: history length != K");
        for (int k = 0; k < av.cols; ++k) {
            const int bin = hist[size_t(r)][size_t(k)];
            if (bin < 0) continue;  // absent history at stream start
            if (bin >= ov.cols) throw std::out_of_range("lp_combine: bin out of range");
            out.at(r, bin) += av.at(r, k);
        }
    }
    if (!grad_enabled_ || !any_requires(*this, {o, a})) return push(std::move(out), false, nullptr);
    Var y{int(nodes_.size())};
    auto bw = [this, o, a, hist = std::move(hist), y]() {
        const Tensor& dy = grad(y);
        if (requires_grad(o)) {
            ensure_grad(o);
            Tensor& dov = grad_ref(o);
            for (size_t i = 0; i < dy.size(); ++i) dov.v[i] += dy.v[i];
        }
        if (requires_grad(a)) {
            ensure_grad(a);
            Tensor& dav = grad_ref(a);
            for (int r = 0; r < dy.rows; ++r)
                for (int k = 0; k < dav.cols; ++k) {
                    const int bin = hist[size_t(r)][size_t(k)];
                    if (bin >= 0) dav.at(r, k) += dy.at(r, bin);
                }
        }
    };
    return push(std::move(out), true, std::move(bw));
}

}  // namespace mwdlp

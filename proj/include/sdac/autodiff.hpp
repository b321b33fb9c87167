#pragma once
// Minimal reverse-mode tape over Tensor. Each op records its forward value
// and a backward closure; backward() replays closures in reverse creation
// order. No control flow, no reuse across backward passes beyond zero_grad().

#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "sdac/tensor.hpp"

namespace sdac {

struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

class Tape {
  public:
    Var leaf(Tensor v) { return push(std::move(v), nullptr); }

    const Tensor& value(Var v) const { return node(v).value; }
    const Tensor& grad(Var v) const { return node(v).grad; }

    Var add(Var a, Var b) {
        Tensor out = sdac::add(value(a), value(b));
        return push(std::move(out), [this, a, b](const Tensor& g) {
            accumulate(a, g);
            accumulate(b, g);
        });
    }

    Var sub(Var a, Var b) {
        Tensor out = sdac::sub(value(a), value(b));
        return push(std::move(out), [this, a, b](const Tensor& g) {
            accumulate(a, g);
            accumulate(b, sdac::scale(g, -1.0));
        });
    }

    Var mul(Var a, Var b) {
        Tensor out = sdac::mul(value(a), value(b));
        return push(std::move(out), [this, a, b](const Tensor& g) {
            accumulate(a, sdac::mul(g, value(b)));
            accumulate(b, sdac::mul(g, value(a)));
        });
    }

    Var scale(Var a, double c) {
        return push(sdac::scale(value(a), c), [this, a, c](const Tensor& g) {
            accumulate(a, sdac::scale(g, c));
        });
    }

    Var matmul(Var a, Var b) {
        Tensor out = sdac::matmul(value(a), value(b));
        return push(std::move(out), [this, a, b](const Tensor& g) {
            // dA = g * B^T, dB = A^T * g
            const Tensor& A = value(a);
            const Tensor& B = value(b);
            Tensor da({A.rows(), A.cols()});
            for (std::size_t i = 0; i < A.rows(); ++i)
                for (std::size_t j = 0; j < B.cols(); ++j) {
                    const double gv = g.at(i, j);
                    if (gv == 0.0) continue;
                    for (std::size_t p = 0; p < A.cols(); ++p)
                        da.at(i, p) += gv * B.at(p, j);
                }
            Tensor db({B.rows(), B.cols()});
            for (std::size_t i = 0; i < A.rows(); ++i)
                for (std::size_t p = 0; p < A.cols(); ++p) {
                    const double av = A.at(i, p);
                    if (av == 0.0) continue;
                    for (std::size_t j = 0; j < B.cols(); ++j)
                        db.at(p, j) += av * g.at(i, j);
                }
            accumulate(a, da);
            accumulate(b, db);
        });
    }

    // a[m,n] + v[n], v broadcast over rows.
    Var add_rowvec(Var a, Var v) {
        const Tensor& A = value(a);
        const Tensor& V = value(v);
        if (A.shape.size() != 2 || V.numel() != A.cols())
            throw std::invalid_argument("add_rowvec: shape mismatch");
        Tensor out = A;
        for (std::size_t i = 0; i < A.rows(); ++i)
            for (std::size_t j = 0; j < A.cols(); ++j)
                out.at(i, j) += V[j];
        return push(std::move(out), [this, a, v](const Tensor& g) {
            accumulate(a, g);
            Tensor dv({value(v).numel()});
            for (std::size_t i = 0; i < g.rows(); ++i)
                for (std::size_t j = 0; j < g.cols(); ++j)
                    dv[j] += g.at(i, j);
            accumulate(v, dv);
        });
    }

    Var tanh_(Var a) {
        Tensor out = value(a);
        for (double& x : out.data) x = std::tanh(x);
        Var r = push(std::move(out), nullptr);
        node(r).backward = [this, a, r](const Tensor& g) {
            const Tensor& y = value(r);
            Tensor da = g;
            for (std::size_t i = 0; i < da.numel(); ++i)
                da.data[i] *= 1.0 - y.data[i] * y.data[i];
            accumulate(a, da);
        };
        return r;
    }

    // Scalar sum of squares.
    Var sum_sq(Var a) {
        Tensor out({std::size_t(1)});
        out[0] = sdac::sum_sq(value(a));
        return push(std::move(out), [this, a](const Tensor& g) {
            accumulate(a, sdac::scale(value(a), 2.0 * g[0]));
        });
    }

    Var sum(Var a) {
        Tensor out({std::size_t(1)});
        out[0] = sdac::sum(value(a));
        return push(std::move(out), [this, a](const Tensor& g) {
            accumulate(a, Tensor(value(a).shape, g[0]));
        });
    }

    // Value passes through, gradient is blocked.
    Var stop_grad(Var a) { return push(value(a), nullptr); }

    // out[i, :] = table[idx[i], :]; backward scatter-adds into the table.
    Var gather_rows(Var table, std::vector<std::size_t> idx) {
        const Tensor& T = value(table);
        if (T.shape.size() != 2) throw std::invalid_argument("gather_rows: table not 2-D");
        const std::size_t cols = T.cols();
        Tensor out({idx.size(), cols});
        for (std::size_t i = 0; i < idx.size(); ++i) {
            if (idx[i] >= T.rows()) throw std::out_of_range("gather_rows: index");
            for (std::size_t j = 0; j < cols; ++j)
                out.at(i, j) = T.at(idx[i], j);
        }
        return push(std::move(out), [this, table, idx = std::move(idx)](const Tensor& g) {
            Tensor dt(value(table).shape);
            const std::size_t cols = dt.cols();
            for (std::size_t i = 0; i < idx.size(); ++i)
                for (std::size_t j = 0; j < cols; ++j)
                    dt.at(idx[i], j) += g.at(i, j);
            accumulate(table, dt);
        });
    }

    // Per-element expansion s[i] -> q-vector via the channel's affine map.
    // s is flat [N] (or [B, L]); position i belongs to channel ((i % L) / hw).
    // W, b are [C, q]. Output is [N, q].
    Var group_affine_expand(Var s, Var W, Var b, std::size_t latent_len, std::size_t hw) {
        const Tensor& S = value(s);
        const Tensor& Wt = value(W);
        const Tensor& Bt = value(b);
        const std::size_t q = Wt.cols();
        const std::size_t channels = Wt.rows();
        if (!Bt.same_shape(Wt) || latent_len != channels * hw || S.numel() % latent_len != 0)
            throw std::invalid_argument("group_affine_expand: shape mismatch");
        const std::size_t n = S.numel();
        Tensor out({n, q});
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t ch = (i % latent_len) / hw;
            for (std::size_t j = 0; j < q; ++j)
                out.at(i, j) = S.data[i] * Wt.at(ch, j) + Bt.at(ch, j);
        }
        return push(std::move(out), [this, s, W, b, latent_len, hw](const Tensor& g) {
            const Tensor& S = value(s);
            const Tensor& Wt = value(W);
            const std::size_t q = Wt.cols();
            Tensor ds(S.shape);
            Tensor dW(Wt.shape);
            Tensor db(Wt.shape);
            for (std::size_t i = 0; i < S.numel(); ++i) {
                const std::size_t ch = (i % latent_len) / hw;
                for (std::size_t j = 0; j < q; ++j) {
                    const double gv = g.at(i, j);
                    ds.data[i] += gv * Wt.at(ch, j);
                    dW.at(ch, j) += gv * S.data[i];
                    db.at(ch, j) += gv;
                }
            }
            accumulate(s, ds);
            accumulate(W, dW);
            accumulate(b, db);
        });
    }

    // Inverse map: out[i] = sum_j in[i,j] * V[ch(i), j] + d[ch(i)].
    // Output shape mirrors `like_shape` (the original latent layout).
    Var group_affine_combine(Var sp, Var V, Var d, std::size_t latent_len, std::size_t hw,
                             std::vector<std::size_t> like_shape) {
        const Tensor& In = value(sp);
        const Tensor& Vt = value(V);
        const Tensor& Dt = value(d);
        const std::size_t q = Vt.cols();
        if (In.shape.size() != 2 || In.cols() != q || Dt.numel() != Vt.rows() ||
            latent_len != Vt.rows() * hw)
            throw std::invalid_argument("group_affine_combine: shape mismatch");
        const std::size_t n = In.rows();
        Tensor out(std::move(like_shape));
        if (out.numel() != n)
            throw std::invalid_argument("group_affine_combine: output shape mismatch");
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t ch = (i % latent_len) / hw;
            double acc = Dt[ch];
            for (std::size_t j = 0; j < q; ++j) acc += In.at(i, j) * Vt.at(ch, j);
            out.data[i] = acc;
        }
        return push(std::move(out), [this, sp, V, d, latent_len, hw](const Tensor& g) {
            const Tensor& In = value(sp);
            const Tensor& Vt = value(V);
            const std::size_t q = Vt.cols();
            Tensor din(In.shape);
            Tensor dV(Vt.shape);
            Tensor dd(value(d).shape);
            for (std::size_t i = 0; i < In.rows(); ++i) {
                const std::size_t ch = (i % latent_len) / hw;
                const double gv = g.data[i];
                dd[ch] += gv;
                for (std::size_t j = 0; j < q; ++j) {
                    din.at(i, j) += gv * Vt.at(ch, j);
                    dV.at(ch, j) += gv * In.at(i, j);
                }
            }
            accumulate(sp, din);
            accumulate(V, dV);
            accumulate(d, dd);
        });
    }

    void backward(Var root) {
        if (value(root).numel() != 1)
            throw std::invalid_argument("backward: root must be scalar");
        node(root).grad[0] = 1.0;
        for (int i = root.id; i >= 0; --i)
            if (nodes_[std::size_t(i)].backward)
                nodes_[std::size_t(i)].backward(nodes_[std::size_t(i)].grad);
    }

    void zero_grad() {
        for (auto& n : nodes_)
            std::fill(n.grad.data.begin(), n.grad.data.end(), 0.0);
    }

    std::size_t size() const { return nodes_.size(); }

  private:
    struct Node {
        Tensor value;
        Tensor grad;
        std::function<void(const Tensor&)> backward;
    };

    Node& node(Var v) { return nodes_.at(std::size_t(v.id)); }
    const Node& node(Var v) const { return nodes_.at(std::size_t(v.id)); }

    Var push(Tensor v, std::function<void(const Tensor&)> bwd) {
        Node n;
        n.grad = Tensor(v.shape);
        n.value = std::move(v);
        n.backward = std::move(bwd);
        nodes_.push_back(std::move(n));
        return Var{int(nodes_.size()) - 1};
    }

    void accumulate(Var v, const Tensor& g) {
        Tensor& dst = node(v).grad;
        check_same_shape(dst, g, "accumulate");
        for (std::size_t i = 0; i < dst.numel(); ++i) dst.data[i] += g.data[i];
    }

    std::vector<Node> nodes_;
};

// Central-difference gradient verification.
// f is evaluated at perturbed copies of `params`; returns the max over all
// entries of |fd - analytic| / max(1, |analytic|). Throws if f goes non-finite.
inline double grad_check(const std::function<double(const std::vector<Tensor>&)>& f,
                         std::vector<Tensor> params,
                         const std::vector<Tensor>& analytic, double eps) {
    if (eps < 1e-7 || eps > 1e-3)
        throw std::invalid_argument("grad_check: eps out of [1e-7, 1e-3]");
    if (params.size() != analytic.size())
        throw std::invalid_argument("grad_check: param/gradient count mismatch");
    double worst = 0.0;
    for (std::size_t p = 0; p < params.size(); ++p) {
        check_same_shape(params[p], analytic[p], "grad_check");
        for (std::size_t i = 0; i < params[p].numel(); ++i) {
            const double saved = params[p].data[i];
            params[p].data[i] = saved + eps;
            const double fp = f(params);
            params[p].data[i] = saved - eps;
            const double fm = f(params);
            params[p].data[i] = saved;
            if (!std::isfinite(fp) || !std::isfinite(fm))
                throw std::runtime_error("grad_check: non-finite objective at test point");
            const double fd = (fp - fm) / (2.0 * eps);
            const double a = analytic[p].data[i];
            const double rel = std::fabs(fd - a) / std::max(1.0, std::fabs(a));
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

}  // namespace sdac

#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

#include "firzen/core/matrix.hpp"
#include "firzen/core/rng.hpp"

namespace firzen::ad {

// Handle into a Tape. Cheap to copy, valid for the tape's lifetime.
struct Var {
    int idx = -1;
    bool valid() const { return idx >= 0; }
};

// Reverse-mode tape over dense matrices. One tape per forward pass; call
// backward() once on a 1x1 result, then read grad() of the parameter nodes.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(Mat m) { return push(std::move(m), false); }
    Var param(const Mat& m) { return push(m, true); }

    const Mat& val(Var v) const { return nodes_[check(v)].val; }
    const Mat& grad(Var v) const { return nodes_[check(v)].grad; }
    bool requires_grad(Var v) const { return nodes_[check(v)].requires_grad; }

    std::size_t size() const { return nodes_.size(); }

    void backward(Var loss) {
        Node& out = nodes_[check(loss)];
        if (out.val.rows() != 1 || out.val.cols() != 1)
            throw std::logic_error("backward: loss must be 1x1");
        out.grad(0, 0) = 1.0;
        for (std::size_t i = nodes_.size(); i-- > 0;)
            if (nodes_[i].backward) nodes_[i].backward();
    }

    // ---- elementwise ----

    Var add(Var a, Var b) {
        const Mat &A = val(a), &B = val(b);
        require_same_shape(A, B, "add");
        Mat out = A;
        for (std::size_t i = 0; i < out.size(); ++i) out.raw()[i] += B.raw()[i];
        return unary_or_binary(std::move(out), a, b, [this](Var a, Var b, Var y) {
            accumulate(a, [&](Mat& g) { axpy(g, 1.0, grad(y)); });
            accumulate(b, [&](Mat& g) { axpy(g, 1.0, grad(y)); });
        });
    }

    Var sub(Var a, Var b) {
        const Mat &A = val(a), &B = val(b);
        require_same_shape(A, B, "sub");
        Mat out = A;
        for (std::size_t i = 0; i < out.size(); ++i) out.raw()[i] -= B.raw()[i];
        return unary_or_binary(std::move(out), a, b, [this](Var a, Var b, Var y) {
            accumulate(a, [&](Mat& g) { axpy(g, 1.0, grad(y)); });
            accumulate(b, [&](Mat& g) { axpy(g, -1.0, grad(y)); });
        });
    }

    Var hadamard(Var a, Var b) {
        const Mat &A = val(a), &B = val(b);
        require_same_shape(A, B, "hadamard");
        Mat out = A;
        for (std::size_t i = 0; i < out.size(); ++i) out.raw()[i] *= B.raw()[i];
        return unary_or_binary(std::move(out), a, b, [this](Var a, Var b, Var y) {
            accumulate(a, [&](Mat& g) {
                const Mat &gy = grad(y), &B = val(b);
                for (std::size_t i = 0; i < g.size(); ++i) g.raw()[i] += gy.raw()[i] * B.raw()[i];
            });
            accumulate(b, [&](Mat& g) {
                const Mat &gy = grad(y), &A = val(a);
                for (std::size_t i = 0; i < g.size(); ++i) g.raw()[i] += gy.raw()[i] * A.raw()[i];
            });
        });
    }

    Var scale(Var a, double s) {
        Mat out = val(a);
        for (double& v : out.raw()) v *= s;
        return unary(std::move(out), a, [this, s](Var a, Var y) {
            accumulate(a, [&](Mat& g) { axpy(g, s, grad(y)); });
        });
    }

    Var add_const(Var a, double c) {
        Mat out = val(a);
        for (double& v : out.raw()) v += c;
        return unary(std::move(out), a, [this](Var a, Var y) {
            accumulate(a, [&](Mat& g) { axpy(g, 1.0, grad(y)); });
        });
    }

    Var tanh_(Var a) {
        Mat out = val(a);
        for (double& v : out.raw()) v = std::tanh(v);
        return unary(std::move(out), a, [this](Var a, Var y) {
            accumulate(a, [&](Mat& g) {
                const Mat &gy = grad(y), &Y = val(y);
                for (std::size_t i = 0; i < g.size(); ++i)
                    g.raw()[i] += gy.raw()[i] * (1.0 - Y.raw()[i] * Y.raw()[i]);
            });
        });
    }

    Var sigmoid_(Var a) {
        Mat out = val(a);
        for (double& v : out.raw()) v = 1.0 / (1.0 + std::exp(-v));
        return unary(std::move(out), a, [this](Var a, Var y) {
            accumulate(a, [&](Mat& g) {
                const Mat &gy = grad(y), &Y = val(y);
                for (std::size_t i = 0; i < g.size(); ++i)
                    g.raw()[i] += gy.raw()[i] * Y.raw()[i] * (1.0 - Y.raw()[i]);
            });
        });
    }

    Var leaky_relu(Var a, double slope) {
        Mat out = val(a);
        for (double& v : out.raw()) v = v > 0.0 ? v : slope * v;
        return unary(std::move(out), a, [this, slope, a](Var av, Var y) {
            accumulate(av, [&](Mat& g) {
                const Mat &gy = grad(y), &A = val(a);
                for (std::size_t i = 0; i < g.size(); ++i)
                    g.raw()[i] += gy.raw()[i] * (A.raw()[i] > 0.0 ? 1.0 : slope);
            });
        });
    }

    Var exp_(Var a) {
        Mat out = val(a);
        for (double& v : out.raw()) v = std::exp(v);
        return unary(std::move(out), a, [this](Var a, Var y) {
            accumulate(a, [&](Mat& g) {
                const Mat &gy = grad(y), &Y = val(y);
                for (std::size_t i = 0; i < g.size(); ++i) g.raw()[i] += gy.raw()[i] * Y.raw()[i];
            });
        });
    }

    Var log_(Var a) {
        Mat out = val(a);
        for (double& v : out.raw()) v = std::log(v);
        return unary(std::move(out), a, [this](Var a, Var y) {
            accumulate(a, [&](Mat& g) {
                const Mat &gy = grad(y), &A = val(a);
                for (std::size_t i = 0; i < g.size(); ++i) g.raw()[i] += gy.raw()[i] / A.raw()[i];
            });
        });
    }

    Var sqrt_(Var a) {
        Mat out = val(a);
        for (double& v : out.raw()) v = std::sqrt(v);
        return unary(std::move(out), a, [this](Var a, Var y) {
            accumulate(a, [&](Mat& g) {
                const Mat &gy = grad(y), &Y = val(y);
                for (std::size_t i = 0; i < g.size(); ++i)
                    g.raw()[i] += Y.raw()[i] > 0.0 ? gy.raw()[i] * 0.5 / Y.raw()[i] : 0.0;
            });
        });
    }

    Var abs_(Var a) {
        Mat out = val(a);
        for (double& v : out.raw()) v = std::fabs(v);
        return unary(std::move(out), a, [this](Var a, Var y) {
            accumulate(a, [&](Mat& g) {
                const Mat &gy = grad(y), &A = val(a);
                for (std::size_t i = 0; i < g.size(); ++i)
                    g.raw()[i] += gy.raw()[i] * (A.raw()[i] >= 0.0 ? 1.0 : -1.0);
            });
        });
    }

    // ---- matrix products ----

    Var matmul_(Var a, Var b) {
        Mat out = matmul(val(a), val(b));
        return unary_or_binary(std::move(out), a, b, [this](Var a, Var b, Var y) {
            accumulate(a, [&](Mat& g) { add_matmul_nt(g, grad(y), val(b)); });
            accumulate(b, [&](Mat& g) { add_matmul_tn(g, val(a), grad(y)); });
        });
    }

    // y = S x with constant sparse S; st must be S transposed and outlive the tape
    Var spmm(const Csr* s, const Csr* st, Var x) {
        Mat out = s->multiply(val(x));
        return unary(std::move(out), x, [this, st](Var x, Var y) {
            accumulate(x, [&](Mat& g) {
                Mat gx = st->multiply(grad(y));
                axpy(g, 1.0, gx);
            });
        });
    }

    // ---- shape ops ----

    Var transpose_(Var a) {
        Mat out = transpose(val(a));
        return unary(std::move(out), a, [this](Var a, Var y) {
            accumulate(a, [&](Mat& g) {
                Mat gt = transpose(grad(y));
                axpy(g, 1.0, gt);
            });
        });
    }

    Var gather_rows(Var a, std::vector<std::size_t> idx) {
        const Mat& A = val(a);
        Mat out(idx.size(), A.cols());
        for (std::size_t i = 0; i < idx.size(); ++i)
            for (std::size_t j = 0; j < A.cols(); ++j) out(i, j) = A(idx[i], j);
        return unary(std::move(out), a, [this, idx = std::move(idx)](Var a, Var y) {
            accumulate(a, [&](Mat& g) {
                const Mat& gy = grad(y);
                for (std::size_t i = 0; i < idx.size(); ++i)
                    for (std::size_t j = 0; j < g.cols(); ++j) g(idx[i], j) += gy(i, j);
            });
        });
    }

    Var col_slice(Var a, std::size_t start, std::size_t len) {
        const Mat& A = val(a);
        Mat out(A.rows(), len);
        for (std::size_t i = 0; i < A.rows(); ++i)
            for (std::size_t j = 0; j < len; ++j) out(i, j) = A(i, start + j);
        return unary(std::move(out), a, [this, start, len](Var a, Var y) {
            accumulate(a, [&](Mat& g) {
                const Mat& gy = grad(y);
                for (std::size_t i = 0; i < g.rows(); ++i)
                    for (std::size_t j = 0; j < len; ++j) g(i, start + j) += gy(i, j);
            });
        });
    }

    Var hcat(const std::vector<Var>& parts) {
        std::size_t rows = val(parts.at(0)).rows(), cols = 0;
        for (Var p : parts) cols += val(p).cols();
        Mat out(rows, cols);
        std::size_t off = 0;
        for (Var p : parts) {
            const Mat& P = val(p);
            for (std::size_t i = 0; i < rows; ++i)
                for (std::size_t j = 0; j < P.cols(); ++j) out(i, off + j) = P(i, j);
            off += P.cols();
        }
        bool rg = false;
        for (Var p : parts) rg |= requires_grad(p);
        Var y = push(std::move(out), rg);
        if (rg) {
            nodes_[y.idx].backward = [this, parts, y]() {
                std::size_t off = 0;
                for (Var p : parts) {
                    std::size_t w = val(p).cols();
                    accumulate(p, [&](Mat& g) {
                        const Mat& gy = grad(y);
                        for (std::size_t i = 0; i < g.rows(); ++i)
                            for (std::size_t j = 0; j < w; ++j) g(i, j) += gy(i, off + j);
                    });
                    off += w;
                }
            };
        }
        return y;
    }

    Var vcat(const std::vector<Var>& parts) {
        std::size_t cols = val(parts.at(0)).cols(), rows = 0;
        for (Var p : parts) rows += val(p).rows();
        Mat out(rows, cols);
        std::size_t off = 0;
        for (Var p : parts) {
            const Mat& P = val(p);
            for (std::size_t i = 0; i < P.rows(); ++i)
                for (std::size_t j = 0; j < cols; ++j) out(off + i, j) = P(i, j);
            off += P.rows();
        }
        bool rg = false;
        for (Var p : parts) rg |= requires_grad(p);
        Var y = push(std::move(out), rg);
        if (rg) {
            nodes_[y.idx].backward = [this, parts, y]() {
                std::size_t off = 0;
                for (Var p : parts) {
                    std::size_t h = val(p).rows();
                    accumulate(p, [&](Mat& g) {
                        const Mat& gy = grad(y);
                        for (std::size_t i = 0; i < h; ++i)
                            for (std::size_t j = 0; j < g.cols(); ++j) g(i, j) += gy(off + i, j);
                    });
                    off += h;
                }
            };
        }
        return y;
    }

    // broadcast 1 x d row over all rows of a
    Var add_rowvec(Var a, Var b) {
        const Mat &A = val(a), &B = val(b);
        if (B.rows() != 1 || B.cols() != A.cols())
            throw std::invalid_argument("add_rowvec: shape mismatch");
        Mat out = A;
        for (std::size_t i = 0; i < A.rows(); ++i)
            for (std::size_t j = 0; j < A.cols(); ++j) out(i, j) += B(0, j);
        return unary_or_binary(std::move(out), a, b, [this](Var a, Var b, Var y) {
            accumulate(a, [&](Mat& g) { axpy(g, 1.0, grad(y)); });
            accumulate(b, [&](Mat& g) {
                const Mat& gy = grad(y);
                for (std::size_t i = 0; i < gy.rows(); ++i)
                    for (std::size_t j = 0; j < gy.cols(); ++j) g(0, j) += gy(i, j);
            });
        });
    }

    // scale row i of a by column vector v(i, 0)
    Var mul_colvec(Var a, Var v) {
        const Mat &A = val(a), &V = val(v);
        if (V.cols() != 1 || V.rows() != A.rows())
            throw std::invalid_argument("mul_colvec: shape mismatch");
        Mat out = A;
        for (std::size_t i = 0; i < A.rows(); ++i)
            for (std::size_t j = 0; j < A.cols(); ++j) out(i, j) *= V(i, 0);
        return unary_or_binary(std::move(out), a, v, [this](Var a, Var v, Var y) {
            accumulate(a, [&](Mat& g) {
                const Mat &gy = grad(y), &V = val(v);
                for (std::size_t i = 0; i < g.rows(); ++i)
                    for (std::size_t j = 0; j < g.cols(); ++j) g(i, j) += gy(i, j) * V(i, 0);
            });
            accumulate(v, [&](Mat& g) {
                const Mat &gy = grad(y), &A = val(a);
                for (std::size_t i = 0; i < g.rows(); ++i) {
                    double s = 0.0;
                    for (std::size_t j = 0; j < A.cols(); ++j) s += gy(i, j) * A(i, j);
                    g(i, 0) += s;
                }
            });
        });
    }

    // multiply a elementwise by a 1x1 scalar node
    Var mul_scalar(Var a, Var s) {
        const Mat& S = val(s);
        if (S.rows() != 1 || S.cols() != 1) throw std::invalid_argument("mul_scalar: not 1x1");
        Mat out = val(a);
        for (double& v : out.raw()) v *= S(0, 0);
        return unary_or_binary(std::move(out), a, s, [this](Var a, Var s, Var y) {
            accumulate(a, [&](Mat& g) { axpy(g, val(s)(0, 0), grad(y)); });
            accumulate(s, [&](Mat& g) {
                const Mat &gy = grad(y), &A = val(a);
                double acc = 0.0;
                for (std::size_t i = 0; i < A.size(); ++i) acc += gy.raw()[i] * A.raw()[i];
                g(0, 0) += acc;
            });
        });
    }

    // ---- reductions ----

    Var sum_all(Var a) {
        double s = 0.0;
        for (double v : val(a).raw()) s += v;
        Mat out(1, 1);
        out(0, 0) = s;
        return unary(std::move(out), a, [this](Var a, Var y) {
            accumulate(a, [&](Mat& g) {
                double gy = grad(y)(0, 0);
                for (double& v : g.raw()) v += gy;
            });
        });
    }

    Var mean_all(Var a) { return scale(sum_all(a), 1.0 / static_cast<double>(val(a).size())); }

    Var row_sum(Var a) {
        const Mat& A = val(a);
        Mat out(A.rows(), 1);
        for (std::size_t i = 0; i < A.rows(); ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < A.cols(); ++j) s += A(i, j);
            out(i, 0) = s;
        }
        return unary(std::move(out), a, [this](Var a, Var y) {
            accumulate(a, [&](Mat& g) {
                const Mat& gy = grad(y);
                for (std::size_t i = 0; i < g.rows(); ++i)
                    for (std::size_t j = 0; j < g.cols(); ++j) g(i, j) += gy(i, 0);
            });
        });
    }

    Var row_dot(Var a, Var b) {
        const Mat &A = val(a), &B = val(b);
        require_same_shape(A, B, "row_dot");
        Mat out(A.rows(), 1);
        for (std::size_t i = 0; i < A.rows(); ++i) out(i, 0) = dot_rows(A, i, B, i);
        return unary_or_binary(std::move(out), a, b, [this](Var a, Var b, Var y) {
            accumulate(a, [&](Mat& g) {
                const Mat &gy = grad(y), &B = val(b);
                for (std::size_t i = 0; i < g.rows(); ++i)
                    for (std::size_t j = 0; j < g.cols(); ++j) g(i, j) += gy(i, 0) * B(i, j);
            });
            accumulate(b, [&](Mat& g) {
                const Mat &gy = grad(y), &A = val(a);
                for (std::size_t i = 0; i < g.rows(); ++i)
                    for (std::size_t j = 0; j < g.cols(); ++j) g(i, j) += gy(i, 0) * A(i, j);
            });
        });
    }

    // ---- row-structured nonlinearities ----

    Var row_softmax(Var a) {
        const Mat& A = val(a);
        Mat out = A;
        for (std::size_t i = 0; i < A.rows(); ++i) {
            double mx = A(i, 0);
            for (std::size_t j = 1; j < A.cols(); ++j) mx = std::max(mx, A(i, j));
            double denom = 0.0;
            for (std::size_t j = 0; j < A.cols(); ++j) {
                out(i, j) = std::exp(A(i, j) - mx);
                denom += out(i, j);
            }
            for (std::size_t j = 0; j < A.cols(); ++j) out(i, j) /= denom;
        }
        return unary(std::move(out), a, [this](Var a, Var y) {
            accumulate(a, [&](Mat& g) {
                const Mat &gy = grad(y), &Y = val(y);
                for (std::size_t i = 0; i < g.rows(); ++i) {
                    double inner = 0.0;
                    for (std::size_t j = 0; j < g.cols(); ++j) inner += gy(i, j) * Y(i, j);
                    for (std::size_t j = 0; j < g.cols(); ++j)
                        g(i, j) += Y(i, j) * (gy(i, j) - inner);
                }
            });
        });
    }

    // L2-normalize each row; zero rows stay zero (with zero gradient)
    Var row_l2_normalize(Var a) {
        const Mat& A = val(a);
        Mat out = A;
        std::vector<double> norms(A.rows());
        for (std::size_t i = 0; i < A.rows(); ++i) {
            double n = row_norm(A, i);
            norms[i] = n;
            if (n > 0.0)
                for (std::size_t j = 0; j < A.cols(); ++j) out(i, j) /= n;
            else
                for (std::size_t j = 0; j < A.cols(); ++j) out(i, j) = 0.0;
        }
        return unary(std::move(out), a, [this, norms = std::move(norms)](Var a, Var y) {
            accumulate(a, [&](Mat& g) {
                const Mat &gy = grad(y), &Y = val(y);
                for (std::size_t i = 0; i < g.rows(); ++i) {
                    if (norms[i] <= 0.0) continue;
                    double inner = 0.0;
                    for (std::size_t j = 0; j < g.cols(); ++j) inner += gy(i, j) * Y(i, j);
                    for (std::size_t j = 0; j < g.cols(); ++j)
                        g(i, j) += (gy(i, j) - inner * Y(i, j)) / norms[i];
                }
            });
        });
    }

    // softmax of an n x 1 logit column within segments given by seg[i]
    Var segment_softmax(Var logits, std::vector<std::size_t> seg, std::size_t n_segments) {
        const Mat& L = val(logits);
        if (L.cols() != 1) throw std::invalid_argument("segment_softmax: logits must be n x 1");
        std::vector<double> mx(n_segments, -1e300), denom(n_segments, 0.0);
        for (std::size_t i = 0; i < L.rows(); ++i) mx[seg[i]] = std::max(mx[seg[i]], L(i, 0));
        Mat out(L.rows(), 1);
        for (std::size_t i = 0; i < L.rows(); ++i) {
            out(i, 0) = std::exp(L(i, 0) - mx[seg[i]]);
            denom[seg[i]] += out(i, 0);
        }
        for (std::size_t i = 0; i < L.rows(); ++i) out(i, 0) /= denom[seg[i]];
        return unary(std::move(out), logits,
                     [this, seg = std::move(seg), n_segments](Var a, Var y) {
                         accumulate(a, [&](Mat& g) {
                             const Mat &gy = grad(y), &Y = val(y);
                             std::vector<double> inner(n_segments, 0.0);
                             for (std::size_t i = 0; i < g.rows(); ++i)
                                 inner[seg[i]] += gy(i, 0) * Y(i, 0);
                             for (std::size_t i = 0; i < g.rows(); ++i)
                                 g(i, 0) += Y(i, 0) * (gy(i, 0) - inner[seg[i]]);
                         });
                     });
    }

    // out[s] = sum over rows i with seg[i] == s of rows(i)
    Var segment_sum(Var rows, std::vector<std::size_t> seg, std::size_t n_segments) {
        const Mat& R = val(rows);
        Mat out(n_segments, R.cols());
        for (std::size_t i = 0; i < R.rows(); ++i)
            for (std::size_t j = 0; j < R.cols(); ++j) out(seg[i], j) += R(i, j);
        return unary(std::move(out), rows, [this, seg = std::move(seg)](Var a, Var y) {
            accumulate(a, [&](Mat& g) {
                const Mat& gy = grad(y);
                for (std::size_t i = 0; i < g.rows(); ++i)
                    for (std::size_t j = 0; j < g.cols(); ++j) g(i, j) += gy(seg[i], j);
            });
        });
    }

    // inverted dropout with a seeded mask; identity when !training
    Var dropout(Var a, double rate, bool training, Rng& rng) {
        if (!training || rate <= 0.0) return a;
        const Mat& A = val(a);
        Mat mask(A.rows(), A.cols());
        const double keep = 1.0 - rate;
        for (double& v : mask.raw()) v = rng.uniform() < keep ? 1.0 / keep : 0.0;
        Mat out = A;
        for (std::size_t i = 0; i < out.size(); ++i) out.raw()[i] *= mask.raw()[i];
        return unary(std::move(out), a, [this, mask = std::move(mask)](Var a, Var y) {
            accumulate(a, [&](Mat& g) {
                const Mat& gy = grad(y);
                for (std::size_t i = 0; i < g.size(); ++i) g.raw()[i] += gy.raw()[i] * mask.raw()[i];
            });
        });
    }

    // cosine similarity of matching rows
    Var cosine_rows(Var a, Var b) { return row_dot(row_l2_normalize(a), row_l2_normalize(b)); }

private:
    struct Node {
        Mat val;
        Mat grad;
        bool requires_grad = false;
        std::function<void()> backward;
    };

    std::vector<Node> nodes_;

    int check(Var v) const {
        if (!v.valid() || static_cast<std::size_t>(v.idx) >= nodes_.size())
            throw std::logic_error("invalid Var");
        return v.idx;
    }

    Var push(Mat m, bool requires_grad) {
        Node n;
        n.grad = Mat(m.rows(), m.cols());
        n.val = std::move(m);
        n.requires_grad = requires_grad;
        nodes_.push_back(std::move(n));
        return Var{static_cast<int>(nodes_.size() - 1)};
    }

    template <typename F>
    void accumulate(Var v, F&& f) {
        if (!requires_grad(v)) return;
        f(nodes_[v.idx].grad);
    }

    template <typename BackFn>
    Var unary(Mat out, Var a, BackFn&& fn) {
        bool rg = requires_grad(a);
        Var y = push(std::move(out), rg);
        if (rg) nodes_[y.idx].backward = [fn = std::forward<BackFn>(fn), a, y]() mutable { fn(a, y); };
        return y;
    }

    template <typename BackFn>
    Var unary_or_binary(Mat out, Var a, Var b, BackFn&& fn) {
        bool rg = requires_grad(a) || requires_grad(b);
        Var y = push(std::move(out), rg);
        if (rg)
            nodes_[y.idx].backward = [fn = std::forward<BackFn>(fn), a, b, y]() mutable {
                fn(a, b, y);
            };
        return y;
    }

    static void require_same_shape(const Mat& a, const Mat& b, const char* op) {
        if (!a.same_shape(b)) throw std::invalid_argument(std::string(op) + ": shape mismatch");
    }

    static void axpy(Mat& y, double alpha, const Mat& x) {
        for (std::size_t i = 0; i < y.size(); ++i) y.raw()[i] += alpha * x.raw()[i];
    }

    // g += dY * B^T
    void add_matmul_nt(Mat& g, const Mat& dY, const Mat& B) {
        for (std::size_t i = 0; i < g.rows(); ++i)
            for (std::size_t k = 0; k < B.rows(); ++k) {
                double s = 0.0;
                const double* dy = dY.row_ptr(i);
                const double* br = B.row_ptr(k);
                for (std::size_t j = 0; j < B.cols(); ++j) s += dy[j] * br[j];
                g(i, k) += s;
            }
    }

    // g += A^T * dY
    void add_matmul_tn(Mat& g, const Mat& A, const Mat& dY) {
        for (std::size_t i = 0; i < A.rows(); ++i) {
            const double* ar = A.row_ptr(i);
            const double* dy = dY.row_ptr(i);
            for (std::size_t k = 0; k < A.cols(); ++k) {
                const double aik = ar[k];
                if (aik == 0.0) continue;
                double* gr = g.row_ptr(k);
                for (std::size_t j = 0; j < dY.cols(); ++j) gr[j] += aik * dy[j];
            }
        }
    }
};

}  // namespace firzen::ad

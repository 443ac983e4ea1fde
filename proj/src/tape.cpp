#include "kbqa/tape.hpp"

#include <cmath>
#include <utility>

#include "kbqa/errors.hpp"
#include "kbqa/kernels.hpp"

namespace kbqa::ad {

namespace {

using kern::kernels;

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
    throw NumericError(std::string(op) + ": incompatible shapes " + a.shape_str() + " and " +
                       b.shape_str());
}

void check_same_tape(const char* op, Var a, Var b) {
    if (a.tape == nullptr || b.tape == nullptr || a.tape != b.tape) {
        throw NumericError(std::string(op) + ": arguments on different tapes");
    }
}

// dst[i] += x[i] * y[i]
void madd(double* dst, const double* x, const double* y, size_t n) {
    for (size_t i = 0; i < n; ++i) dst[i] += x[i] * y[i];
}

void check_distribution(const char* op, const Tensor& t) {
    if (t.ndim() != 1) throw NumericError(std::string(op) + ": expected 1-D, got " + t.shape_str());
    double s = 0.0;
    for (int64_t i = 0; i < t.size(); ++i) {
        const double v = t.at(i);
        if (v < 0.0) throw NumericError(std::string(op) + ": negative entry");
        s += v;
    }
    if (std::abs(s - 1.0) > 1e-5) {
        throw NumericError(std::string(op) + ": entries sum to " + std::to_string(s) +
                           ", expected 1");
    }
}

} // namespace

Var Tape::constant(Tensor value) {
    return emplace(std::move(value), false, nullptr);
}

Var Tape::leaf(const Tensor& value, Tensor* grad_sink) {
    if (grad_sink != nullptr && !grad_sink->same_shape(value)) {
        throw NumericError("leaf: grad sink shape " + grad_sink->shape_str() +
                           " does not match value shape " + value.shape_str());
    }
    Var v = emplace(value, grad_sink != nullptr, nullptr);
    nodes_[static_cast<size_t>(v.id)].grad_sink = grad_sink;
    return v;
}

Var Tape::emplace(Tensor value, bool requires_grad,
                  std::function<void(Tape&, int32_t)> backprop) {
    Node node;
    node.value = std::move(value);
    node.requires_grad = requires_grad;
    node.backprop = std::move(backprop);
    nodes_.push_back(std::move(node));
    return Var{this, static_cast<int32_t>(nodes_.size() - 1)};
}

Tensor& Tape::grad(int32_t id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (n.grad_sink != nullptr) {
        n.grad_touched = true;
        return *n.grad_sink;
    }
    if (!n.grad_touched) {
        n.grad = Tensor(n.value.shape());
        n.grad_touched = true;
    }
    return n.grad;
}

void Tape::backward(Var loss, double seed) {
    if (loss.tape != this) throw NumericError("backward: loss from another tape");
    const Node& root = nodes_[static_cast<size_t>(loss.id)];
    if (root.value.size() != 1) {
        throw NumericError("backward: loss must be scalar, got shape " + root.value.shape_str());
    }
    if (!root.requires_grad) return;
    grad(loss.id).at(0) += seed;
    for (int32_t id = loss.id; id >= 0; --id) {
        Node& n = nodes_[static_cast<size_t>(id)];
        if (!n.requires_grad || !n.grad_touched || !n.backprop) continue;
        n.backprop(*this, id);
    }
}

namespace {

bool any_grad(Var a) { return a.tape->wants_grad(a.id); }
bool any_grad(Var a, Var b) { return a.tape->wants_grad(a.id) || b.tape->wants_grad(b.id); }

} // namespace

Var add(Var a, Var b) {
    check_same_tape("add", a, b);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (!av.same_shape(bv)) shape_error("add", av, bv);
    Tensor out(av.shape());
    kernels().add(av.data(), bv.data(), out.data(), static_cast<size_t>(out.size()));
    if (!any_grad(a, b)) return a.tape->constant(std::move(out));
    return a.tape->emplace(std::move(out), true, [a, b](Tape& t, int32_t self) {
        const Tensor& g = t.grad(self);
        const size_t n = static_cast<size_t>(g.size());
        if (t.wants_grad(a.id)) kernels().axpy(1.0, g.data(), t.grad(a.id).data(), n);
        if (t.wants_grad(b.id)) kernels().axpy(1.0, g.data(), t.grad(b.id).data(), n);
    });
}

Var sub(Var a, Var b) {
    check_same_tape("sub", a, b);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (!av.same_shape(bv)) shape_error("sub", av, bv);
    Tensor out(av.shape());
    kernels().sub(av.data(), bv.data(), out.data(), static_cast<size_t>(out.size()));
    if (!any_grad(a, b)) return a.tape->constant(std::move(out));
    return a.tape->emplace(std::move(out), true, [a, b](Tape& t, int32_t self) {
        const Tensor& g = t.grad(self);
        const size_t n = static_cast<size_t>(g.size());
        if (t.wants_grad(a.id)) kernels().axpy(1.0, g.data(), t.grad(a.id).data(), n);
        if (t.wants_grad(b.id)) kernels().axpy(-1.0, g.data(), t.grad(b.id).data(), n);
    });
}

Var mul(Var a, Var b) {
    check_same_tape("mul", a, b);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (!av.same_shape(bv)) shape_error("mul", av, bv);
    Tensor out(av.shape());
    kernels().mul(av.data(), bv.data(), out.data(), static_cast<size_t>(out.size()));
    if (!any_grad(a, b)) return a.tape->constant(std::move(out));
    return a.tape->emplace(std::move(out), true, [a, b](Tape& t, int32_t self) {
        const Tensor& g = t.grad(self);
        const size_t n = static_cast<size_t>(g.size());
        if (t.wants_grad(a.id)) madd(t.grad(a.id).data(), g.data(), t.value(b.id).data(), n);
        if (t.wants_grad(b.id)) madd(t.grad(b.id).data(), g.data(), t.value(a.id).data(), n);
    });
}

Var scale(Var a, double c) {
    const Tensor& av = a.value();
    Tensor out(av.shape());
    kernels().scale(av.data(), c, out.data(), static_cast<size_t>(out.size()));
    if (!any_grad(a)) return a.tape->constant(std::move(out));
    return a.tape->emplace(std::move(out), true, [a, c](Tape& t, int32_t self) {
        const Tensor& g = t.grad(self);
        kernels().axpy(c, g.data(), t.grad(a.id).data(), static_cast<size_t>(g.size()));
    });
}

Var matmul(Var a, Var b) {
    check_same_tape("matmul", a, b);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();

    if (av.ndim() == 2 && bv.ndim() == 2) {
        if (av.cols() != bv.rows()) shape_error("matmul", av, bv);
        const int64_t m = av.rows(), k = av.cols(), n = bv.cols();
        Tensor out({m, n});
        for (int64_t i = 0; i < m; ++i) {
            double* ci = out.row(i);
            for (int64_t kk = 0; kk < k; ++kk) {
                kernels().axpy(av.at(i, kk), bv.row(kk), ci, static_cast<size_t>(n));
            }
        }
        if (!any_grad(a, b)) return a.tape->constant(std::move(out));
        return a.tape->emplace(std::move(out), true, [a, b, m, k, n](Tape& t, int32_t self) {
            const Tensor& g = t.grad(self);
            if (t.wants_grad(a.id)) {
                Tensor& ga = t.grad(a.id);
                const Tensor& B = t.value(b.id);
                for (int64_t i = 0; i < m; ++i) {
                    for (int64_t kk = 0; kk < k; ++kk) {
                        ga.at(i, kk) += kernels().dot(g.row(i), B.row(kk), static_cast<size_t>(n));
                    }
                }
            }
            if (t.wants_grad(b.id)) {
                Tensor& gb = t.grad(b.id);
                const Tensor& A = t.value(a.id);
                for (int64_t i = 0; i < m; ++i) {
                    for (int64_t kk = 0; kk < k; ++kk) {
                        kernels().axpy(A.at(i, kk), g.row(i), gb.row(kk), static_cast<size_t>(n));
                    }
                }
            }
        });
    }

    if (av.ndim() == 2 && bv.ndim() == 1) { // (m,k) x (k) -> (m)
        if (av.cols() != bv.cols()) shape_error("matmul", av, bv);
        const int64_t m = av.rows(), k = av.cols();
        Tensor out({m});
        for (int64_t i = 0; i < m; ++i) {
            out.at(i) = kernels().dot(av.row(i), bv.data(), static_cast<size_t>(k));
        }
        if (!any_grad(a, b)) return a.tape->constant(std::move(out));
        return a.tape->emplace(std::move(out), true, [a, b, m, k](Tape& t, int32_t self) {
            const Tensor& g = t.grad(self);
            if (t.wants_grad(a.id)) {
                Tensor& ga = t.grad(a.id);
                const Tensor& x = t.value(b.id);
                for (int64_t i = 0; i < m; ++i) {
                    kernels().axpy(g.at(i), x.data(), ga.row(i), static_cast<size_t>(k));
                }
            }
            if (t.wants_grad(b.id)) {
                Tensor& gx = t.grad(b.id);
                const Tensor& A = t.value(a.id);
                for (int64_t i = 0; i < m; ++i) {
                    kernels().axpy(g.at(i), A.row(i), gx.data(), static_cast<size_t>(k));
                }
            }
        });
    }

    if (av.ndim() == 1 && bv.ndim() == 2) { // (k) x (k,n) -> (n)
        if (av.cols() != bv.rows()) shape_error("matmul", av, bv);
        const int64_t k = bv.rows(), n = bv.cols();
        Tensor out({n});
        for (int64_t kk = 0; kk < k; ++kk) {
            kernels().axpy(av.at(kk), bv.row(kk), out.data(), static_cast<size_t>(n));
        }
        if (!any_grad(a, b)) return a.tape->constant(std::move(out));
        return a.tape->emplace(std::move(out), true, [a, b, k, n](Tape& t, int32_t self) {
            const Tensor& g = t.grad(self);
            if (t.wants_grad(a.id)) {
                Tensor& gx = t.grad(a.id);
                const Tensor& B = t.value(b.id);
                for (int64_t kk = 0; kk < k; ++kk) {
                    gx.at(kk) += kernels().dot(B.row(kk), g.data(), static_cast<size_t>(n));
                }
            }
            if (t.wants_grad(b.id)) {
                Tensor& gb = t.grad(b.id);
                const Tensor& x = t.value(a.id);
                for (int64_t kk = 0; kk < k; ++kk) {
                    kernels().axpy(x.at(kk), g.data(), gb.row(kk), static_cast<size_t>(n));
                }
            }
        });
    }

    shape_error("matmul", av, bv);
}

Var rowwise_add(Var m, Var v) {
    check_same_tape("rowwise_add", m, v);
    const Tensor& mv = m.value();
    const Tensor& vv = v.value();
    if (mv.ndim() != 2 || vv.ndim() != 1 || mv.cols() != vv.cols()) {
        shape_error("rowwise_add", mv, vv);
    }
    const int64_t rows = mv.rows(), cols = mv.cols();
    Tensor out({rows, cols});
    for (int64_t r = 0; r < rows; ++r) {
        kernels().add(mv.row(r), vv.data(), out.row(r), static_cast<size_t>(cols));
    }
    if (!any_grad(m, v)) return m.tape->constant(std::move(out));
    return m.tape->emplace(std::move(out), true, [m, v, rows, cols](Tape& t, int32_t self) {
        const Tensor& g = t.grad(self);
        if (t.wants_grad(m.id)) {
            kernels().axpy(1.0, g.data(), t.grad(m.id).data(), static_cast<size_t>(g.size()));
        }
        if (t.wants_grad(v.id)) {
            Tensor& gv = t.grad(v.id);
            for (int64_t r = 0; r < rows; ++r) {
                kernels().axpy(1.0, g.row(r), gv.data(), static_cast<size_t>(cols));
            }
        }
    });
}

Var rowwise_mul(Var m, Var v) {
    check_same_tape("rowwise_mul", m, v);
    const Tensor& mv = m.value();
    const Tensor& vv = v.value();
    if (mv.ndim() != 2 || vv.ndim() != 1 || mv.cols() != vv.cols()) {
        shape_error("rowwise_mul", mv, vv);
    }
    const int64_t rows = mv.rows(), cols = mv.cols();
    Tensor out({rows, cols});
    for (int64_t r = 0; r < rows; ++r) {
        kernels().mul(mv.row(r), vv.data(), out.row(r), static_cast<size_t>(cols));
    }
    if (!any_grad(m, v)) return m.tape->constant(std::move(out));
    return m.tape->emplace(std::move(out), true, [m, v, rows, cols](Tape& t, int32_t self) {
        const Tensor& g = t.grad(self);
        if (t.wants_grad(m.id)) {
            Tensor& gm = t.grad(m.id);
            const Tensor& vec = t.value(v.id);
            for (int64_t r = 0; r < rows; ++r) {
                madd(gm.row(r), g.row(r), vec.data(), static_cast<size_t>(cols));
            }
        }
        if (t.wants_grad(v.id)) {
            Tensor& gv = t.grad(v.id);
            const Tensor& mat = t.value(m.id);
            for (int64_t r = 0; r < rows; ++r) {
                madd(gv.data(), g.row(r), mat.row(r), static_cast<size_t>(cols));
            }
        }
    });
}

Var concat(Var a, Var b) {
    check_same_tape("concat", a, b);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();

    if (av.ndim() == 1 && bv.ndim() == 1) {
        const int64_t p = av.size(), q = bv.size();
        Tensor out({p + q});
        for (int64_t i = 0; i < p; ++i) out.at(i) = av.at(i);
        for (int64_t i = 0; i < q; ++i) out.at(p + i) = bv.at(i);
        if (!any_grad(a, b)) return a.tape->constant(std::move(out));
        return a.tape->emplace(std::move(out), true, [a, b, p, q](Tape& t, int32_t self) {
            const Tensor& g = t.grad(self);
            if (t.wants_grad(a.id)) {
                kernels().axpy(1.0, g.data(), t.grad(a.id).data(), static_cast<size_t>(p));
            }
            if (t.wants_grad(b.id)) {
                kernels().axpy(1.0, g.data() + p, t.grad(b.id).data(), static_cast<size_t>(q));
            }
        });
    }

    if (av.ndim() == 2 && bv.ndim() == 2 && av.rows() == bv.rows()) {
        const int64_t rows = av.rows(), p = av.cols(), q = bv.cols();
        Tensor out({rows, p + q});
        for (int64_t r = 0; r < rows; ++r) {
            double* dst = out.row(r);
            const double* ar = av.row(r);
            const double* br = bv.row(r);
            for (int64_t i = 0; i < p; ++i) dst[i] = ar[i];
            for (int64_t i = 0; i < q; ++i) dst[p + i] = br[i];
        }
        if (!any_grad(a, b)) return a.tape->constant(std::move(out));
        return a.tape->emplace(std::move(out), true, [a, b, rows, p, q](Tape& t, int32_t self) {
            const Tensor& g = t.grad(self);
            if (t.wants_grad(a.id)) {
                Tensor& ga = t.grad(a.id);
                for (int64_t r = 0; r < rows; ++r) {
                    kernels().axpy(1.0, g.row(r), ga.row(r), static_cast<size_t>(p));
                }
            }
            if (t.wants_grad(b.id)) {
                Tensor& gb = t.grad(b.id);
                for (int64_t r = 0; r < rows; ++r) {
                    kernels().axpy(1.0, g.row(r) + p, gb.row(r), static_cast<size_t>(q));
                }
            }
        });
    }

    shape_error("concat", av, bv);
}

namespace {

template <typename Fwd, typename Deriv>
Var unary_elementwise(const char* /*name*/, Var a, Fwd fwd, Deriv dfn) {
    const Tensor& av = a.value();
    Tensor out(av.shape());
    for (int64_t i = 0; i < av.size(); ++i) out.at(i) = fwd(av.at(i));
    if (!any_grad(a)) return a.tape->constant(std::move(out));
    return a.tape->emplace(std::move(out), true, [a, dfn](Tape& t, int32_t self) {
        const Tensor& g = t.grad(self);
        const Tensor& y = t.value(self);
        const Tensor& x = t.value(a.id);
        Tensor& ga = t.grad(a.id);
        for (int64_t i = 0; i < g.size(); ++i) ga.at(i) += g.at(i) * dfn(x.at(i), y.at(i));
    });
}

} // namespace

Var sigmoid(Var a) {
    return unary_elementwise(
        "sigmoid", a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
        [](double, double y) { return y * (1.0 - y); });
}

Var tanh(Var a) {
    return unary_elementwise(
        "tanh", a, [](double x) { return std::tanh(x); },
        [](double, double y) { return 1.0 - y * y; });
}

Var relu(Var a) {
    return unary_elementwise(
        "relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
        [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var softmax(Var a) {
    const Tensor& av = a.value();
    if (av.ndim() != 1) throw NumericError("softmax: expected 1-D, got " + av.shape_str());
    const int64_t n = av.size();
    if (n == 0) throw NumericError("softmax: empty input");
    double mx = av.at(0);
    for (int64_t i = 1; i < n; ++i) mx = std::max(mx, av.at(i));
    Tensor out({n});
    double total = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        out.at(i) = std::exp(av.at(i) - mx);
        total += out.at(i);
    }
    for (int64_t i = 0; i < n; ++i) out.at(i) /= total;
    if (!any_grad(a)) return a.tape->constant(std::move(out));
    return a.tape->emplace(std::move(out), true, [a, n](Tape& t, int32_t self) {
        const Tensor& g = t.grad(self);
        const Tensor& y = t.value(self);
        Tensor& ga = t.grad(a.id);
        const double gy = kernels().dot(g.data(), y.data(), static_cast<size_t>(n));
        for (int64_t i = 0; i < n; ++i) ga.at(i) += y.at(i) * (g.at(i) - gy);
    });
}

Var sum(Var a) {
    const Tensor& av = a.value();
    Tensor out = Tensor::scalar(av.sum());
    if (!any_grad(a)) return a.tape->constant(std::move(out));
    return a.tape->emplace(std::move(out), true, [a](Tape& t, int32_t self) {
        const double g = t.grad(self).at(0);
        Tensor& ga = t.grad(a.id);
        for (int64_t i = 0; i < ga.size(); ++i) ga.at(i) += g;
    });
}

Var row(Var m, int64_t r) {
    const Tensor& mv = m.value();
    if (mv.ndim() != 2 || r < 0 || r >= mv.rows()) {
        throw NumericError("row: index " + std::to_string(r) + " out of range for " +
                           mv.shape_str());
    }
    const int64_t d = mv.cols();
    Tensor out({d});
    for (int64_t i = 0; i < d; ++i) out.at(i) = mv.at(r, i);
    if (!any_grad(m)) return m.tape->constant(std::move(out));
    return m.tape->emplace(std::move(out), true, [m, r, d](Tape& t, int32_t self) {
        const Tensor& g = t.grad(self);
        kernels().axpy(1.0, g.data(), t.grad(m.id).row(r), static_cast<size_t>(d));
    });
}

Var stack_rows(const std::vector<Var>& rows) {
    if (rows.empty()) throw NumericError("stack_rows: no rows");
    Tape* tape = rows[0].tape;
    const int64_t d = rows[0].value().size();
    bool needs_grad = false;
    for (const Var& r : rows) {
        if (r.tape != tape) throw NumericError("stack_rows: rows on different tapes");
        if (r.value().ndim() != 1 || r.value().size() != d) {
            shape_error("stack_rows", rows[0].value(), r.value());
        }
        needs_grad = needs_grad || any_grad(r);
    }
    const int64_t n = static_cast<int64_t>(rows.size());
    Tensor out({n, d});
    for (int64_t i = 0; i < n; ++i) {
        const Tensor& rv = rows[static_cast<size_t>(i)].value();
        for (int64_t j = 0; j < d; ++j) out.at(i, j) = rv.at(j);
    }
    if (!needs_grad) return tape->constant(std::move(out));
    return tape->emplace(std::move(out), true, [rows, n, d](Tape& t, int32_t self) {
        const Tensor& g = t.grad(self);
        for (int64_t i = 0; i < n; ++i) {
            const Var& r = rows[static_cast<size_t>(i)];
            if (t.wants_grad(r.id)) {
                kernels().axpy(1.0, g.row(i), t.grad(r.id).data(), static_cast<size_t>(d));
            }
        }
    });
}

Var embedding_rows(Var table, std::vector<int32_t> ids) {
    const Tensor& tv = table.value();
    if (tv.ndim() != 2) throw NumericError("embedding_rows: table must be 2-D, got " + tv.shape_str());
    const int64_t d = tv.cols();
    const int64_t n = static_cast<int64_t>(ids.size());
    for (int32_t id : ids) {
        if (id < 0 || id >= tv.rows()) {
            throw NumericError("embedding_rows: index " + std::to_string(id) + " out of range for " +
                               tv.shape_str());
        }
    }
    Tensor out({n, d});
    for (int64_t i = 0; i < n; ++i) {
        const double* src = tv.row(ids[static_cast<size_t>(i)]);
        double* dst = out.row(i);
        for (int64_t j = 0; j < d; ++j) dst[j] = src[j];
    }
    if (!any_grad(table)) return table.tape->constant(std::move(out));
    return table.tape->emplace(std::move(out), true,
                               [table, ids = std::move(ids), n, d](Tape& t, int32_t self) {
                                   const Tensor& g = t.grad(self);
                                   Tensor& gt = t.grad(table.id);
                                   for (int64_t i = 0; i < n; ++i) {
                                       kernels().axpy(1.0, g.row(i),
                                                      gt.row(ids[static_cast<size_t>(i)]),
                                                      static_cast<size_t>(d));
                                   }
                               });
}

namespace {

void check_edges(const char* op, const EdgeArray& edges, int64_t n_src, int64_t n_rel,
                 int64_t n_dst) {
    for (size_t e = 0; e < edges.size(); ++e) {
        if (edges.rel[e] < 0 || edges.rel[e] >= n_rel || edges.dst[e] < 0 ||
            edges.dst[e] >= n_dst || (n_src >= 0 && (edges.src[e] < 0 || edges.src[e] >= n_src))) {
            throw NumericError(std::string(op) + ": edge " + std::to_string(e) + " out of range");
        }
    }
}

} // namespace

Var edge_scatter(Var rel_rows, const EdgeArray& edges, int64_t out_rows) {
    const Tensor& rv = rel_rows.value();
    if (rv.ndim() != 2) throw NumericError("edge_scatter: relation rows must be 2-D");
    check_edges("edge_scatter", edges, -1, rv.rows(), out_rows);
    const int64_t d = rv.cols();
    Tensor out({out_rows, d});
    for (size_t e = 0; e < edges.size(); ++e) {
        kernels().axpy(1.0, rv.row(edges.rel[e]), out.row(edges.dst[e]), static_cast<size_t>(d));
    }
    if (!any_grad(rel_rows)) return rel_rows.tape->constant(std::move(out));
    return rel_rows.tape->emplace(std::move(out), true,
                                  [rel_rows, &edges, d](Tape& t, int32_t self) {
                                      const Tensor& g = t.grad(self);
                                      Tensor& gr = t.grad(rel_rows.id);
                                      for (size_t e = 0; e < edges.size(); ++e) {
                                          kernels().axpy(1.0, g.row(edges.dst[e]),
                                                         gr.row(edges.rel[e]),
                                                         static_cast<size_t>(d));
                                      }
                                  });
}

Var edge_scatter_weighted(Var src_weights, Var rel_rows, const EdgeArray& edges,
                          int64_t out_rows) {
    check_same_tape("edge_scatter_weighted", src_weights, rel_rows);
    const Tensor& wv = src_weights.value();
    const Tensor& rv = rel_rows.value();
    if (wv.ndim() != 1 || rv.ndim() != 2) shape_error("edge_scatter_weighted", wv, rv);
    check_edges("edge_scatter_weighted", edges, wv.size(), rv.rows(), out_rows);
    const int64_t d = rv.cols();
    Tensor out({out_rows, d});
    for (size_t e = 0; e < edges.size(); ++e) {
        kernels().axpy(wv.at(edges.src[e]), rv.row(edges.rel[e]), out.row(edges.dst[e]),
                       static_cast<size_t>(d));
    }
    if (!any_grad(src_weights, rel_rows)) return rel_rows.tape->constant(std::move(out));
    return rel_rows.tape->emplace(
        std::move(out), true, [src_weights, rel_rows, &edges, d](Tape& t, int32_t self) {
            const Tensor& g = t.grad(self);
            const Tensor& w = t.value(src_weights.id);
            const Tensor& rows = t.value(rel_rows.id);
            if (t.wants_grad(rel_rows.id)) {
                Tensor& gr = t.grad(rel_rows.id);
                for (size_t e = 0; e < edges.size(); ++e) {
                    kernels().axpy(w.at(edges.src[e]), g.row(edges.dst[e]), gr.row(edges.rel[e]),
                                   static_cast<size_t>(d));
                }
            }
            if (t.wants_grad(src_weights.id)) {
                Tensor& gw = t.grad(src_weights.id);
                for (size_t e = 0; e < edges.size(); ++e) {
                    gw.at(edges.src[e]) += kernels().dot(rows.row(edges.rel[e]),
                                                         g.row(edges.dst[e]),
                                                         static_cast<size_t>(d));
                }
            }
        });
}

namespace {

// x' = (1-eps) x + eps / len
Tensor smoothed(const Tensor& x, double eps) {
    Tensor out(x.shape());
    const double u = eps / static_cast<double>(x.size());
    for (int64_t i = 0; i < x.size(); ++i) out.at(i) = (1.0 - eps) * x.at(i) + u;
    return out;
}

} // namespace

Var kl_div(Var pred, Var target, KlOrder order, double eps) {
    check_same_tape("kl_div", pred, target);
    const Tensor& pv = pred.value();
    const Tensor& tv = target.value();
    if (!pv.same_shape(tv)) shape_error("kl_div", pv, tv);
    check_distribution("kl_div", pv);
    check_distribution("kl_div", tv);

    Tensor ps = smoothed(pv, eps);
    Tensor ts = smoothed(tv, eps);
    const Tensor& wgt = (order == KlOrder::target_weighted) ? ts : ps; // the weighting distribution
    const Tensor& ref = (order == KlOrder::target_weighted) ? ps : ts;
    double loss = 0.0;
    for (int64_t i = 0; i < ps.size(); ++i) {
        if (wgt.at(i) > 0.0) loss += wgt.at(i) * (std::log(wgt.at(i)) - std::log(ref.at(i)));
    }
    if (!any_grad(pred, target)) return pred.tape->constant(Tensor::scalar(loss));
    return pred.tape->emplace(
        Tensor::scalar(loss), true,
        [pred, target, order, eps, ps = std::move(ps), ts = std::move(ts)](Tape& t, int32_t self) {
            const double g = t.grad(self).at(0);
            const double c = 1.0 - eps;
            const Tensor& w = (order == KlOrder::target_weighted) ? ts : ps;
            const Tensor& r = (order == KlOrder::target_weighted) ? ps : ts;
            const Var wv = (order == KlOrder::target_weighted) ? target : pred;
            const Var rv = (order == KlOrder::target_weighted) ? pred : target;
            if (t.wants_grad(rv.id)) {
                Tensor& gr = t.grad(rv.id);
                for (int64_t i = 0; i < w.size(); ++i) {
                    if (w.at(i) > 0.0) gr.at(i) -= g * c * w.at(i) / r.at(i);
                }
            }
            if (t.wants_grad(wv.id)) {
                Tensor& gw = t.grad(wv.id);
                for (int64_t i = 0; i < w.size(); ++i) {
                    if (w.at(i) > 0.0) {
                        gw.at(i) += g * c * (std::log(w.at(i)) - std::log(r.at(i)) + 1.0);
                    }
                }
            }
        });
}

Var js_div(Var p, Var q, double eps) {
    check_same_tape("js_div", p, q);
    const Tensor& pv = p.value();
    const Tensor& qv = q.value();
    if (!pv.same_shape(qv)) shape_error("js_div", pv, qv);
    check_distribution("js_div", pv);
    check_distribution("js_div", qv);

    Tensor ps = smoothed(pv, eps);
    Tensor qs = smoothed(qv, eps);
    const int64_t n = ps.size();
    Tensor mid({n});
    for (int64_t i = 0; i < n; ++i) mid.at(i) = 0.5 * (ps.at(i) + qs.at(i));
    double lp = 0.0, lq = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        if (ps.at(i) > 0.0) lp += ps.at(i) * (std::log(ps.at(i)) - std::log(mid.at(i)));
        if (qs.at(i) > 0.0) lq += qs.at(i) * (std::log(qs.at(i)) - std::log(mid.at(i)));
    }
    const double loss = 0.5 * lp + 0.5 * lq;
    if (!any_grad(p, q)) return p.tape->constant(Tensor::scalar(loss));
    return p.tape->emplace(
        Tensor::scalar(loss), true,
        [p, q, eps, ps = std::move(ps), qs = std::move(qs), mid = std::move(mid)](Tape& t,
                                                                                  int32_t self) {
            const double g = t.grad(self).at(0);
            const double c = 1.0 - eps;
            if (t.wants_grad(p.id)) {
                Tensor& gp = t.grad(p.id);
                for (int64_t i = 0; i < ps.size(); ++i) {
                    if (ps.at(i) > 0.0) {
                        gp.at(i) += g * c * 0.5 * (std::log(ps.at(i)) - std::log(mid.at(i)));
                    }
                }
            }
            if (t.wants_grad(q.id)) {
                Tensor& gq = t.grad(q.id);
                for (int64_t i = 0; i < qs.size(); ++i) {
                    if (qs.at(i) > 0.0) {
                        gq.at(i) += g * c * 0.5 * (std::log(qs.at(i)) - std::log(mid.at(i)));
                    }
                }
            }
        });
}

} // namespace kbqa::ad

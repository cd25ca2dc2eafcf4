#include "vague/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace vague::nn {

void Node::ensure_grad() {
    if (grad.size() != value.size()) grad = Tensor::zeros(value.shape());
}

void Node::zero_grad() {
    if (grad.size() == value.size()) grad.fill(0.0);
}

Var constant(Tensor value) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    return Var(n);
}

Var parameter(Tensor value) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = true;
    return Var(n);
}

Var detach(const Var& v) { return constant(v.value()); }

void set_requires_grad(const std::vector<Var>& vars, bool on) {
    for (Var v : vars) v.set_requires_grad(on);
}

void zero_grads(const std::vector<Var>& vars) {
    for (Var v : vars) v.zero_grad();
}

namespace {

// When no operand carries gradient the result is a plain constant; the
// subgraph behind it can be dropped. This is also what makes gradients
// w.r.t. frozen parameters literally zero rather than merely unused.
bool any_requires_grad(const std::vector<Var>& parents) {
    for (const Var& p : parents)
        if (p.requires_grad()) return true;
    return false;
}

Var make_node(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backprop) {
    if (!any_requires_grad(parents)) return constant(std::move(value));
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = true;
    n->parents.reserve(parents.size());
    for (Var& p : parents) n->parents.push_back(p.node());
    n->backprop = std::move(backprop);
    return Var(n);
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
    if (!a.value().same_shape(b.value()))
        throw ShapeError(std::string(op) + ": shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()) + " differ");
}

void check_finite(const Tensor& t, const char* op) {
    if (!t.all_finite())
        throw DivergenceError(std::string(op) + ": non-finite value in output");
}

Node& parent(Node& n, std::size_t i) {
    Node& p = *n.parents[i];
    p.ensure_grad();
    return p;
}

} // namespace

Var add(const Var& a, const Var& b) {
    check_same_shape(a, b, "add");
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
    return make_node(std::move(out), {a, b}, [](Node& n) {
        for (std::size_t k = 0; k < 2; ++k) {
            if (!n.parents[k]->requires_grad) continue;
            Node& p = parent(n, k);
            for (std::size_t i = 0; i < n.grad.size(); ++i) p.grad[i] += n.grad[i];
        }
    });
}

Var sub(const Var& a, const Var& b) {
    check_same_shape(a, b, "sub");
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
    return make_node(std::move(out), {a, b}, [](Node& n) {
        if (n.parents[0]->requires_grad) {
            Node& p = parent(n, 0);
            for (std::size_t i = 0; i < n.grad.size(); ++i) p.grad[i] += n.grad[i];
        }
        if (n.parents[1]->requires_grad) {
            Node& p = parent(n, 1);
            for (std::size_t i = 0; i < n.grad.size(); ++i) p.grad[i] -= n.grad[i];
        }
    });
}

Var mul(const Var& a, const Var& b) {
    check_same_shape(a, b, "mul");
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
    return make_node(std::move(out), {a, b}, [](Node& n) {
        const Tensor& av = n.parents[0]->value;
        const Tensor& bv = n.parents[1]->value;
        if (n.parents[0]->requires_grad) {
            Node& p = parent(n, 0);
            for (std::size_t i = 0; i < n.grad.size(); ++i) p.grad[i] += n.grad[i] * bv[i];
        }
        if (n.parents[1]->requires_grad) {
            Node& p = parent(n, 1);
            for (std::size_t i = 0; i < n.grad.size(); ++i) p.grad[i] += n.grad[i] * av[i];
        }
    });
}

Var scale(const Var& a, double s) {
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= s;
    return make_node(std::move(out), {a}, [s](Node& n) {
        Node& p = parent(n, 0);
        for (std::size_t i = 0; i < n.grad.size(); ++i) p.grad[i] += s * n.grad[i];
    });
}

Var matmul(const Var& a, const Var& b) {
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (av.ndim() == 2 && bv.ndim() == 2) {
        std::size_t m = av.rows(), k = av.cols(), n_ = bv.cols();
        if (bv.rows() != k)
            throw ShapeError("matmul: " + shape_str(av.shape()) + " x " + shape_str(bv.shape()));
        Tensor out({m, n_});
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t kk = 0; kk < k; ++kk) {
                double aik = av[i * k + kk];
                if (aik == 0.0) continue;
                for (std::size_t j = 0; j < n_; ++j) out[i * n_ + j] += aik * bv[kk * n_ + j];
            }
        return make_node(std::move(out), {a, b}, [m, k, n_](Node& n) {
            const Tensor& A = n.parents[0]->value;
            const Tensor& B = n.parents[1]->value;
            if (n.parents[0]->requires_grad) {
                Node& p = parent(n, 0); // dA = G B^T
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t kk = 0; kk < k; ++kk) {
                        double s = 0;
                        for (std::size_t j = 0; j < n_; ++j)
                            s += n.grad[i * n_ + j] * B[kk * n_ + j];
                        p.grad[i * k + kk] += s;
                    }
            }
            if (n.parents[1]->requires_grad) {
                Node& p = parent(n, 1); // dB = A^T G
                for (std::size_t kk = 0; kk < k; ++kk)
                    for (std::size_t j = 0; j < n_; ++j) {
                        double s = 0;
                        for (std::size_t i = 0; i < m; ++i)
                            s += A[i * k + kk] * n.grad[i * n_ + j];
                        p.grad[kk * n_ + j] += s;
                    }
            }
        });
    }
    if (av.ndim() == 2 && bv.ndim() == 1) {
        std::size_t m = av.rows(), k = av.cols();
        if (bv.size() != k)
            throw ShapeError("matmul: " + shape_str(av.shape()) + " x " + shape_str(bv.shape()));
        Tensor out({m});
        for (std::size_t i = 0; i < m; ++i) {
            double s = 0;
            for (std::size_t kk = 0; kk < k; ++kk) s += av[i * k + kk] * bv[kk];
            out[i] = s;
        }
        return make_node(std::move(out), {a, b}, [m, k](Node& n) {
            const Tensor& A = n.parents[0]->value;
            const Tensor& x = n.parents[1]->value;
            if (n.parents[0]->requires_grad) {
                Node& p = parent(n, 0); // dA = g ⊗ x
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t kk = 0; kk < k; ++kk)
                        p.grad[i * k + kk] += n.grad[i] * x[kk];
            }
            if (n.parents[1]->requires_grad) {
                Node& p = parent(n, 1); // dx = A^T g
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t kk = 0; kk < k; ++kk)
                        p.grad[kk] += A[i * k + kk] * n.grad[i];
            }
        });
    }
    if (av.ndim() == 1 && bv.ndim() == 2) {
        std::size_t k = av.size(), n_ = bv.cols();
        if (bv.rows() != k)
            throw ShapeError("matmul: " + shape_str(av.shape()) + " x " + shape_str(bv.shape()));
        Tensor out({n_});
        for (std::size_t kk = 0; kk < k; ++kk) {
            double xk = av[kk];
            if (xk == 0.0) continue;
            for (std::size_t j = 0; j < n_; ++j) out[j] += xk * bv[kk * n_ + j];
        }
        return make_node(std::move(out), {a, b}, [k, n_](Node& n) {
            const Tensor& x = n.parents[0]->value;
            const Tensor& B = n.parents[1]->value;
            if (n.parents[0]->requires_grad) {
                Node& p = parent(n, 0); // dx = B g
                for (std::size_t kk = 0; kk < k; ++kk) {
                    double s = 0;
                    for (std::size_t j = 0; j < n_; ++j) s += B[kk * n_ + j] * n.grad[j];
                    p.grad[kk] += s;
                }
            }
            if (n.parents[1]->requires_grad) {
                Node& p = parent(n, 1); // dB = x ⊗ g
                for (std::size_t kk = 0; kk < k; ++kk)
                    for (std::size_t j = 0; j < n_; ++j)
                        p.grad[kk * n_ + j] += x[kk] * n.grad[j];
            }
        });
    }
    throw ShapeError("matmul: unsupported ranks " + shape_str(av.shape()) + " x " +
                     shape_str(bv.shape()));
}

Var dot(const Var& a, const Var& b) {
    check_same_shape(a, b, "dot");
    if (a.value().ndim() != 1) throw ShapeError("dot: expects 1-D operands");
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a.value()[i] * b.value()[i];
    return make_node(Tensor::scalar(s), {a, b}, [](Node& n) {
        const Tensor& av = n.parents[0]->value;
        const Tensor& bv = n.parents[1]->value;
        double g = n.grad[0];
        if (n.parents[0]->requires_grad) {
            Node& p = parent(n, 0);
            for (std::size_t i = 0; i < av.size(); ++i) p.grad[i] += g * bv[i];
        }
        if (n.parents[1]->requires_grad) {
            Node& p = parent(n, 1);
            for (std::size_t i = 0; i < bv.size(); ++i) p.grad[i] += g * av[i];
        }
    });
}

Var concat(const std::vector<Var>& parts) {
    if (parts.empty()) throw ShapeError("concat: no operands");
    std::size_t total = 0;
    for (const Var& p : parts) {
        if (p.value().ndim() != 1) throw ShapeError("concat: expects 1-D operands");
        total += p.size();
    }
    Tensor out({total});
    std::size_t off = 0;
    for (const Var& p : parts)
        for (std::size_t i = 0; i < p.size(); ++i) out[off++] = p.value()[i];
    return make_node(std::move(out), parts, [](Node& n) {
        std::size_t off = 0;
        for (std::size_t k = 0; k < n.parents.size(); ++k) {
            std::size_t len = n.parents[k]->value.size();
            if (n.parents[k]->requires_grad) {
                Node& p = parent(n, k);
                for (std::size_t i = 0; i < len; ++i) p.grad[i] += n.grad[off + i];
            }
            off += len;
        }
    });
}

Var slice(const Var& a, std::size_t offset, std::size_t len) {
    if (a.value().ndim() != 1) throw ShapeError("slice: expects a 1-D operand");
    if (len == 0 || offset + len > a.size())
        throw ShapeError("slice: [" + std::to_string(offset) + ", " +
                         std::to_string(offset + len) + ") out of " + std::to_string(a.size()));
    Tensor out({len});
    for (std::size_t i = 0; i < len; ++i) out[i] = a.value()[offset + i];
    return make_node(std::move(out), {a}, [offset, len](Node& n) {
        Node& p = parent(n, 0);
        for (std::size_t i = 0; i < len; ++i) p.grad[offset + i] += n.grad[i];
    });
}

Var stack_rows(const std::vector<Var>& rows) {
    if (rows.empty()) throw ShapeError("stack_rows: no rows");
    std::size_t d = rows[0].size();
    for (const Var& r : rows)
        if (r.value().ndim() != 1 || r.size() != d)
            throw ShapeError("stack_rows: rows must share one 1-D shape");
    Tensor out({rows.size(), d});
    for (std::size_t t = 0; t < rows.size(); ++t)
        for (std::size_t i = 0; i < d; ++i) out[t * d + i] = rows[t].value()[i];
    return make_node(std::move(out), rows, [d](Node& n) {
        for (std::size_t t = 0; t < n.parents.size(); ++t) {
            if (!n.parents[t]->requires_grad) continue;
            Node& p = parent(n, t);
            for (std::size_t i = 0; i < d; ++i) p.grad[i] += n.grad[t * d + i];
        }
    });
}

namespace {

double sigmoid_scalar(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

} // namespace

Var sigmoid(const Var& a) {
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = sigmoid_scalar(out[i]);
    return make_node(std::move(out), {a}, [](Node& n) {
        Node& p = parent(n, 0);
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
            double s = n.value[i];
            p.grad[i] += n.grad[i] * s * (1.0 - s);
        }
    });
}

Var tanh(const Var& a) {
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(out[i]);
    return make_node(std::move(out), {a}, [](Node& n) {
        Node& p = parent(n, 0);
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
            double t = n.value[i];
            p.grad[i] += n.grad[i] * (1.0 - t * t);
        }
    });
}

Var exp(const Var& a) {
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(out[i]);
    check_finite(out, "exp");
    return make_node(std::move(out), {a}, [](Node& n) {
        Node& p = parent(n, 0);
        for (std::size_t i = 0; i < n.grad.size(); ++i) p.grad[i] += n.grad[i] * n.value[i];
    });
}

Var log(const Var& a) {
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(out[i]);
    check_finite(out, "log");
    return make_node(std::move(out), {a}, [](Node& n) {
        const Tensor& x = n.parents[0]->value;
        Node& p = parent(n, 0);
        for (std::size_t i = 0; i < n.grad.size(); ++i) p.grad[i] += n.grad[i] / x[i];
    });
}

Var relu(const Var& a) {
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = out[i] > 0 ? out[i] : 0.0;
    return make_node(std::move(out), {a}, [](Node& n) {
        const Tensor& x = n.parents[0]->value;
        Node& p = parent(n, 0);
        for (std::size_t i = 0; i < n.grad.size(); ++i)
            if (x[i] > 0) p.grad[i] += n.grad[i];
    });
}

namespace {

// Stable softmax of one row; writes exp((x - max)/tau) normalized.
void softmax_row(const double* x, double* out, std::size_t n, double tau) {
    double mx = x[0];
    for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, x[i]);
    double z = 0;
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = std::exp((x[i] - mx) / tau);
        z += out[i];
    }
    for (std::size_t i = 0; i < n; ++i) out[i] /= z;
}

} // namespace

Var softmax(const Var& a, double tau) {
    if (tau <= 0.0) throw UsageError("softmax: temperature must be positive");
    const Tensor& av = a.value();
    if (av.ndim() != 1 && av.ndim() != 2) throw ShapeError("softmax: expects 1-D or 2-D");
    std::size_t ncols = av.ndim() == 2 ? av.cols() : av.size();
    std::size_t nrows = av.size() / ncols;
    Tensor out(av.shape());
    for (std::size_t r = 0; r < nrows; ++r)
        softmax_row(av.data() + r * ncols, out.data() + r * ncols, ncols, tau);
    check_finite(out, "softmax");
    return make_node(std::move(out), {a}, [nrows, ncols, tau](Node& n) {
        Node& p = parent(n, 0);
        for (std::size_t r = 0; r < nrows; ++r) {
            const double* s = n.value.data() + r * ncols;
            const double* g = n.grad.data() + r * ncols;
            double gs = 0;
            for (std::size_t i = 0; i < ncols; ++i) gs += g[i] * s[i];
            for (std::size_t i = 0; i < ncols; ++i)
                p.grad[r * ncols + i] += s[i] * (g[i] - gs) / tau;
        }
    });
}

Var log_softmax(const Var& a) {
    const Tensor& av = a.value();
    if (av.ndim() != 1 && av.ndim() != 2) throw ShapeError("log_softmax: expects 1-D or 2-D");
    std::size_t ncols = av.ndim() == 2 ? av.cols() : av.size();
    std::size_t nrows = av.size() / ncols;
    Tensor out(av.shape());
    for (std::size_t r = 0; r < nrows; ++r) {
        const double* x = av.data() + r * ncols;
        double mx = x[0];
        for (std::size_t i = 1; i < ncols; ++i) mx = std::max(mx, x[i]);
        double z = 0;
        for (std::size_t i = 0; i < ncols; ++i) z += std::exp(x[i] - mx);
        double lse = mx + std::log(z);
        for (std::size_t i = 0; i < ncols; ++i) out[r * ncols + i] = x[i] - lse;
    }
    check_finite(out, "log_softmax");
    return make_node(std::move(out), {a}, [nrows, ncols](Node& n) {
        Node& p = parent(n, 0);
        for (std::size_t r = 0; r < nrows; ++r) {
            const double* ls = n.value.data() + r * ncols;
            const double* g = n.grad.data() + r * ncols;
            double gsum = 0;
            for (std::size_t i = 0; i < ncols; ++i) gsum += g[i];
            for (std::size_t i = 0; i < ncols; ++i)
                p.grad[r * ncols + i] += g[i] - std::exp(ls[i]) * gsum;
        }
    });
}

Var max_over_rows(const Var& m, std::size_t row_limit) {
    const Tensor& mv = m.value();
    if (mv.ndim() != 2) throw ShapeError("max_over_rows: expects a matrix");
    if (row_limit == 0 || row_limit > mv.rows())
        throw ShapeError("max_over_rows: row_limit " + std::to_string(row_limit) + " out of " +
                         std::to_string(mv.rows()) + " rows");
    std::size_t cols = mv.cols();
    Tensor out({cols});
    // First maximal row wins on ties, so the subgradient choice is stable.
    auto argmax = std::make_shared<std::vector<std::size_t>>(cols, 0);
    for (std::size_t j = 0; j < cols; ++j) {
        double best = mv.at(0, j);
        for (std::size_t i = 1; i < row_limit; ++i)
            if (mv.at(i, j) > best) {
                best = mv.at(i, j);
                (*argmax)[j] = i;
            }
        out[j] = best;
    }
    return make_node(std::move(out), {m}, [argmax, cols](Node& n) {
        Node& p = parent(n, 0);
        std::size_t pcols = p.value.cols();
        for (std::size_t j = 0; j < cols; ++j)
            p.grad[(*argmax)[j] * pcols + j] += n.grad[j];
    });
}

Var embedding_row(const Var& table, std::size_t id) {
    const Tensor& tv = table.value();
    if (tv.ndim() != 2) throw ShapeError("embedding_row: table must be a matrix");
    if (id >= tv.rows())
        throw ShapeError("embedding_row: id " + std::to_string(id) + " out of " +
                         std::to_string(tv.rows()));
    std::size_t d = tv.cols();
    Tensor out({d});
    for (std::size_t i = 0; i < d; ++i) out[i] = tv.at(id, i);
    return make_node(std::move(out), {table}, [id, d](Node& n) {
        Node& p = parent(n, 0);
        for (std::size_t i = 0; i < d; ++i) p.grad[id * d + i] += n.grad[i];
    });
}

Var embedding_rows(const Var& table, const std::vector<std::size_t>& ids) {
    const Tensor& tv = table.value();
    if (tv.ndim() != 2) throw ShapeError("embedding_rows: table must be a matrix");
    if (ids.empty()) throw ShapeError("embedding_rows: no ids");
    std::size_t d = tv.cols();
    Tensor out({ids.size(), d});
    for (std::size_t t = 0; t < ids.size(); ++t) {
        if (ids[t] >= tv.rows())
            throw ShapeError("embedding_rows: id " + std::to_string(ids[t]) + " out of " +
                             std::to_string(tv.rows()));
        for (std::size_t i = 0; i < d; ++i) out[t * d + i] = tv.at(ids[t], i);
    }
    auto idcopy = std::make_shared<std::vector<std::size_t>>(ids);
    return make_node(std::move(out), {table}, [idcopy, d](Node& n) {
        Node& p = parent(n, 0);
        for (std::size_t t = 0; t < idcopy->size(); ++t)
            for (std::size_t i = 0; i < d; ++i)
                p.grad[(*idcopy)[t] * d + i] += n.grad[t * d + i];
    });
}

Var conv1d_valid(const Var& input, const Var& filters, const Var& bias, std::size_t width) {
    const Tensor& x = input.value();
    const Tensor& w = filters.value();
    const Tensor& b = bias.value();
    if (x.ndim() != 2 || w.ndim() != 2 || b.ndim() != 1)
        throw ShapeError("conv1d_valid: expects input (L,d), filters (F,width*d), bias (F,)");
    std::size_t len = x.rows(), d = x.cols(), nf = w.rows();
    if (width == 0 || width > len)
        throw ShapeError("conv1d_valid: width " + std::to_string(width) + " out of length " +
                         std::to_string(len));
    if (w.cols() != width * d || b.size() != nf)
        throw ShapeError("conv1d_valid: filters " + shape_str(w.shape()) + " / bias " +
                         shape_str(b.shape()) + " incompatible with input " +
                         shape_str(x.shape()));
    std::size_t windows = len - width + 1;
    Tensor out({windows, nf});
    for (std::size_t p = 0; p < windows; ++p)
        for (std::size_t f = 0; f < nf; ++f) {
            double s = b[f];
            const double* wf = w.data() + f * width * d;
            const double* xp = x.data() + p * d;
            for (std::size_t i = 0; i < width * d; ++i) s += wf[i] * xp[i];
            out.at(p, f) = s;
        }
    return make_node(std::move(out), {input, filters, bias},
                     [windows, nf, width, d](Node& n) {
                         const Tensor& x = n.parents[0]->value;
                         const Tensor& w = n.parents[1]->value;
                         for (std::size_t p = 0; p < windows; ++p)
                             for (std::size_t f = 0; f < nf; ++f) {
                                 double g = n.grad[p * nf + f];
                                 if (g == 0.0) continue;
                                 if (n.parents[0]->requires_grad) {
                                     Node& px = parent(n, 0);
                                     const double* wf = w.data() + f * width * d;
                                     for (std::size_t i = 0; i < width * d; ++i)
                                         px.grad[p * d + i] += g * wf[i];
                                 }
                                 if (n.parents[1]->requires_grad) {
                                     Node& pw = parent(n, 1);
                                     const double* xp = x.data() + p * d;
                                     for (std::size_t i = 0; i < width * d; ++i)
                                         pw.grad[f * width * d + i] += g * xp[i];
                                 }
                                 if (n.parents[2]->requires_grad) parent(n, 2).grad[f] += g;
                             }
                     });
}

Var cross_entropy(const Var& logits, std::size_t target) {
    const Tensor& x = logits.value();
    if (x.ndim() != 1) throw ShapeError("cross_entropy: expects 1-D logits");
    if (target >= x.size())
        throw ShapeError("cross_entropy: target " + std::to_string(target) + " out of " +
                         std::to_string(x.size()));
    double mx = x[0];
    for (std::size_t i = 1; i < x.size(); ++i) mx = std::max(mx, x[i]);
    double z = 0;
    for (std::size_t i = 0; i < x.size(); ++i) z += std::exp(x[i] - mx);
    double loss = mx + std::log(z) - x[target];
    Tensor out = Tensor::scalar(loss);
    check_finite(out, "cross_entropy");
    return make_node(std::move(out), {logits}, [target, mx](Node& n) {
        const Tensor& x = n.parents[0]->value;
        Node& p = parent(n, 0);
        double g = n.grad[0];
        double z = 0;
        for (std::size_t i = 0; i < x.size(); ++i) z += std::exp(x[i] - mx);
        for (std::size_t i = 0; i < x.size(); ++i) {
            double soft = std::exp(x[i] - mx) / z;
            p.grad[i] += g * (soft - (i == target ? 1.0 : 0.0));
        }
    });
}

Var bce_with_logits(const Var& logits, const Tensor& targets, const Tensor& weights) {
    const Tensor& x = logits.value();
    if (x.ndim() != 1) throw ShapeError("bce_with_logits: expects 1-D logits");
    if (!x.same_shape(targets) || !x.same_shape(weights))
        throw ShapeError("bce_with_logits: logits " + shape_str(x.shape()) + ", targets " +
                         shape_str(targets.shape()) + ", weights " +
                         shape_str(weights.shape()) + " must match");
    double wsum = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (weights[i] < 0) throw UsageError("bce_with_logits: negative weight");
        wsum += weights[i];
    }
    if (wsum <= 0) throw UsageError("bce_with_logits: weights sum to zero");
    double loss = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double l = x[i], y = targets[i];
        // max(l,0) - l*y + log(1 + exp(-|l|))
        loss += weights[i] * ((l > 0 ? l : 0.0) - l * y + std::log1p(std::exp(-std::abs(l))));
    }
    Tensor out = Tensor::scalar(loss / wsum);
    check_finite(out, "bce_with_logits");
    auto t = std::make_shared<Tensor>(targets);
    auto w = std::make_shared<Tensor>(weights);
    return make_node(std::move(out), {logits}, [t, w, wsum](Node& n) {
        const Tensor& x = n.parents[0]->value;
        Node& p = parent(n, 0);
        double g = n.grad[0];
        for (std::size_t i = 0; i < x.size(); ++i)
            p.grad[i] += g * (*w)[i] * (sigmoid_scalar(x[i]) - (*t)[i]) / wsum;
    });
}

Var mean(const Var& a) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a.value()[i];
    double inv = 1.0 / static_cast<double>(a.size());
    return make_node(Tensor::scalar(s * inv), {a}, [inv](Node& n) {
        Node& p = parent(n, 0);
        for (std::size_t i = 0; i < p.value.size(); ++i) p.grad[i] += n.grad[0] * inv;
    });
}

Var sum(const Var& a) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a.value()[i];
    return make_node(Tensor::scalar(s), {a}, [](Node& n) {
        Node& p = parent(n, 0);
        for (std::size_t i = 0; i < p.value.size(); ++i) p.grad[i] += n.grad[0];
    });
}

Var pick(const Var& a, std::size_t index) {
    if (a.value().ndim() != 1) throw ShapeError("pick: expects a 1-D operand");
    if (index >= a.size())
        throw ShapeError("pick: index " + std::to_string(index) + " out of " +
                         std::to_string(a.size()));
    return make_node(Tensor::scalar(a.value()[index]), {a}, [index](Node& n) {
        parent(n, 0).grad[index] += n.grad[0];
    });
}

void backward(const Var& loss) {
    if (!loss.defined() || loss.size() != 1)
        throw UsageError("backward: loss must be a defined scalar");

    // Iterative post-order topological sort over the reachable graph.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(loss.node().get(), 0);
    visited.insert(loss.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* p = node->parents[next++].get();
            if (visited.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    // Interior gradients are per-call scratch; leaf gradients accumulate.
    // Nodes that do not require gradient never get a buffer allocated.
    for (Node* n : order) {
        if (!n->requires_grad) continue;
        n->ensure_grad();
        if (!n->is_leaf()) n->grad.fill(0.0);
    }
    Node* root = loss.node().get();
    root->ensure_grad();
    root->grad[0] = root->is_leaf() ? root->grad[0] + 1.0 : 1.0;

    for (auto it = order.rbegin(); it != order.rend(); ++it)
        if ((*it)->backprop) (*it)->backprop(**it);
}

double grad_check(const std::function<Var()>& f, const std::vector<Var>& params, double eps) {
    double probe = f().value().item();
    if (f().value().item() != probe)
        throw UsageError("grad_check: function is not deterministic");

    zero_grads(params);
    backward(f());
    std::vector<Tensor> analytic;
    analytic.reserve(params.size());
    for (const Var& p : params) {
        p.node()->ensure_grad();
        analytic.push_back(p.grad());
    }

    double max_rel = 0;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Var p = params[pi];
        for (std::size_t i = 0; i < p.size(); ++i) {
            double orig = p.value()[i];
            p.mutable_value()[i] = orig + eps;
            double fp = f().value().item();
            p.mutable_value()[i] = orig - eps;
            double fm = f().value().item();
            p.mutable_value()[i] = orig;
            double numeric = (fp - fm) / (2.0 * eps);
            double a = analytic[pi][i];
            double rel = std::abs(a - numeric) /
                         std::max({std::abs(a), std::abs(numeric), 1e-8});
            max_rel = std::max(max_rel, rel);
        }
    }
    return max_rel;
}

} // namespace vague::nn

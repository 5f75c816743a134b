#include "moesurv/autodiff.hpp"

#include <cmath>
#include <string>

#include "moesurv/error.hpp"

namespace moesurv::ad {

using Eigen::Index;

const Matrix& Var::value() const {
    if (!graph_) throw UsageError("use of an empty Var");
    return graph_->value(id_);
}

Matrix Var::grad() const {
    const Matrix& g = graph_->grad(id_);
    if (g.size() == 0) return Matrix::Zero(rows(), cols());
    return g;
}

double Var::item() const {
    const Matrix& v = value();
    if (v.rows() != 1 || v.cols() != 1) throw UsageError("item() on a non-scalar node");
    return v(0, 0);
}

Var Graph::constant(Matrix value) { return make(std::move(value), std::span<const Var>{}, nullptr); }

Var Graph::scalar(double value) { return constant(Matrix::Constant(1, 1, value)); }

Var Graph::parameter(Parameter& p) {
    Node n;
    n.value = p.value;
    n.param = &p;
    n.needs_grad = true;
    nodes_.push_back(std::move(n));
    return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Graph::make(Matrix value, std::initializer_list<Var> parents, BackwardFn fn) {
    return make(std::move(value), std::span<const Var>(parents.begin(), parents.size()), std::move(fn));
}

Var Graph::make(Matrix value, std::span<const Var> parents, BackwardFn fn) {
    Node n;
    n.value = std::move(value);
    for (const Var& p : parents) {
        if (p.graph() != this) throw UsageError("operands belong to different graphs");
        n.needs_grad = n.needs_grad || needs_grad(p.id());
    }
    if (n.needs_grad) n.backward = std::move(fn);
    nodes_.push_back(std::move(n));
    return Var(this, static_cast<int>(nodes_.size() - 1));
}

Matrix& Graph::grad_buffer(int id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
    return n.grad;
}

void Graph::backward(Var root) {
    if (root.graph() != this) throw UsageError("backward root belongs to another graph");
    const Matrix& rv = value(root.id());
    if (rv.rows() != 1 || rv.cols() != 1)
        throw UsageError("backward requires a scalar root, got " + std::to_string(rv.rows()) + "x" +
                         std::to_string(rv.cols()));
    for (auto& n : nodes_) n.grad.resize(0, 0);
    grad_buffer(root.id())(0, 0) = 1.0;
    for (int id = root.id(); id >= 0; --id) {
        Node& n = nodes_[static_cast<std::size_t>(id)];
        if (!n.needs_grad || n.grad.size() == 0) continue;
        if (n.backward) n.backward(*this, id);
        if (n.param) n.param->grad += n.grad;
    }
}

namespace {

Index broadcast_dim(Index x, Index y, const char* op) {
    if (x == y) return x;
    if (x == 1) return y;
    if (y == 1) return x;
    throw ConfigError(std::string(op) + ": incompatible shapes (" + std::to_string(x) + " vs " +
                      std::to_string(y) + ")");
}

bool has_shape(const Matrix& m, Index rows, Index cols) { return m.rows() == rows && m.cols() == cols; }

enum class BinOp { Add, Sub, Mul };

/// out op= b, with b the same shape as out, 1x1, a row or a column.
void apply_into(Matrix& out, const Matrix& b, BinOp op) {
    if (has_shape(b, out.rows(), out.cols())) {
        switch (op) {
            case BinOp::Add: out += b; break;
            case BinOp::Sub: out -= b; break;
            case BinOp::Mul: out.array() *= b.array(); break;
        }
    } else if (b.size() == 1) {
        const double s = b(0, 0);
        switch (op) {
            case BinOp::Add: out.array() += s; break;
            case BinOp::Sub: out.array() -= s; break;
            case BinOp::Mul: out *= s; break;
        }
    } else if (b.rows() == 1) {
        switch (op) {
            case BinOp::Add: out.rowwise() += b.row(0); break;
            case BinOp::Sub: out.rowwise() -= b.row(0); break;
            case BinOp::Mul: out.array().rowwise() *= b.row(0).array(); break;
        }
    } else {
        switch (op) {
            case BinOp::Add: out.colwise() += b.col(0); break;
            case BinOp::Sub: out.colwise() -= b.col(0); break;
            case BinOp::Mul: out.array().colwise() *= b.col(0).array(); break;
        }
    }
}

/// a op b broadcast to rows x cols.
Matrix combine(const Matrix& a, const Matrix& b, Index rows, Index cols, BinOp op) {
    const bool full_a = has_shape(a, rows, cols);
    const bool full_b = has_shape(b, rows, cols);
    if (full_a && full_b) {
        switch (op) {
            case BinOp::Add: return a + b;
            case BinOp::Sub: return a - b;
            case BinOp::Mul: return a.cwiseProduct(b);
        }
    }
    if (full_b && op != BinOp::Sub) {
        Matrix out = b;
        apply_into(out, a, op);
        return out;
    }
    Matrix out = full_a ? a : Matrix(a.replicate(rows / a.rows(), cols / a.cols()));
    apply_into(out, b, op);
    return out;
}

/// Adds sign * g, summed down to the shape of node `id`.
void accumulate_reduced(Graph& gr, int id, const Matrix& g, double sign) {
    const Matrix& v = gr.value(id);
    if (has_shape(g, v.rows(), v.cols())) {
        if (sign == 1.0)
            gr.accumulate(id, g);
        else
            gr.accumulate(id, sign * g);
    } else if (v.size() == 1) {
        gr.accumulate(id, Matrix::Constant(1, 1, sign * g.sum()));
    } else if (v.rows() == 1) {
        gr.accumulate(id, sign * g.colwise().sum());
    } else {
        gr.accumulate(id, sign * g.rowwise().sum());
    }
}

Graph& graph_of(Var a) {
    if (!a.valid()) throw UsageError("operation on an empty Var");
    return *a.graph();
}

}  // namespace

Var matmul(Var a, Var b) {
    Graph& g = graph_of(a);
    const Matrix& av = a.value();
    const Matrix& bv = b.value();
    if (av.cols() != bv.rows())
        throw ConfigError("matmul: inner dimensions differ (" + std::to_string(av.rows()) + "x" +
                          std::to_string(av.cols()) + " * " + std::to_string(bv.rows()) + "x" +
                          std::to_string(bv.cols()) + ")");
    Matrix out(av.rows(), bv.cols());
    out.noalias() = av * bv;
    const int ia = a.id(), ib = b.id();
    return g.make(std::move(out), {a, b}, [ia, ib](Graph& gr, int self) {
        const Matrix& go = gr.grad(self);
        if (gr.needs_grad(ia)) gr.accumulate_product(ia, go, gr.value(ib).transpose());
        if (gr.needs_grad(ib)) gr.accumulate_product(ib, gr.value(ia).transpose(), go);
    });
}

Var add(Var a, Var b) {
    Graph& g = graph_of(a);
    const Index r = broadcast_dim(a.rows(), b.rows(), "add");
    const Index c = broadcast_dim(a.cols(), b.cols(), "add");
    Matrix out = combine(a.value(), b.value(), r, c, BinOp::Add);
    const int ia = a.id(), ib = b.id();
    return g.make(std::move(out), {a, b}, [ia, ib](Graph& gr, int self) {
        const Matrix& go = gr.grad(self);
        if (gr.needs_grad(ia)) accumulate_reduced(gr, ia, go, 1.0);
        if (gr.needs_grad(ib)) accumulate_reduced(gr, ib, go, 1.0);
    });
}

Var sub(Var a, Var b) {
    Graph& g = graph_of(a);
    const Index r = broadcast_dim(a.rows(), b.rows(), "sub");
    const Index c = broadcast_dim(a.cols(), b.cols(), "sub");
    Matrix out = combine(a.value(), b.value(), r, c, BinOp::Sub);
    const int ia = a.id(), ib = b.id();
    return g.make(std::move(out), {a, b}, [ia, ib](Graph& gr, int self) {
        const Matrix& go = gr.grad(self);
        if (gr.needs_grad(ia)) accumulate_reduced(gr, ia, go, 1.0);
        if (gr.needs_grad(ib)) accumulate_reduced(gr, ib, go, -1.0);
    });
}

Var mul(Var a, Var b) {
    Graph& g = graph_of(a);
    const Index r = broadcast_dim(a.rows(), b.rows(), "mul");
    const Index c = broadcast_dim(a.cols(), b.cols(), "mul");
    Matrix out = combine(a.value(), b.value(), r, c, BinOp::Mul);
    const int ia = a.id(), ib = b.id();
    return g.make(std::move(out), {a, b}, [ia, ib, r, c](Graph& gr, int self) {
        const Matrix& go = gr.grad(self);
        if (gr.needs_grad(ia)) accumulate_reduced(gr, ia, combine(go, gr.value(ib), r, c, BinOp::Mul), 1.0);
        if (gr.needs_grad(ib)) accumulate_reduced(gr, ib, combine(go, gr.value(ia), r, c, BinOp::Mul), 1.0);
    });
}

Var neg(Var a) { return scale(a, -1.0); }

Var scale(Var a, double c) {
    Graph& g = graph_of(a);
    const int ia = a.id();
    return g.make(a.value() * c, {a}, [ia, c](Graph& gr, int self) { gr.accumulate(ia, c * gr.grad(self)); });
}

Var add_scalar(Var a, double c) {
    Graph& g = graph_of(a);
    const int ia = a.id();
    Matrix out = a.value().array() + c;
    return g.make(std::move(out), {a}, [ia](Graph& gr, int self) { gr.accumulate(ia, gr.grad(self)); });
}

Var relu(Var a) {
    Graph& g = graph_of(a);
    const int ia = a.id();
    Matrix out = a.value().cwiseMax(0.0);
    return g.make(std::move(out), {a}, [ia](Graph& gr, int self) {
        gr.accumulate(ia, ((gr.value(ia).array() > 0.0).cast<double>() * gr.grad(self).array()).matrix());
    });
}

Var sigmoid(Var a) {
    Graph& g = graph_of(a);
    const int ia = a.id();
    Matrix out = a.value().unaryExpr([](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
    });
    return g.make(std::move(out), {a}, [ia](Graph& gr, int self) {
        const auto s = gr.value(self).array();
        gr.accumulate(ia, (gr.grad(self).array() * s * (1.0 - s)).matrix());
    });
}

Var log(Var a) {
    Graph& g = graph_of(a);
    const Matrix& av = a.value();
    for (Index i = 0; i < av.size(); ++i) {
        const double x = av.data()[i];
        if (!(x > 0.0)) throw NumericDomainError("log of non-positive value " + std::to_string(x));
    }
    const int ia = a.id();
    Matrix out = av.array().log();
    return g.make(std::move(out), {a}, [ia](Graph& gr, int self) {
        gr.accumulate(ia, (gr.grad(self).array() / gr.value(ia).array()).matrix());
    });
}

Var square(Var a) {
    Graph& g = graph_of(a);
    const int ia = a.id();
    Matrix out = a.value().array().square();
    return g.make(std::move(out), {a}, [ia](Graph& gr, int self) {
        gr.accumulate(ia, (2.0 * gr.value(ia).array() * gr.grad(self).array()).matrix());
    });
}

Var clamp_min(Var a, double lo) {
    Graph& g = graph_of(a);
    const int ia = a.id();
    Matrix out = a.value().cwiseMax(lo);
    return g.make(std::move(out), {a}, [ia, lo](Graph& gr, int self) {
        gr.accumulate(ia, ((gr.value(ia).array() > lo).cast<double>() * gr.grad(self).array()).matrix());
    });
}

Var softmax_rows(Var logits) {
    Graph& g = graph_of(logits);
    const Matrix& x = logits.value();
    if (!x.allFinite()) throw NumericDomainError("softmax_rows: non-finite logits");
    Matrix out(x.rows(), x.cols());
    for (Index r = 0; r < x.rows(); ++r) {
        const double m = x.row(r).maxCoeff();
        out.row(r) = (x.row(r).array() - m).exp();
        out.row(r) /= out.row(r).sum();
    }
    const int ia = logits.id();
    return g.make(std::move(out), {logits}, [ia](Graph& gr, int self) {
        const Matrix& y = gr.value(self);
        const Matrix& go = gr.grad(self);
        const Eigen::VectorXd dots = go.cwiseProduct(y).rowwise().sum();
        gr.accumulate(ia, (y.array() * (go.colwise() - dots).array()).matrix());
    });
}

Var sum(Var a) {
    Graph& g = graph_of(a);
    const int ia = a.id();
    return g.make(Matrix::Constant(1, 1, a.value().sum()), {a},
                  [ia](Graph& gr, int self) { gr.grad_buffer(ia).array() += gr.grad(self)(0, 0); });
}

Var mean(Var a) {
    Graph& g = graph_of(a);
    const int ia = a.id();
    const double n = static_cast<double>(a.value().size());
    if (n == 0) throw UsageError("mean of an empty matrix");
    return g.make(Matrix::Constant(1, 1, a.value().sum() / n), {a},
                  [ia, n](Graph& gr, int self) { gr.grad_buffer(ia).array() += gr.grad(self)(0, 0) / n; });
}

Var mean_cols(Var a) {
    Graph& g = graph_of(a);
    const int ia = a.id();
    const double n = static_cast<double>(a.rows());
    if (n == 0) throw UsageError("mean_cols of an empty matrix");
    Matrix out = a.value().colwise().sum() / n;
    return g.make(std::move(out), {a}, [ia, n](Graph& gr, int self) {
        gr.grad_buffer(ia).rowwise() += gr.grad(self).row(0) / n;
    });
}

Var sum_rows(Var a) {
    Graph& g = graph_of(a);
    const int ia = a.id();
    Matrix out = a.value().rowwise().sum();
    return g.make(std::move(out), {a},
                  [ia](Graph& gr, int self) { gr.grad_buffer(ia).colwise() += gr.grad(self).col(0); });
}

Var concat_cols(std::span<const Var> parts) {
    if (parts.empty()) throw UsageError("concat_cols of nothing");
    Graph& g = graph_of(parts.front());
    const Index rows = parts.front().rows();
    Index cols = 0;
    for (const Var& p : parts) {
        if (p.rows() != rows) throw ConfigError("concat_cols: row counts differ");
        cols += p.cols();
    }
    Matrix out(rows, cols);
    std::vector<int> ids;
    std::vector<Index> offsets;
    Index off = 0;
    for (const Var& p : parts) {
        out.middleCols(off, p.cols()) = p.value();
        ids.push_back(p.id());
        offsets.push_back(off);
        off += p.cols();
    }
    return g.make(std::move(out), parts, [ids, offsets](Graph& gr, int self) {
        const Matrix& go = gr.grad(self);
        for (std::size_t k = 0; k < ids.size(); ++k) {
            if (!gr.needs_grad(ids[k])) continue;
            Matrix& gi = gr.grad_buffer(ids[k]);
            gi += go.middleCols(offsets[k], gi.cols());
        }
    });
}

Var row_block(Var a, Index start, Index count) {
    Graph& g = graph_of(a);
    if (start < 0 || count < 0 || start + count > a.rows()) throw ConfigError("row_block out of range");
    const int ia = a.id();
    Matrix out = a.value().middleRows(start, count);
    return g.make(std::move(out), {a}, [ia, start, count](Graph& gr, int self) {
        gr.grad_buffer(ia).middleRows(start, count) += gr.grad(self);
    });
}

Var col_block(Var a, Index start, Index count) {
    Graph& g = graph_of(a);
    if (start < 0 || count < 0 || start + count > a.cols()) throw ConfigError("col_block out of range");
    const int ia = a.id();
    Matrix out = a.value().middleCols(start, count);
    return g.make(std::move(out), {a}, [ia, start, count](Graph& gr, int self) {
        gr.grad_buffer(ia).middleCols(start, count) += gr.grad(self);
    });
}

Var repeat_rows(Var a, Index n) {
    Graph& g = graph_of(a);
    const Matrix& av = a.value();
    Matrix out(av.rows() * n, av.cols());
    for (Index i = 0; i < av.rows(); ++i) out.middleRows(i * n, n) = av.row(i).replicate(n, 1);
    const int ia = a.id();
    return g.make(std::move(out), {a}, [ia, n](Graph& gr, int self) {
        const Matrix& go = gr.grad(self);
        Matrix& gi = gr.grad_buffer(ia);
        for (Index i = 0; i < gi.rows(); ++i) gi.row(i) += go.middleRows(i * n, n).colwise().sum();
    });
}

Var tile_rows(Var a, Index n) {
    Graph& g = graph_of(a);
    const Matrix& av = a.value();
    Matrix out = av.replicate(n, 1);
    const int ia = a.id();
    return g.make(std::move(out), {a}, [ia, n](Graph& gr, int self) {
        const Matrix& go = gr.grad(self);
        Matrix& gi = gr.grad_buffer(ia);
        const Index r = gi.rows();
        for (Index k = 0; k < n; ++k) gi += go.middleRows(k * r, r);
    });
}

Var pair_sum(Var a, Var c) {
    Graph& g = graph_of(a);
    const Matrix& av = a.value();
    const Matrix& cv = c.value();
    if (av.cols() != cv.cols()) throw ConfigError("pair_sum: column counts differ");
    const Index b = av.rows(), t = cv.rows();
    Matrix out(b * t, av.cols());
    for (Index h = 0; h < av.cols(); ++h)
        for (Index i = 0; i < b; ++i) out.col(h).segment(i * t, t) = cv.col(h).array() + av(i, h);
    const int ia = a.id(), ic = c.id();
    return g.make(std::move(out), {a, c}, [ia, ic, b, t](Graph& gr, int self) {
        const Matrix& go = gr.grad(self);
        if (gr.needs_grad(ia)) {
            Matrix ga(b, go.cols());
            for (Index h = 0; h < go.cols(); ++h)
                for (Index i = 0; i < b; ++i) ga(i, h) = go.col(h).segment(i * t, t).sum();
            gr.accumulate(ia, ga);
        }
        if (gr.needs_grad(ic)) {
            Matrix gc = Matrix::Zero(t, go.cols());
            for (Index h = 0; h < go.cols(); ++h)
                for (Index i = 0; i < b; ++i) gc.col(h) += go.col(h).segment(i * t, t);
            gr.accumulate(ic, gc);
        }
    });
}

Var unflatten(Var a, Index rows, Index cols) {
    Graph& g = graph_of(a);
    const Matrix& av = a.value();
    if (rows * cols != av.size()) throw ConfigError("unflatten: element count mismatch");
    const Index src_cols = av.cols();
    Matrix out(rows, cols);
    for (Index k = 0; k < av.size(); ++k) out(k / cols, k % cols) = av(k / src_cols, k % src_cols);
    const int ia = a.id();
    return g.make(std::move(out), {a}, [ia, cols, src_cols](Graph& gr, int self) {
        const Matrix& go = gr.grad(self);
        Matrix& gi = gr.grad_buffer(ia);
        for (Index k = 0; k < go.size(); ++k) gi(k / src_cols, k % src_cols) += go(k / cols, k % cols);
    });
}

Var cumprod_rows(Var a) {
    Graph& g = graph_of(a);
    const Matrix& av = a.value();
    Matrix out(av.rows(), av.cols());
    for (Index r = 0; r < av.rows(); ++r) {
        double acc = 1.0;
        for (Index t = 0; t < av.cols(); ++t) out(r, t) = acc *= av(r, t);
    }
    const int ia = a.id();
    // d out(t) / d a(j) = prod_{k<=t, k!=j} a(k); evaluated without division
    // so zero factors are handled exactly.
    return g.make(std::move(out), {a}, [ia](Graph& gr, int self) {
        const Matrix& x = gr.value(ia);
        const Matrix& go = gr.grad(self);
        Matrix& gi = gr.grad_buffer(ia);
        const Index cols = x.cols();
        for (Index r = 0; r < x.rows(); ++r) {
            double prefix = 1.0;  // prod_{k<j} x(k)
            for (Index j = 0; j < cols; ++j) {
                double running = prefix;
                double acc = 0.0;
                for (Index t = j; t < cols; ++t) {
                    if (t > j) running *= x(r, t);
                    acc += go(r, t) * running;
                }
                gi(r, j) += acc;
                prefix *= x(r, j);
            }
        }
    });
}

Var shift_right(Var a, double fill) {
    Graph& g = graph_of(a);
    const Matrix& av = a.value();
    Matrix out(av.rows(), av.cols());
    if (av.cols() > 0) {
        out.col(0).setConstant(fill);
        out.rightCols(av.cols() - 1) = av.leftCols(av.cols() - 1);
    }
    const int ia = a.id();
    return g.make(std::move(out), {a}, [ia](Graph& gr, int self) {
        const Matrix& go = gr.grad(self);
        Matrix& gi = gr.grad_buffer(ia);
        if (go.cols() > 1) gi.leftCols(go.cols() - 1) += go.rightCols(go.cols() - 1);
    });
}

Var gather_cols(Var a, std::span<const int> cols) {
    Graph& g = graph_of(a);
    const Matrix& av = a.value();
    if (static_cast<Index>(cols.size()) != av.rows()) throw ConfigError("gather_cols: one index per row required");
    Matrix out(av.rows(), 1);
    for (Index r = 0; r < av.rows(); ++r) {
        const int c = cols[static_cast<std::size_t>(r)];
        if (c < 0 || c >= av.cols()) throw ConfigError("gather_cols: column index out of range");
        out(r, 0) = av(r, c);
    }
    const int ia = a.id();
    std::vector<int> idx(cols.begin(), cols.end());
    return g.make(std::move(out), {a}, [ia, idx = std::move(idx)](Graph& gr, int self) {
        const Matrix& go = gr.grad(self);
        Matrix& gi = gr.grad_buffer(ia);
        for (std::size_t r = 0; r < idx.size(); ++r) gi(static_cast<Index>(r), idx[r]) += go(static_cast<Index>(r), 0);
    });
}

}  // namespace moesurv::ad

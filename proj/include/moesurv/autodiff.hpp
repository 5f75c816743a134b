#pragma once

// Define-by-run reverse-mode differentiation over dense float64 matrices.
//
// A Graph is rebuilt for every forward pass. Nodes are appended in creation
// order, so parents always precede children and a reverse sweep over node ids
// is a reverse topological order: each node's backward rule runs exactly once.

#include <functional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "moesurv/parameters.hpp"

namespace moesurv::ad {

class Graph;

/// Handle to a node in a Graph. Cheap to copy; only valid while its graph lives.
class Var {
public:
    Var() = default;

    const Matrix& value() const;
    /// Gradient after Graph::backward; a zero matrix if nothing flowed here.
    Matrix grad() const;
    Eigen::Index rows() const { return value().rows(); }
    Eigen::Index cols() const { return value().cols(); }
    /// Value of a 1x1 node.
    double item() const;

    Graph* graph() const { return graph_; }
    int id() const { return id_; }
    bool valid() const { return graph_ != nullptr; }

private:
    friend class Graph;
    Var(Graph* g, int id) : graph_(g), id_(id) {}

    Graph* graph_ = nullptr;
    int id_ = -1;
};

class Graph {
public:
    using BackwardFn = std::function<void(Graph&, int self)>;

    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    Var constant(Matrix value);
    Var scalar(double value);
    /// Leaf bound to a stored parameter; backward adds into `p.grad`.
    Var parameter(Parameter& p);

    /// Seeds d(root)/d(root) = 1 and propagates. Node gradients are reset on
    /// every call; parameter gradients accumulate across calls.
    void backward(Var root);

    std::size_t size() const { return nodes_.size(); }

    // Used by operation implementations.
    Var make(Matrix value, std::initializer_list<Var> parents, BackwardFn fn);
    Var make(Matrix value, std::span<const Var> parents, BackwardFn fn);
    const Matrix& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
    bool needs_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }
    const Matrix& grad(int id) const { return nodes_[static_cast<std::size_t>(id)].grad; }
    /// Gradient buffer of `id`, zero-initialised on first touch.
    Matrix& grad_buffer(int id);

    /// Adds `delta` into the gradient of `id`; the first contribution is
    /// assigned directly instead of being added to a zero buffer.
    template <class Expr>
    void accumulate(int id, const Expr& delta) {
        Matrix& g = nodes_[static_cast<std::size_t>(id)].grad;
        if (g.size() == 0)
            g = delta;
        else
            g += delta;
    }

    /// accumulate(id, lhs * rhs) without a temporary for the product.
    template <class L, class R>
    void accumulate_product(int id, const L& lhs, const R& rhs) {
        Matrix& g = nodes_[static_cast<std::size_t>(id)].grad;
        if (g.size() == 0) {
            g.resize(lhs.rows(), rhs.cols());
            g.noalias() = lhs * rhs;
        } else {
            g.noalias() += lhs * rhs;
        }
    }

private:
    friend class Var;

    struct Node {
        Matrix value;
        Matrix grad;
        BackwardFn backward;
        Parameter* param = nullptr;
        bool needs_grad = false;
    };

    std::vector<Node> nodes_;
};

// Linear algebra
Var matmul(Var a, Var b);

// Elementwise binary ops. Operands must share a shape, or one side may be a
// 1x1 scalar, a 1xN row or an Mx1 column broadcast against the other.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);

// Elementwise unary ops
Var neg(Var a);
Var relu(Var a);
Var sigmoid(Var a);
/// Throws NumericDomainError on any value <= 0 or NaN.
Var log(Var a);
Var square(Var a);
Var scale(Var a, double c);
Var add_scalar(Var a, double c);
/// max(a, lo); gradient flows only where a > lo.
Var clamp_min(Var a, double lo);

/// Row-wise softmax with max subtraction. Throws NumericDomainError on
/// non-finite logits.
Var softmax_rows(Var logits);

// Reductions
Var sum(Var a);        ///< 1x1
Var mean(Var a);       ///< 1x1
Var mean_cols(Var a);  ///< 1xN column means
Var sum_rows(Var a);   ///< Mx1 sums across each row

// Shape manipulation
Var concat_cols(std::span<const Var> parts);
/// Rows [start, start+count).
Var row_block(Var a, Eigen::Index start, Eigen::Index count);
/// Columns [start, start+count).
Var col_block(Var a, Eigen::Index start, Eigen::Index count);
/// Output row i*n + k is input row i (each row repeated n times in place).
Var repeat_rows(Var a, Eigen::Index n);
/// Output row i*R + k is input row k (the whole block stacked n times).
Var tile_rows(Var a, Eigen::Index n);
/// Output row i*T + t is a.row(i) + c.row(t) for a (B x H) and c (T x H):
/// the fused form of repeat_rows(a, T) + tile_rows(c, B).
Var pair_sum(Var a, Var c);
/// Reinterprets the elements, read row-major, as a rows x cols matrix.
Var unflatten(Var a, Eigen::Index rows, Eigen::Index cols);

// Survival helpers
/// Cumulative product along each row.
Var cumprod_rows(Var a);
/// out(:,0) = fill, out(:,t) = a(:,t-1).
Var shift_right(Var a, double fill);
/// out(i,0) = a(i, cols[i]).
Var gather_cols(Var a, std::span<const int> cols);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator-(Var a) { return neg(a); }

}  // namespace moesurv::ad

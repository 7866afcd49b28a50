#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "trimodal/tensor.hpp"

namespace trimodal {

class Tape;

// Handle to a node recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
public:
    Var() = default;

    Tape& tape() const { return *tape_; }
    std::size_t id() const { return id_; }
    bool valid() const { return tape_ != nullptr; }

    const Shape& shape() const;
    std::size_t rows() const;
    std::size_t cols() const;
    std::size_t numel() const;
    const std::vector<double>& value() const;
    double item() const;  // value of a single-element node
    Tensor to_tensor() const;

private:
    friend class Tape;
    Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

// Records one forward pass for reverse-mode differentiation. Nodes are kept
// in creation order and backward walks them in reverse, so traversal is
// deterministic. A tape is meant to be discarded after its backward call.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Leaf with no gradient.
    Var constant(const Tensor& t);
    Var constant(Shape shape, std::vector<double> values);

    // Leaf bound to an external tensor. When `t.requires_grad` is set,
    // backward() accumulates d(loss)/dt into t.grad.
    Var param(Tensor& t);
    Var param(ParamSet& params, const std::string& name);

    // Accumulates gradients of a single-element `loss` into every bound
    // tensor that requires grad. Calling it twice without zeroing the
    // tensors' grads adds the gradients twice.
    void backward(Var loss);

    std::size_t size() const { return nodes_.size(); }

    // Node-level access used by op implementations.
    using BackwardFn = std::function<void(Tape&, std::size_t self)>;
    Var record(Shape shape, std::vector<double> value, std::vector<std::size_t> inputs,
               BackwardFn backward);
    bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
    const std::vector<double>& value(std::size_t id) const { return nodes_[id].value; }
    const Shape& shape(std::size_t id) const { return nodes_[id].shape; }
    const std::vector<double>& grad(std::size_t id) const { return nodes_[id].grad; }
    // Gradient buffer of a node, allocated as zeros on first use.
    std::vector<double>& grad_mut(std::size_t id);

private:
    struct Node {
        Shape shape;
        std::vector<double> value;
        std::vector<double> grad;
        bool needs_grad = false;
        BackwardFn backward;
        Tensor* bound = nullptr;
    };

    Var make(Node node);

    std::vector<Node> nodes_;
};

// Matrix view of a shape: all leading extents fold into rows.
std::size_t shape_rows(const Shape& shape);
std::size_t shape_cols(const Shape& shape);

// ---- operation set ------------------------------------------------------

Var matmul(Var a, Var b);
Var transpose(Var a);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);          // elementwise
Var scale(Var a, double s);
Var scale_by(Var a, Var s);     // a * s for a single-element s
Var add_row(Var a, Var row);    // broadcast a 1xn row over every row of a
Var neg(Var a);

Var sigmoid(Var a);
Var gelu(Var a);                // exact erf form
Var exp(Var a);
Var log(Var a);

Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var slice_rows(Var a, std::size_t start, std::size_t count);
Var slice_cols(Var a, std::size_t start, std::size_t count);
// Stacks `times` copies of a vertically.
Var tile_rows(Var a, std::size_t times);
// Repeats every row of a `times` times in place ([r0,r0,r1,r1,...]).
Var repeat_rows(Var a, std::size_t times);

// Channel-wise maximum over consecutive blocks of `group` rows
// (group = 0 means the whole matrix). Ties route gradient to the first row.
Var max_pool_rows(Var a, std::size_t group = 0);
Var mean_pool_rows(Var a, std::size_t group = 0);
// Row-wise unit Euclidean norm; rows with norm < 1e-12 raise DegenerateInputError.
Var l2_normalize_rows(Var a);

// Softmax along `axis` of a matrix view (1 = columns within a row, the default).
Var softmax(Var a, int axis = 1);
Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);

// Scaled dot-product attention Softmax(Q K^T / sqrt(d_head)) V.
// `groups` independent problems are stacked along rows: Q holds groups*q
// rows and K, V hold groups*n rows. Columns split evenly into `heads`.
Var attention(Var q, Var k, Var v, std::size_t heads = 1, std::size_t groups = 1);

Var sum(Var a);
Var mean(Var a);
// Mean negative log-likelihood of softmax(logits) at the given column per row.
Var cross_entropy_rows(Var logits, std::span<const std::size_t> targets);

// x W + b for x: r x in, W: in x out, b: 1 x out.
Var linear(Var x, Var w, Var b);

}  // namespace trimodal

#include "trimodal/tape.hpp"

#include "trimodal/errors.hpp"

namespace trimodal {

std::size_t shape_cols(const Shape& shape) { return shape.back(); }

std::size_t shape_rows(const Shape& shape) { return shape_numel(shape) / shape.back(); }

const Shape& Var::shape() const { return tape_->shape(id_); }
std::size_t Var::rows() const { return shape_rows(shape()); }
std::size_t Var::cols() const { return shape_cols(shape()); }
std::size_t Var::numel() const { return tape_->value(id_).size(); }
const std::vector<double>& Var::value() const { return tape_->value(id_); }

double Var::item() const {
    if (numel() != 1) throw ContractError("item() on a tensor of shape " + shape_str(shape()));
    return value()[0];
}

Tensor Var::to_tensor() const { return Tensor(shape(), value()); }

Var Tape::make(Node node) {
    nodes_.push_back(std::move(node));
    return Var(this, nodes_.size() - 1);
}

Var Tape::constant(const Tensor& t) {
    Node n;
    n.shape = t.shape;
    n.value = t.values;
    return make(std::move(n));
}

Var Tape::constant(Shape shape, std::vector<double> values) {
    return constant(Tensor(std::move(shape), std::move(values)));
}

Var Tape::param(Tensor& t) {
    Node n;
    n.shape = t.shape;
    n.value = t.values;
    n.needs_grad = t.requires_grad;
    n.bound = t.requires_grad ? &t : nullptr;
    return make(std::move(n));
}

Var Tape::param(ParamSet& params, const std::string& name) { return param(params.at(name)); }

Var Tape::record(Shape shape, std::vector<double> value, std::vector<std::size_t> inputs,
                 BackwardFn backward) {
    Node n;
    n.shape = std::move(shape);
    n.value = std::move(value);
    for (auto id : inputs) n.needs_grad = n.needs_grad || nodes_[id].needs_grad;
    if (n.needs_grad) n.backward = std::move(backward);
    return make(std::move(n));
}

std::vector<double>& Tape::grad_mut(std::size_t id) {
    auto& n = nodes_[id];
    if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
    return n.grad;
}

void Tape::backward(Var loss) {
    if (&loss.tape() != this) throw ContractError("backward: loss recorded on a different tape");
    if (loss.numel() != 1) {
        throw ContractError("backward: loss must be a scalar, got shape " + shape_str(loss.shape()));
    }
    for (auto& n : nodes_) n.grad.clear();
    grad_mut(loss.id())[0] = 1.0;
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
        auto& n = nodes_[i];
        if (!n.needs_grad || n.grad.empty()) continue;
        if (n.backward) n.backward(*this, i);
    }
    for (auto& n : nodes_) {
        if (!n.bound || n.grad.empty()) continue;
        auto& dst = n.bound->grad;
        if (!dst) dst.emplace(n.grad.size(), 0.0);
        for (std::size_t j = 0; j < n.grad.size(); ++j) (*dst)[j] += n.grad[j];
    }
}

}  // namespace trimodal

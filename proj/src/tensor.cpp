#include "trimodal/tensor.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

#include "trimodal/errors.hpp"

namespace trimodal {

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (auto e : shape) n *= e;
    return n;
}

namespace {

void check_shape(const Shape& shape) {
    if (shape.empty()) throw DimensionError("tensor shape must have at least one extent");
    for (auto e : shape) {
        if (e == 0) throw DimensionError("tensor extents must be positive, got " + shape_str(shape));
    }
}

}  // namespace

Tensor::Tensor(Shape shape_, double fill, bool requires_grad_)
    : shape(std::move(shape_)), requires_grad(requires_grad_) {
    check_shape(shape);
    values.assign(shape_numel(shape), fill);
}

Tensor::Tensor(Shape shape_, std::vector<double> values_, bool requires_grad_)
    : shape(std::move(shape_)), values(std::move(values_)), requires_grad(requires_grad_) {
    check_shape(shape);
    if (values.size() != shape_numel(shape)) {
        throw DimensionError("tensor of shape " + shape_str(shape) + " needs " +
                             std::to_string(shape_numel(shape)) + " values, got " +
                             std::to_string(values.size()));
    }
}

std::size_t Tensor::cols() const { return shape.back(); }

std::size_t Tensor::rows() const { return values.size() / shape.back(); }

bool Tensor::all_finite() const {
    for (double v : values) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

Tensor& ParamSet::add(const std::string& name, Tensor tensor) {
    auto [it, inserted] = params_.emplace(name, std::move(tensor));
    if (!inserted) throw ContractError("duplicate parameter path '" + name + "'");
    it->second.requires_grad = true;
    return it->second;
}

Tensor& ParamSet::at(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw LookupError("no parameter named '" + name + "'");
    return it->second;
}

const Tensor& ParamSet::at(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw LookupError("no parameter named '" + name + "'");
    return it->second;
}

void ParamSet::zero_grad() {
    for (auto& [_, t] : params_) t.zero_grad();
}

std::size_t ParamSet::scalar_count() const {
    std::size_t n = 0;
    for (const auto& [_, t] : params_) n += t.numel();
    return n;
}

std::vector<std::string> ParamSet::names() const {
    std::vector<std::string> out;
    out.reserve(params_.size());
    for (const auto& [name, _] : params_) out.push_back(name);
    return out;
}

void ParamSet::merge(const ParamSet& other, const std::string& prefix) {
    for (const auto& [name, t] : other.params_) add(prefix + name, t);
}

bool ParamSet::operator==(const ParamSet& other) const {
    if (params_.size() != other.params_.size()) return false;
    auto a = params_.begin();
    auto b = other.params_.begin();
    for (; a != params_.end(); ++a, ++b) {
        if (a->first != b->first || a->second.shape != b->second.shape) return false;
        // bitwise, so -0.0 and NaN payloads count as differences
        if (std::memcmp(a->second.values.data(), b->second.values.data(),
                        a->second.values.size() * sizeof(double)) != 0) {
            return false;
        }
    }
    return true;
}

}  // namespace trimodal

#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace trimodal {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

// Dense row-major array of doubles. Every op in the engine views a tensor as
// a matrix: the last extent is the column count and all leading extents fold
// into rows, so a shape {d} vector is a single row.
struct Tensor {
    Shape shape;
    std::vector<double> values;
    bool requires_grad = false;
    std::optional<std::vector<double>> grad;

    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0, bool requires_grad = false);
    Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

    std::size_t numel() const { return values.size(); }
    std::size_t rows() const;
    std::size_t cols() const;

    double& at(std::size_t r, std::size_t c) { return values[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return values[r * cols() + c]; }

    void zero_grad() { grad.reset(); }
    bool all_finite() const;
};

// Named learnable parameters. Backed by std::map so iteration order is
// lexicographic by path and element addresses stay stable while the set lives.
class ParamSet {
public:
    using Map = std::map<std::string, Tensor>;

    Tensor& add(const std::string& name, Tensor tensor);
    Tensor& at(const std::string& name);
    const Tensor& at(const std::string& name) const;
    bool contains(const std::string& name) const { return params_.count(name) != 0; }

    void zero_grad();
    std::size_t size() const { return params_.size(); }
    std::size_t scalar_count() const;
    std::vector<std::string> names() const;

    // Copies every entry of `other` under `prefix`, rejecting duplicates.
    void merge(const ParamSet& other, const std::string& prefix = "");

    Map::iterator begin() { return params_.begin(); }
    Map::iterator end() { return params_.end(); }
    Map::const_iterator begin() const { return params_.begin(); }
    Map::const_iterator end() const { return params_.end(); }

    bool operator==(const ParamSet& other) const;

private:
    Map params_;
};

}  // namespace trimodal

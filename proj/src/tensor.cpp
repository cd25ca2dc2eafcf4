#include "vague/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace vague::nn {

namespace {

std::size_t shape_size(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return shape.empty() ? 0 : n;
}

} // namespace

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(shape_size(shape_), 0.0) {
    for (std::size_t d : shape_)
        if (d == 0) throw ShapeError("tensor: zero-sized dimension in " + shape_str(shape_));
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_size(shape_) != data_.size())
        throw ShapeError("tensor: shape " + shape_str(shape_) + " does not match " +
                         std::to_string(data_.size()) + " values");
}

Tensor Tensor::scalar(double v) { return Tensor({1}, {v}); }

Tensor Tensor::zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }

Tensor Tensor::full(std::vector<std::size_t> shape, double v) {
    Tensor t(std::move(shape));
    t.fill(v);
    return t;
}

std::size_t Tensor::rows() const {
    if (ndim() != 2) throw ShapeError("tensor: rows() on non-matrix " + shape_str(shape_));
    return shape_[0];
}

std::size_t Tensor::cols() const {
    if (ndim() != 2) throw ShapeError("tensor: cols() on non-matrix " + shape_str(shape_));
    return shape_[1];
}

double& Tensor::at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
double Tensor::at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

double Tensor::item() const {
    if (size() != 1) throw ShapeError("tensor: item() on shape " + shape_str(shape_));
    return data_[0];
}

bool Tensor::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

void Tensor::fill(double v) {
    for (double& x : data_) x = v;
}

std::string shape_str(const std::vector<std::size_t>& shape) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ", ";
        os << shape[i];
    }
    os << ')';
    return os.str();
}

Tensor xavier_init(const std::vector<std::size_t>& shape, Rng& rng) {
    if (shape.size() != 2)
        throw ShapeError("xavier_init: expected 2-D (fan_in, fan_out), got " + shape_str(shape));
    double bound = std::sqrt(6.0 / static_cast<double>(shape[0] + shape[1]));
    Tensor t(shape);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-bound, bound);
    return t;
}

double gumbel_transform(double u) {
    constexpr double kTiny = 1e-12;
    if (u < kTiny) u = kTiny;
    if (u > 1.0 - kTiny) u = 1.0 - kTiny;
    return -std::log(-std::log(u));
}

Tensor sample_gumbel(const std::vector<std::size_t>& shape, Rng& rng) {
    Tensor t(shape);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = gumbel_transform(rng.uniform());
    return t;
}

} // namespace vague::nn

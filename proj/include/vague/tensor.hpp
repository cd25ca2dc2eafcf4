#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "vague/errors.hpp"
#include "vague/rng.hpp"

namespace vague::nn {

// Dense row-major float64 tensor. Rank 1 and 2 cover every model in this
// library; scalars are rank-1 tensors of size one.
class Tensor {
  public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape);
    Tensor(std::vector<std::size_t> shape, std::vector<double> data);

    static Tensor scalar(double v);
    static Tensor zeros(std::vector<std::size_t> shape);
    static Tensor full(std::vector<std::size_t> shape, double v);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t ndim() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    std::size_t rows() const;
    std::size_t cols() const;

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }
    double& at(std::size_t r, std::size_t c);
    double at(std::size_t r, std::size_t c) const;

    // Value of a size-one tensor.
    double item() const;

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
    bool all_finite() const;
    void fill(double v);

  private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

std::string shape_str(const std::vector<std::size_t>& shape);

// Glorot/uniform initialization for a 2-D (fan_in, fan_out) matrix:
// entries i.i.d. uniform in ±sqrt(6 / (fan_in + fan_out)).
Tensor xavier_init(const std::vector<std::size_t>& shape, Rng& rng);

// Standard Gumbel(0,1) transform of a uniform draw: -log(-log(u)),
// with u clamped away from {0, 1} so the result is always finite.
double gumbel_transform(double u);

// Tensor of i.i.d. standard Gumbel noise.
Tensor sample_gumbel(const std::vector<std::size_t>& shape, Rng& rng);

} // namespace vague::nn

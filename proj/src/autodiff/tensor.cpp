#include "treesmu/tensor.hpp"

#include <algorithm>

#include "treesmu/errors.hpp"

namespace treesmu::ad {

Tensor::Tensor(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw DimensionError("tensor payload of " + std::to_string(data_.size()) +
                         " values does not fit shape " + ad::shape_string(rows, cols));
  }
}

Tensor Tensor::column(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor(n, 1, std::move(values));
}

Tensor Tensor::column(std::initializer_list<double> values) {
  return column(std::vector<double>(values));
}

Tensor Tensor::scalar(double value) { return Tensor(1, 1, value); }

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

std::string Tensor::shape_string() const { return ad::shape_string(rows_, cols_); }

std::string shape_string(std::size_t rows, std::size_t cols) {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

}  // namespace treesmu::ad

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace dni {

/// Dense row-major n-d array of doubles. This is the single value type every
/// other module trades in. Cheap to move, explicit to copy (value semantics),
/// and immutable by convention once handed across a module boundary.
class Tensor {
  public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape);
    Tensor(std::vector<std::size_t> shape, std::vector<double> data);

    static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }
    static Tensor full(std::vector<std::size_t> shape, double value);
    /// 2-d literal, used mostly in tests: Tensor::of({{1,2},{3,4}}).
    static Tensor of(std::initializer_list<std::initializer_list<double>> rows);
    static Tensor row(std::initializer_list<double> values);
    static Tensor identity(std::size_t n);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t ndim() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    /// Rows/cols of a 2-d tensor; a 1-d tensor is treated as a single row.
    std::size_t rows() const { return shape_.size() == 2 ? shape_[0] : 1; }
    std::size_t cols() const { return shape_.size() == 2 ? shape_[1] : size(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }
    double& operator()(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool all_finite() const;
    double abs_max() const;
    double sum() const;

    void fill(double value);
    std::string shape_str() const;

  private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

// ---- arithmetic -----------------------------------------------------------

/// a[m x k] * b[k x n] -> [m x n]
Tensor matmul(const Tensor& a, const Tensor& b);
/// a^T * b with a[k x m], b[k x n] -> [m x n]
Tensor matmul_tn(const Tensor& a, const Tensor& b);
/// a * b^T with a[m x k], b[n x k] -> [m x n]
Tensor matmul_nt(const Tensor& a, const Tensor& b);

Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
/// a += s * b, in place.
void axpy(Tensor& a, double s, const Tensor& b);

/// y(i,j) = x(i,j) + bias(j); bias is of length x.cols().
Tensor add_row_bias(const Tensor& x, const Tensor& bias);
/// Sum over rows -> [cols].
Tensor col_sum(const Tensor& x);
/// Mean over rows -> [cols].
Tensor col_mean(const Tensor& x);

/// Concatenate two 2-d tensors along columns (same row count).
Tensor concat_cols(const Tensor& a, const Tensor& b);
/// Columns [begin, end) of a 2-d tensor.
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end);
/// Row i of a 2-d tensor as a [1 x cols] tensor.
Tensor take_row(const Tensor& x, std::size_t i);

double dot(const Tensor& a, const Tensor& b);
double l2_norm(const Tensor& a);

/// Dies with a dimension error when the shapes disagree.
void require_same_shape(const Tensor& a, const Tensor& b, const char* where);

}  // namespace dni

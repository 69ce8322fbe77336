// SPDX-License-Identifier: Apache-2.0
#include "dni/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace dni {

namespace {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) {
        if (d == 0) throw std::invalid_argument("Tensor: zero dimension");
        n *= d;
    }
    return n;
}

void require_2d(const Tensor& t, const char* where) {
    if (t.ndim() != 2) {
        throw std::invalid_argument(std::string(where) + ": expected 2-d tensor, got " + t.shape_str());
    }
}

[[noreturn]] void shape_error(const char* where, const Tensor& a, const Tensor& b) {
    throw std::invalid_argument(std::string(where) + ": shape mismatch " + a.shape_str() + " vs " +
                                b.shape_str());
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(shape_product(shape_), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data) : shape_(std::move(shape)) {
    if (shape_product(shape_) != data.size()) {
        throw std::invalid_argument("Tensor: data length does not match shape");
    }
    data_ = std::move(data);
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value) {
    Tensor t(std::move(shape));
    t.fill(value);
    return t;
}

Tensor Tensor::of(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = rows.begin()->size();
    Tensor t({r, c});
    std::size_t i = 0;
    for (const auto& row : rows) {
        if (row.size() != c) throw std::invalid_argument("Tensor::of: ragged rows");
        for (double v : row) t.data_[i++] = v;
    }
    return t;
}

Tensor Tensor::row(std::initializer_list<double> values) {
    Tensor t({1, values.size()});
    std::copy(values.begin(), values.end(), t.data_.begin());
    return t;
}

Tensor Tensor::identity(std::size_t n) {
    Tensor t({n, n});
    for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
    return t;
}

bool Tensor::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double Tensor::abs_max() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
}

double Tensor::sum() const { return std::accumulate(data_.begin(), data_.end(), 0.0); }

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape_.size(); ++i) os << (i ? "x" : "") << shape_[i];
    os << "]";
    return os.str();
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* where) {
    if (!a.same_shape(b)) shape_error(where, a, b);
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_2d(a, "matmul");
    require_2d(b, "matmul");
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    if (b.rows() != k) shape_error("matmul", a, b);
    Tensor out({m, n});
    const double* pa = a.data();
    const double* pb = b.data();
    double* po = out.data();
    // Row-major saxpy order, blocked two output rows by four k-terms. The
    // terms are independent, so the compiler can keep both rows in vector
    // registers and share the b-row loads; the summation order is fixed, so
    // results are deterministic. All-zero a-blocks are skipped; input images
    // and one-hot rows make those common.
    const std::size_t k4 = k & ~std::size_t(3);
    const std::size_t m2 = m & ~std::size_t(1);
    std::size_t i = 0;
    for (; i < m2; i += 2) {
        const double* arow0 = pa + i * k;
        const double* arow1 = arow0 + k;
        double* orow0 = po + i * n;
        double* orow1 = orow0 + n;
        std::size_t kk = 0;
        for (; kk < k4; kk += 4) {
            const double a00 = arow0[kk], a01 = arow0[kk + 1];
            const double a02 = arow0[kk + 2], a03 = arow0[kk + 3];
            const double a10 = arow1[kk], a11 = arow1[kk + 1];
            const double a12 = arow1[kk + 2], a13 = arow1[kk + 3];
            if (a00 == 0.0 && a01 == 0.0 && a02 == 0.0 && a03 == 0.0 && a10 == 0.0 &&
                a11 == 0.0 && a12 == 0.0 && a13 == 0.0)
                continue;
            const double* b0 = pb + kk * n;
            const double* b1 = b0 + n;
            const double* b2 = b1 + n;
            const double* b3 = b2 + n;
            for (std::size_t j = 0; j < n; ++j) {
                const double v0 = b0[j], v1 = b1[j], v2 = b2[j], v3 = b3[j];
                orow0[j] += a00 * v0 + a01 * v1 + a02 * v2 + a03 * v3;
                orow1[j] += a10 * v0 + a11 * v1 + a12 * v2 + a13 * v3;
            }
        }
        for (; kk < k; ++kk) {
            const double a0 = arow0[kk], a1 = arow1[kk];
            if (a0 == 0.0 && a1 == 0.0) continue;
            const double* brow = pb + kk * n;
            for (std::size_t j = 0; j < n; ++j) {
                orow0[j] += a0 * brow[j];
                orow1[j] += a1 * brow[j];
            }
        }
    }
    for (; i < m; ++i) {
        const double* arow = pa + i * k;
        double* orow = po + i * n;
        std::size_t kk = 0;
        for (; kk < k4; kk += 4) {
            const double a0 = arow[kk], a1 = arow[kk + 1];
            const double a2 = arow[kk + 2], a3 = arow[kk + 3];
            if (a0 == 0.0 && a1 == 0.0 && a2 == 0.0 && a3 == 0.0) continue;
            const double* b0 = pb + kk * n;
            const double* b1 = b0 + n;
            const double* b2 = b1 + n;
            const double* b3 = b2 + n;
            for (std::size_t j = 0; j < n; ++j)
                orow[j] += a0 * b0[j] + a1 * b1[j] + a2 * b2[j] + a3 * b3[j];
        }
        for (; kk < k; ++kk) {
            const double av = arow[kk];
            if (av == 0.0) continue;
            const double* brow = pb + kk * n;
            for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
    return out;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
    require_2d(a, "matmul_tn");
    require_2d(b, "matmul_tn");
    if (b.rows() != a.rows()) shape_error("matmul_tn", a, b);
    // One tuned kernel serves every layout; the transpose is cheap beside it.
    return matmul(transpose(a), b);
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    require_2d(a, "matmul_nt");
    require_2d(b, "matmul_nt");
    if (b.cols() != a.cols()) shape_error("matmul_nt", a, b);
    return matmul(a, transpose(b));
}

Tensor transpose(const Tensor& a) {
    require_2d(a, "transpose");
    Tensor out({a.cols(), a.rows()});
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
    return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b[i];
    return out;
}

Tensor scale(const Tensor& a, double s) {
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= s;
    return out;
}

void axpy(Tensor& a, double s, const Tensor& b) {
    require_same_shape(a, b, "axpy");
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += s * b[i];
}

Tensor add_row_bias(const Tensor& x, const Tensor& bias) {
    require_2d(x, "add_row_bias");
    if (bias.size() != x.cols()) shape_error("add_row_bias", x, bias);
    Tensor out = x;
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) += bias[j];
    return out;
}

Tensor col_sum(const Tensor& x) {
    require_2d(x, "col_sum");
    Tensor out({x.cols()});
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < x.cols(); ++j) out[j] += x(i, j);
    return out;
}

Tensor col_mean(const Tensor& x) {
    Tensor out = col_sum(x);
    const double inv = 1.0 / static_cast<double>(x.rows());
    for (std::size_t j = 0; j < out.size(); ++j) out[j] *= inv;
    return out;
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
    require_2d(a, "concat_cols");
    require_2d(b, "concat_cols");
    if (a.rows() != b.rows()) shape_error("concat_cols", a, b);
    Tensor out({a.rows(), a.cols() + b.cols()});
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) = a(i, j);
        for (std::size_t j = 0; j < b.cols(); ++j) out(i, a.cols() + j) = b(i, j);
    }
    return out;
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end) {
    require_2d(x, "slice_cols");
    if (begin > end || end > x.cols()) throw std::invalid_argument("slice_cols: bad range");
    Tensor out({x.rows(), end - begin});
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = begin; j < end; ++j) out(i, j - begin) = x(i, j);
    return out;
}

Tensor take_row(const Tensor& x, std::size_t i) {
    require_2d(x, "take_row");
    if (i >= x.rows()) throw std::invalid_argument("take_row: row out of range");
    Tensor out({1, x.cols()});
    for (std::size_t j = 0; j < x.cols(); ++j) out(0, j) = x(i, j);
    return out;
}

double dot(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "dot");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

double l2_norm(const Tensor& a) { return std::sqrt(dot(a, a)); }

}  // namespace dni

#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "sae/errors.hpp"

namespace sae {

/// Dense row-major matrix of doubles. Examples live in rows, so a minibatch
/// is a contiguous row range. 64-bit throughout: the gradient checks need
/// the headroom.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return values_.size(); }
    bool empty() const { return values_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

    double* row(std::size_t r) { return values_.data() + r * cols_; }
    const double* row(std::size_t r) const { return values_.data() + r * cols_; }
    std::span<const double> row_span(std::size_t r) const { return {row(r), cols_}; }

    std::vector<double>& values() { return values_; }
    const std::vector<double>& values() const { return values_; }

    bool same_shape(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    std::string shape_string() const;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> values_;
};

/// a * b. Throws DimensionError naming both shapes when a.cols != b.rows.
Matrix matmul(const Matrix& a, const Matrix& b);

/// a * b^T; the inner dimension is a.cols == b.cols.
Matrix matmul_bt(const Matrix& a, const Matrix& b);

/// a^T * b; the inner dimension is a.rows == b.rows.
Matrix matmul_at(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& m);

/// Adds a length-cols bias vector to every row.
void add_row_bias(Matrix& m, std::span<const double> bias);

double sigmoid(double x);

/// Elementwise sigmoid, in place.
void sigmoid_inplace(Matrix& m);

/// Elementwise sigmoid of a copy.
Matrix sigmoid(Matrix m);

/// Mean of each column; length cols.
std::vector<double> column_mean(const Matrix& m);

}  // namespace sae

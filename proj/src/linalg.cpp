#include "sae/linalg.hpp"

#include <cmath>
#include <cstring>

namespace sae {

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    Matrix m(rows.size(), rows.size() ? rows.begin()->size() : 0);
    std::size_t r = 0;
    for (const auto& row : rows) {
        if (row.size() != m.cols())
            throw DimensionError("from_rows: ragged row " + std::to_string(r));
        std::size_t c = 0;
        for (double v : row) m(r, c++) = v;
        ++r;
    }
    return m;
}

std::string Matrix::shape_string() const {
    return std::to_string(rows_) + "x" + std::to_string(cols_);
}

namespace {

[[noreturn]] void throw_shape(const char* op, const Matrix& a, const Matrix& b) {
    throw DimensionError(std::string(op) + ": incompatible shapes " + a.shape_string() +
                         " and " + b.shape_string());
}

}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) throw_shape("matmul", a, b);
    Matrix out(a.rows(), b.cols());
    // i-k-j order: the inner loop streams over contiguous rows of b and out.
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* out_row = out.row(i);
        const double* a_row = a.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a_row[k];
            const double* b_row = b.row(k);
            for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += aik * b_row[j];
        }
    }
    return out;
}

Matrix matmul_bt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) throw_shape("matmul_bt", a, b);
    Matrix out(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* a_row = a.row(i);
        double* out_row = out.row(i);
        for (std::size_t j = 0; j < b.rows(); ++j) {
            const double* b_row = b.row(j);
            double acc = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) acc += a_row[k] * b_row[k];
            out_row[j] = acc;
        }
    }
    return out;
}

Matrix matmul_at(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) throw_shape("matmul_at", a, b);
    Matrix out(a.cols(), b.cols());
    for (std::size_t k = 0; k < a.rows(); ++k) {
        const double* a_row = a.row(k);
        const double* b_row = b.row(k);
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double aki = a_row[i];
            double* out_row = out.row(i);
            for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += aki * b_row[j];
        }
    }
    return out;
}

Matrix transpose(const Matrix& m) {
    Matrix out(m.cols(), m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c) out(c, r) = m(r, c);
    return out;
}

void add_row_bias(Matrix& m, std::span<const double> bias) {
    if (bias.size() != m.cols())
        throw DimensionError("add_row_bias: bias length " + std::to_string(bias.size()) +
                             " vs matrix " + m.shape_string());
    for (std::size_t r = 0; r < m.rows(); ++r) {
        double* row = m.row(r);
        for (std::size_t c = 0; c < m.cols(); ++c) row[c] += bias[c];
    }
}

double sigmoid(double x) {
    // exp saturates to inf/0 for |x| beyond ~709; both branches stay finite.
    return 1.0 / (1.0 + std::exp(-x));
}

void sigmoid_inplace(Matrix& m) {
    for (double& v : m.values()) v = sigmoid(v);
}

Matrix sigmoid(Matrix m) {
    sigmoid_inplace(m);
    return m;
}

std::vector<double> column_mean(const Matrix& m) {
    std::vector<double> mean(m.cols(), 0.0);
    for (std::size_t r = 0; r < m.rows(); ++r) {
        const double* row = m.row(r);
        for (std::size_t c = 0; c < m.cols(); ++c) mean[c] += row[c];
    }
    const double inv = m.rows() ? 1.0 / static_cast<double>(m.rows()) : 0.0;
    for (double& v : mean) v *= inv;
    return mean;
}

}  // namespace sae

#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace fpe {

/// Dense row-major matrix of doubles. Batch-first convention: rows index
/// samples, columns index features.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    std::size_t size() const { return data.size(); }
    bool empty() const { return data.empty(); }

    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
    bool operator==(const Matrix& o) const {
        return rows == o.rows && cols == o.cols && data == o.data;
    }
};

Matrix matmul(const Matrix& a, const Matrix& b);

/// a * b^T without materializing the transpose; b is out x in, a is n x in.
Matrix matmul_bt(const Matrix& a, const Matrix& b);

/// a^T * b; a is n x r, b is n x c, result r x c.
Matrix matmul_at(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& a);

inline void check_same_shape(const Matrix& a, const Matrix& b, const char* what) {
    if (!a.same_shape(b)) throw std::invalid_argument(std::string(what) + ": shape mismatch");
}

}  // namespace fpe

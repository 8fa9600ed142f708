#include "fpe/matrix.hpp"

namespace fpe {

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows)
        throw std::invalid_argument("matmul: inner dimensions disagree (" +
                                    std::to_string(a.cols) + " vs " + std::to_string(b.rows) + ")");
    Matrix c(a.rows, b.cols);
    // i-k-j order keeps both b and c rows contiguous.
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* arow = &a.data[i * a.cols];
        double* crow = &c.data[i * c.cols];
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = arow[k];
            if (aik == 0.0) continue;
            const double* brow = &b.data[k * b.cols];
            for (std::size_t j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
        }
    }
    return c;
}

Matrix matmul_bt(const Matrix& a, const Matrix& b) {
    if (a.cols != b.cols)
        throw std::invalid_argument("matmul_bt: inner dimensions disagree (" +
                                    std::to_string(a.cols) + " vs " + std::to_string(b.cols) + ")");
    Matrix c(a.rows, b.rows);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* arow = &a.data[i * a.cols];
        double* crow = &c.data[i * c.cols];
        for (std::size_t j = 0; j < b.rows; ++j) {
            const double* brow = &b.data[j * b.cols];
            double acc = 0.0;
            for (std::size_t k = 0; k < a.cols; ++k) acc += arow[k] * brow[k];
            crow[j] = acc;
        }
    }
    return c;
}

Matrix matmul_at(const Matrix& a, const Matrix& b) {
    if (a.rows != b.rows)
        throw std::invalid_argument("matmul_at: inner dimensions disagree (" +
                                    std::to_string(a.rows) + " vs " + std::to_string(b.rows) + ")");
    Matrix c(a.cols, b.cols);
    for (std::size_t n = 0; n < a.rows; ++n) {
        const double* arow = &a.data[n * a.cols];
        const double* brow = &b.data[n * b.cols];
        for (std::size_t i = 0; i < a.cols; ++i) {
            const double ani = arow[i];
            if (ani == 0.0) continue;
            double* crow = &c.data[i * c.cols];
            for (std::size_t j = 0; j < b.cols; ++j) crow[j] += ani * brow[j];
        }
    }
    return c;
}

Matrix transpose(const Matrix& a) {
    Matrix t(a.cols, a.rows);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
    return t;
}

}  // namespace fpe

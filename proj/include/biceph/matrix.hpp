#pragma once

#include <cstddef>
#include <vector>

#include "biceph/errors.hpp"

namespace biceph {

// Dense row-major matrix of doubles. The universal numeric carrier.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), v_(rows * cols, fill) {}

    static Matrix from_rows(const std::vector<std::vector<double>>& rows);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return v_.size(); }
    bool empty() const { return v_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return v_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return v_[r * cols_ + c]; }

    double* row_ptr(std::size_t r) { return v_.data() + r * cols_; }
    const double* row_ptr(std::size_t r) const { return v_.data() + r * cols_; }

    double* data() { return v_.data(); }
    const double* data() const { return v_.data(); }
    const std::vector<double>& values() const { return v_; }
    std::vector<double>& values() { return v_; }

    void fill(double v) { std::fill(v_.begin(), v_.end(), v); }

    bool all_finite() const;
    bool same_shape(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    Matrix& operator+=(const Matrix& other);
    Matrix& operator-=(const Matrix& other);
    Matrix& operator*=(double s);

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> v_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(Matrix a, double s);

// C = A * B, fixed (i,k,j) loop order so results are bit-identical across runs.
Matrix matmul(const Matrix& a, const Matrix& b);

// C = A * B^T without materializing the transpose.
Matrix matmul_bt(const Matrix& a, const Matrix& b);

// C = A^T * B.
Matrix matmul_at(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& m);

double max_abs_diff(const Matrix& a, const Matrix& b);

void require_shape(const Matrix& m, std::size_t rows, std::size_t cols, const char* what);
void require_finite(const Matrix& m, const char* what);

}  // namespace biceph

#ifndef RDC_MATRIX_HPP
#define RDC_MATRIX_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rdc {

/// Thrown for inconsistent dimensions anywhere in the library.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Dense row-major real matrix. Zero-row and zero-column shapes are valid.
class Matrix {
public:
    Matrix() = default;

    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    /// Builds from nested rows; every row must have `cols` entries.
    static Matrix from_rows(const std::vector<std::vector<double>>& rows, std::size_t cols) {
        Matrix m(rows.size(), cols);
        for (std::size_t r = 0; r < rows.size(); ++r) {
            if (rows[r].size() != cols) {
                throw DimensionError("matrix row " + std::to_string(r) + " has " +
                                     std::to_string(rows[r].size()) + " entries, expected " +
                                     std::to_string(cols));
            }
            std::copy(rows[r].begin(), rows[r].end(), m.data_.begin() + r * cols);
        }
        return m;
    }

    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
        std::size_t cols = rows.size() == 0 ? 0 : rows.begin()->size();
        std::vector<std::vector<double>> tmp;
        for (const auto& r : rows) {
            tmp.emplace_back(r);
        }
        return from_rows(tmp, cols);
    }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) {
            m(i, i) = 1.0;
        }
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    const std::vector<double>& data() const { return data_; }

    bool is_zero() const {
        return std::all_of(data_.begin(), data_.end(), [](double v) { return v == 0.0; });
    }

    std::vector<std::vector<double>> to_rows() const {
        std::vector<std::vector<double>> out(rows_);
        for (std::size_t r = 0; r < rows_; ++r) {
            out[r].assign(data_.begin() + r * cols_, data_.begin() + (r + 1) * cols_);
        }
        return out;
    }

    /// Appends the rows of `other`; column counts must agree.
    void append_rows(const Matrix& other) {
        if (rows_ == 0 && cols_ == 0) {
            cols_ = other.cols_;
        }
        if (other.cols_ != cols_) {
            throw DimensionError("append_rows: column mismatch");
        }
        data_.insert(data_.end(), other.data_.begin(), other.data_.end());
        rows_ += other.rows_;
    }

    void append_row(std::span<const double> values) {
        if (rows_ == 0 && cols_ == 0) {
            cols_ = values.size();
        }
        if (values.size() != cols_) {
            throw DimensionError("append_row: column mismatch");
        }
        data_.insert(data_.end(), values.begin(), values.end());
        ++rows_;
    }

    friend bool operator==(const Matrix& a, const Matrix& b) {
        return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

inline Matrix operator*(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw DimensionError("matrix product: inner dimensions differ");
    }
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t k = 0; k < a.cols(); ++k) {
            double aik = a(i, k);
            if (aik == 0.0) {
                continue;
            }
            for (std::size_t j = 0; j < b.cols(); ++j) {
                out(i, j) += aik * b(k, j);
            }
        }
    }
    return out;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += a[i] * b[i];
    }
    return s;
}

inline double max_abs(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) {
        m = std::max(m, std::abs(x));
    }
    return m;
}

}  // namespace rdc

#endif

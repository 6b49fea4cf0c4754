#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <tuple>
#include <utility>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace firzen {

// Dense row-major matrix of doubles. Small and unclever on purpose; the
// heavy lifting at desk scale is d x d matmuls.
class Mat {
public:
    Mat() = default;
    Mat(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Mat zeros(std::size_t rows, std::size_t cols) { return Mat(rows, cols, 0.0); }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    double& operator()(std::size_t r, std::size_t c) {
        assert(r < rows_ && c < cols_);
        return data_[r * cols_ + c];
    }
    double operator()(std::size_t r, std::size_t c) const {
        assert(r < rows_ && c < cols_);
        return data_[r * cols_ + c];
    }
    double* row_ptr(std::size_t r) { return data_.data() + r * cols_; }
    const double* row_ptr(std::size_t r) const { return data_.data() + r * cols_; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& raw() { return data_; }
    const std::vector<double>& raw() const { return data_; }

    void set_zero() { std::fill(data_.begin(), data_.end(), 0.0); }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    bool same_shape(const Mat& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

    friend bool operator==(const Mat& a, const Mat& b) {
        return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
    }

private:
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<double> data_;
};

inline Mat matmul(const Mat& a, const Mat& b) {
    if (a.cols() != b.rows()) throw std::invalid_argument("matmul: shape mismatch");
    Mat c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            const double* brow = b.row_ptr(k);
            double* crow = c.row_ptr(i);
            for (std::size_t j = 0; j < b.cols(); ++j) crow[j] += aik * brow[j];
        }
    }
    return c;
}

inline Mat transpose(const Mat& a) {
    Mat t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

inline double dot_rows(const Mat& a, std::size_t ra, const Mat& b, std::size_t rb) {
    assert(a.cols() == b.cols());
    double s = 0.0;
    const double* pa = a.row_ptr(ra);
    const double* pb = b.row_ptr(rb);
    for (std::size_t j = 0; j < a.cols(); ++j) s += pa[j] * pb[j];
    return s;
}

inline double row_norm(const Mat& a, std::size_t r) {
    return std::sqrt(dot_rows(a, r, a, r));
}

// Compressed sparse row matrix with double weights; graphs are stored in
// this form once frozen.
class Csr {
public:
    Csr() = default;
    Csr(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), row_start_(rows + 1, 0) {}

    // entries need not be sorted; duplicates are summed
    static Csr from_triplets(std::size_t rows, std::size_t cols,
                             const std::vector<std::tuple<std::size_t, std::size_t, double>>& trips) {
        std::vector<std::vector<std::pair<std::size_t, double>>> rowbuf(rows);
        for (const auto& [r, c, v] : trips) {
            if (r >= rows || c >= cols) throw std::out_of_range("Csr: index out of range");
            rowbuf[r].emplace_back(c, v);
        }
        Csr m(rows, cols);
        for (std::size_t r = 0; r < rows; ++r) {
            auto& buf = rowbuf[r];
            std::sort(buf.begin(), buf.end(),
                      [](const auto& x, const auto& y) { return x.first < y.first; });
            std::size_t i = 0;
            while (i < buf.size()) {
                double v = buf[i].second;
                std::size_t c = buf[i].first, j = i + 1;
                while (j < buf.size() && buf[j].first == c) v += buf[j++].second;
                m.col_.push_back(c);
                m.val_.push_back(v);
                i = j;
            }
            m.row_start_[r + 1] = m.col_.size();
        }
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t nnz() const { return col_.size(); }

    std::size_t row_begin(std::size_t r) const { return row_start_[r]; }
    std::size_t row_end(std::size_t r) const { return row_start_[r + 1]; }
    std::size_t col_at(std::size_t k) const { return col_[k]; }
    double val_at(std::size_t k) const { return val_[k]; }

    std::size_t row_nnz(std::size_t r) const { return row_start_[r + 1] - row_start_[r]; }

    double row_sum(std::size_t r) const {
        double s = 0.0;
        for (std::size_t k = row_begin(r); k < row_end(r); ++k) s += val_[k];
        return s;
    }

    double at(std::size_t r, std::size_t c) const {
        for (std::size_t k = row_begin(r); k < row_end(r); ++k)
            if (col_[k] == c) return val_[k];
        return 0.0;
    }

    Csr transposed() const {
        std::vector<std::tuple<std::size_t, std::size_t, double>> trips;
        trips.reserve(nnz());
        for (std::size_t r = 0; r < rows_; ++r)
            for (std::size_t k = row_begin(r); k < row_end(r); ++k)
                trips.emplace_back(col_[k], r, val_[k]);
        return from_triplets(cols_, rows_, trips);
    }

    Mat to_dense() const {
        Mat d(rows_, cols_);
        for (std::size_t r = 0; r < rows_; ++r)
            for (std::size_t k = row_begin(r); k < row_end(r); ++k) d(r, col_[k]) = val_[k];
        return d;
    }

    // y = this * x
    Mat multiply(const Mat& x) const {
        if (x.rows() != cols_) throw std::invalid_argument("Csr::multiply: shape mismatch");
        Mat y(rows_, x.cols());
        for (std::size_t r = 0; r < rows_; ++r) {
            double* yr = y.row_ptr(r);
            for (std::size_t k = row_begin(r); k < row_end(r); ++k) {
                const double w = val_[k];
                const double* xr = x.row_ptr(col_[k]);
                for (std::size_t j = 0; j < x.cols(); ++j) yr[j] += w * xr[j];
            }
        }
        return y;
    }

    // access for serialization
    const std::vector<std::size_t>& row_start() const { return row_start_; }
    const std::vector<std::size_t>& col_index() const { return col_; }
    const std::vector<double>& values() const { return val_; }
    void set_raw(std::vector<std::size_t> row_start, std::vector<std::size_t> col,
                 std::vector<double> val) {
        row_start_ = std::move(row_start);
        col_ = std::move(col);
        val_ = std::move(val);
    }

    friend bool operator==(const Csr& a, const Csr& b) {
        return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.row_start_ == b.row_start_ &&
               a.col_ == b.col_ && a.val_ == b.val_;
    }

private:
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<std::size_t> row_start_;
    std::vector<std::size_t> col_;
    std::vector<double> val_;
};

}  // namespace firzen

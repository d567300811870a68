#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace psim {

/**
 * Dense row-major matrix of doubles. The only numeric container used by the
 * library; row vectors are 1xN matrices.
 */
class Matrix {
public:
    Matrix() = default;
    Matrix(int rows, int cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(static_cast<size_t>(rows) * cols, fill) {
        if (rows < 0 || cols < 0) throw std::invalid_argument("Matrix: negative shape");
    }

    static Matrix from_row(const std::vector<double>& v) {
        Matrix m(1, static_cast<int>(v.size()));
        m.data_ = v;
        return m;
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(int r, int c) { return data_[static_cast<size_t>(r) * cols_ + c]; }
    double operator()(int r, int c) const { return data_[static_cast<size_t>(r) * cols_ + c]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double* row_ptr(int r) { return data_.data() + static_cast<size_t>(r) * cols_; }
    const double* row_ptr(int r) const { return data_.data() + static_cast<size_t>(r) * cols_; }

    bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

    Matrix row(int r) const {
        Matrix out(1, cols_);
        const double* src = row_ptr(r);
        for (int c = 0; c < cols_; ++c) out(0, c) = src[c];
        return out;
    }

    /// Rows [r0, r1) as a new matrix.
    Matrix slice_rows(int r0, int r1) const {
        if (r0 < 0 || r1 > rows_ || r0 > r1) throw std::out_of_range("slice_rows: bad range");
        Matrix out(r1 - r0, cols_);
        for (int r = r0; r < r1; ++r)
            for (int c = 0; c < cols_; ++c) out(r - r0, c) = (*this)(r, c);
        return out;
    }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    bool operator==(const Matrix& o) const {
        return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
    }

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> data_;
};

/// Product into a fresh matrix; backed by Eigen maps over the flat buffers.
Matrix matmul(const Matrix& a, const Matrix& b);

inline Matrix transpose(const Matrix& a) {
    Matrix out(a.cols(), a.rows());
    for (int r = 0; r < a.rows(); ++r)
        for (int c = 0; c < a.cols(); ++c) out(c, r) = a(r, c);
    return out;
}

/**
 * Deterministic random source. Wraps mt19937_64 with self-contained uniform
 * and normal mappings so that streams depend only on the seed, not on the
 * standard library's distribution implementations.
 */
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t next() { return gen_(); }

    /// Uniform in [0, 1) with 53-bit resolution.
    double uniform01() { return (gen_() >> 11) * (1.0 / 9007199254740992.0); }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Inclusive integer range.
    int64_t uniform_int(int64_t lo, int64_t hi) {
        if (lo > hi) throw std::invalid_argument("uniform_int: lo > hi");
        uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
        return lo + static_cast<int64_t>(gen_() % span);
    }

    double normal(double mu = 0.0, double sigma = 1.0) {
        if (have_spare_) {
            have_spare_ = false;
            return mu + sigma * spare_;
        }
        double u1 = 0.0;
        while (u1 <= 1e-300) u1 = uniform01();
        double u2 = uniform01();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 2.0 * M_PI * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return mu + sigma * r * std::cos(theta);
    }

    /// Derive an independent sub-stream; `stream` tags the purpose.
    Rng fork(uint64_t stream) {
        uint64_t z = (seed_mix_ ^ stream) + 0x9e3779b97f4a7c15ULL + gen_();
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return Rng(z ^ (z >> 31));
    }

private:
    std::mt19937_64 gen_;
    uint64_t seed_mix_ = 0x8e2f9d4b1c6a3e57ULL;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace psim

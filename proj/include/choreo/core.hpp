#pragma once
#ifndef CHOREO_CORE_HPP
#define CHOREO_CORE_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace choreo {

// Error categories map onto CLI exit codes (see cli.hpp).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

class NumericError : public Error {
public:
    using Error::Error;
};

// Malformed input file. Syntax errors carry a 1-based line and byte offset; structural
// errors (wrong shape, missing field) carry a JSON-pointer style location instead.
class ParseError : public ValidationError {
public:
    ParseError(const std::string& what, std::size_t line, std::size_t offset)
        : ValidationError(what + " (line " + std::to_string(line) + ", offset " + std::to_string(offset) + ")"),
          line_(line), offset_(offset) {}
    ParseError(const std::string& what, const std::string& location)
        : ValidationError(what + " (at " + location + ")") {}

    std::size_t line() const noexcept { return line_; }
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t line_ = 0;
    std::size_t offset_ = 0;
};

class IoError : public Error {
public:
    using Error::Error;
};

inline void require(bool cond, const std::string& msg)
{
    if (!cond) throw ValidationError(msg);
}

// Dense row-major matrix of doubles. Rows are frames/tokens, columns are channels.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
        : rows_(rows), cols_(cols), data_(std::move(data))
    {
        require(data_.size() == rows_ * cols_, "matrix data size does not match shape");
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

    std::span<double> flat() noexcept { return data_; }
    std::span<const double> flat() const noexcept { return data_; }
    const std::vector<double>& values() const noexcept { return data_; }

    bool same_shape(const Matrix& o) const noexcept { return rows_ == o.rows_ && cols_ == o.cols_; }

    // Rows [begin, begin + count).
    Matrix slice_rows(std::size_t begin, std::size_t count) const
    {
        require(begin + count <= rows_, "row slice out of range");
        Matrix out(count, cols_);
        std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(begin * cols_), count * cols_, out.data_.begin());
        return out;
    }

    void set_rows(std::size_t begin, const Matrix& src)
    {
        require(src.cols_ == cols_ && begin + src.rows_ <= rows_, "row assignment out of range");
        std::copy(src.data_.begin(), src.data_.end(), data_.begin() + static_cast<std::ptrdiff_t>(begin * cols_));
    }

    Matrix transposed() const
    {
        Matrix out(cols_, rows_);
        for (std::size_t r = 0; r < rows_; ++r)
            for (std::size_t c = 0; c < cols_; ++c) out(c, r) = (*this)(r, c);
        return out;
    }

    Matrix reversed_rows() const
    {
        Matrix out(rows_, cols_);
        for (std::size_t r = 0; r < rows_; ++r) out.set_row(rows_ - 1 - r, row(r));
        return out;
    }

    void set_row(std::size_t r, std::span<const double> v) { std::copy(v.begin(), v.end(), row(r).begin()); }

    Matrix& operator+=(const Matrix& o)
    {
        require(same_shape(o), "matrix shape mismatch in +=");
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }
    Matrix& operator-=(const Matrix& o)
    {
        require(same_shape(o), "matrix shape mismatch in -=");
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
        return *this;
    }
    Matrix& operator*=(double s)
    {
        for (double& v : data_) v *= s;
        return *this;
    }

    friend Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
    friend Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
    friend Matrix operator*(Matrix a, double s) { return a *= s; }
    friend Matrix operator*(double s, Matrix a) { return a *= s; }
    friend bool operator==(const Matrix&, const Matrix&) = default;

    bool all_finite() const noexcept
    {
        return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

inline Matrix vstack(const Matrix& a, const Matrix& b)
{
    require(a.cols() == b.cols(), "vstack width mismatch");
    Matrix out(a.rows() + b.rows(), a.cols());
    out.set_rows(0, a);
    out.set_rows(a.rows(), b);
    return out;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b)
{
    require(a.size() == b.size(), "max_abs_diff length mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b)
{
    require(a.same_shape(b), "max_abs_diff shape mismatch");
    return max_abs_diff(a.flat(), b.flat());
}

inline double silu(double x) noexcept { return x / (1.0 + std::exp(-x)); }

inline double softplus(double x) noexcept
{
    return x > 20.0 ? x : std::log1p(std::exp(x));
}

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept
{
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// child_seed = hash64(root, segment, window). Fixed for reproducibility; do not change.
constexpr std::uint64_t hash64(std::uint64_t root, std::uint64_t segment, std::uint64_t window) noexcept
{
    return mix64(mix64(mix64(root) ^ segment) ^ window);
}

using Rng = std::mt19937_64;

inline void fill_normal(std::span<double> out, Rng& rng)
{
    std::normal_distribution<double> dist(0.0, 1.0);
    for (double& v : out) v = dist(rng);
}

inline Matrix normal_matrix(std::size_t rows, std::size_t cols, Rng& rng)
{
    Matrix m(rows, cols);
    fill_normal(m.flat(), rng);
    return m;
}

} // namespace choreo

#endif // CHOREO_CORE_HPP

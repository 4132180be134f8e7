// Copyright (C) 2026 The memo Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace memo {

using Vector = std::vector<double>;

/// Thrown when an operation sees NaN or infinity where finite input is required.
class NonFiniteError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Row-major dense matrix of doubles.
class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static DenseMatrix identity(std::size_t n);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

    std::vector<double>& data() noexcept { return data_; }
    const std::vector<double>& data() const noexcept { return data_; }

    bool operator==(const DenseMatrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Deterministic pseudo-random stream. The engine is mt19937_64 and the
/// uniform/normal transforms are implemented here rather than through
/// <random> distributions, whose output is implementation-defined.
class SeededRng {
public:
    static constexpr std::string_view kAlgorithm = "mt19937_64+u53+box-muller";

    explicit SeededRng(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

    std::uint64_t seed() const noexcept { return seed_; }
    std::string_view algorithm() const noexcept { return kAlgorithm; }

    std::uint64_t next_u64() { return engine_(); }
    /// Uniform on [0, 1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Uniform integer on [0, n).
    std::size_t index(std::size_t n);
    double normal();
    Vector normal_vector(std::size_t n, double scale = 1.0);
    DenseMatrix normal_matrix(std::size_t rows, std::size_t cols, double scale = 1.0);

    /// Independent child stream; does not advance this one.
    SeededRng derive(std::uint64_t stream) const;

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// SplitMix64 finalizer, used for seed derivation and content hashing.
std::uint64_t mix64(std::uint64_t x) noexcept;
/// FNV-1a over a byte string.
std::uint64_t hash_bytes(std::string_view bytes) noexcept;

bool all_finite(std::span<const double> v) noexcept;
void require_finite(std::span<const double> v, const char* what);

/// Softmax with max-subtraction. Throws NonFiniteError on NaN/inf input.
Vector softmax(std::span<const double> v);

/// Standardizes to zero mean and unit variance: (v - mean) / sqrt(var + eps).
/// Requires dim >= 2. A constant input maps to exact zeros.
Vector layer_norm(std::span<const double> v, double eps = 1e-5);

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix transpose(const DenseMatrix& a);
/// y = A x
Vector matvec(const DenseMatrix& a, std::span<const double> x);
/// y = A^T x
Vector matvec_transposed(const DenseMatrix& a, std::span<const double> x);

double dot(std::span<const double> a, std::span<const double> b);
double frobenius_norm(const DenseMatrix& a);
double l2_norm(std::span<const double> v);
/// a += scale * x y^T
void add_outer(DenseMatrix& a, std::span<const double> x, std::span<const double> y, double scale = 1.0);

}  // namespace memo

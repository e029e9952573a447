#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <utility>
#include <vector>

#include "dfa/errors.hpp"

namespace dfa {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

// Uniform grid of G frequencies on [-pi, pi), each carrying weight 1/G.
// Trigonometric quadrature on this grid integrates e^{i k theta} exactly
// for all |k| < G, so G must exceed twice the largest polynomial degree
// involved in any integrand.
struct FrequencyGrid {
    explicit FrequencyGrid(int size_in) : size(size_in) {
        if (size < 2) throw InvalidInput("frequency grid needs at least 2 nodes");
    }
    double node(int g) const { return -M_PI + 2.0 * M_PI * g / size; }
    double weight() const { return 1.0 / size; }
    int size;
};

// Rational spectral density with finite coefficient sequence:
//   Phi(theta) = sum_{k=-n}^{n} R_k e^{-i k theta},  R_{-k} = R_k^T.
// Only R_0..R_n are stored; R_0 is symmetrized on construction. R_k is the
// lag-k covariance E[y(t+k) y(t)^T] of the process the density describes.
class SpectralDensity {
public:
    SpectralDensity(int m, int n)
        : m_(m), n_(n), coeffs_(static_cast<std::size_t>(n + 1), Matrix::Zero(m, m)) {
        check_dims(m, n);
    }

    explicit SpectralDensity(std::vector<Matrix> coeffs)
        : m_(coeffs.empty() ? 0 : static_cast<int>(coeffs[0].rows())),
          n_(static_cast<int>(coeffs.size()) - 1),
          coeffs_(std::move(coeffs)) {
        check_dims(m_, n_);
        for (const Matrix& c : coeffs_) {
            if (c.rows() != m_ || c.cols() != m_)
                throw InvalidInput("spectral density coefficients must be square and uniform");
        }
        coeffs_[0] = 0.5 * (coeffs_[0] + coeffs_[0].transpose()).eval();
    }

    int channels() const { return m_; }
    int order() const { return n_; }
    const Matrix& coeff(int k) const { return coeffs_[static_cast<std::size_t>(k)]; }
    const std::vector<Matrix>& coeffs() const { return coeffs_; }

    // Hermitian value at a single frequency.
    CMatrix eval(double theta) const {
        CMatrix out = coeffs_[0].cast<std::complex<double>>();
        for (int k = 1; k <= n_; ++k) {
            std::complex<double> z(std::cos(k * theta), -std::sin(k * theta));
            out += z * coeffs_[k].cast<std::complex<double>>() +
                   std::conj(z) * coeffs_[k].transpose().cast<std::complex<double>>();
        }
        return 0.5 * (out + out.adjoint()).eval();
    }

    SpectralDensity operator+(const SpectralDensity& other) const {
        if (other.m_ != m_ || other.n_ != n_)
            throw InvalidInput("spectral density shapes must match");
        std::vector<Matrix> sum = coeffs_;
        for (int k = 0; k <= n_; ++k) sum[static_cast<std::size_t>(k)] += other.coeff(k);
        return SpectralDensity(std::move(sum));
    }

private:
    static void check_dims(int m, int n) {
        if (m < 1 || n < 0) throw InvalidInput("spectral density needs m >= 1, n >= 0");
    }

    int m_;
    int n_;
    std::vector<Matrix> coeffs_;
};

// Evaluates a spectral density on every grid node. Enforces the resolution
// invariant G >= 2(n+1) so that grid quadrature of the density is exact.
inline std::vector<CMatrix> eval_on_grid(const SpectralDensity& s, const FrequencyGrid& grid) {
    if (grid.size < 2 * (s.order() + 1))
        throw InvalidInput("grid too coarse for spectral density order");
    std::vector<CMatrix> values;
    values.reserve(static_cast<std::size_t>(grid.size));
    for (int g = 0; g < grid.size; ++g) values.push_back(s.eval(grid.node(g)));
    return values;
}

// Element of M_{m,n}: a row of n+1 square blocks [Y_0, Y_1, ..., Y_n] with
// Y_0 symmetric. Carries the inner product <A,B> = sum_j tr(A_j^T B_j).
class BlockRow {
public:
    BlockRow(int m, int n)
        : m_(m), n_(n), blocks_(static_cast<std::size_t>(n + 1), Matrix::Zero(m, m)) {
        if (m < 1 || n < 0) throw InvalidInput("block row needs m >= 1, n >= 0");
    }

    explicit BlockRow(std::vector<Matrix> blocks)
        : m_(blocks.empty() ? 0 : static_cast<int>(blocks[0].rows())),
          n_(static_cast<int>(blocks.size()) - 1),
          blocks_(std::move(blocks)) {
        if (m_ < 1 || n_ < 0) throw InvalidInput("block row needs m >= 1, n >= 0");
        for (const Matrix& b : blocks_) {
            if (b.rows() != m_ || b.cols() != m_)
                throw InvalidInput("block row blocks must be square and uniform");
        }
        blocks_[0] = 0.5 * (blocks_[0] + blocks_[0].transpose()).eval();
    }

    int channels() const { return m_; }
    int order() const { return n_; }
    const Matrix& block(int j) const { return blocks_[static_cast<std::size_t>(j)]; }
    Matrix& block_mutable(int j) { return blocks_[static_cast<std::size_t>(j)]; }

    BlockRow operator+(const BlockRow& o) const { return combined(o, 1.0); }
    BlockRow operator-(const BlockRow& o) const { return combined(o, -1.0); }
    BlockRow scaled(double t) const {
        BlockRow out = *this;
        for (Matrix& b : out.blocks_) b *= t;
        return out;
    }

    double squared_norm() const {
        double s = 0.0;
        for (const Matrix& b : blocks_) s += b.squaredNorm();
        return s;
    }
    double norm() const { return std::sqrt(squared_norm()); }

private:
    BlockRow combined(const BlockRow& o, double sign) const {
        if (o.m_ != m_ || o.n_ != n_) throw InvalidInput("block row shapes must match");
        BlockRow out = *this;
        for (int j = 0; j <= n_; ++j)
            out.blocks_[static_cast<std::size_t>(j)] += sign * o.block(j);
        return out;
    }

    int m_;
    int n_;
    std::vector<Matrix> blocks_;
};

inline double inner(const Matrix& a, const Matrix& b) {
    return a.cwiseProduct(b).sum();
}

inline double inner(const BlockRow& a, const BlockRow& b) {
    if (a.channels() != b.channels() || a.order() != b.order())
        throw InvalidInput("block row shapes must match");
    double s = 0.0;
    for (int j = 0; j <= a.order(); ++j) s += inner(a.block(j), b.block(j));
    return s;
}

// Symmetric matrix of (n+1) x (n+1) square blocks of size m, stored dense.
class SymBlockMatrix {
public:
    SymBlockMatrix(int m, int n)
        : m_(m), n_(n), data_(Matrix::Zero(dim(m, n), dim(m, n))) {
        if (m < 1 || n < 0) throw InvalidInput("block matrix needs m >= 1, n >= 0");
    }

    SymBlockMatrix(int m, int n, const Matrix& dense) : m_(m), n_(n) {
        if (m < 1 || n < 0) throw InvalidInput("block matrix needs m >= 1, n >= 0");
        if (dense.rows() != dim(m, n) || dense.cols() != dim(m, n))
            throw InvalidInput("dense matrix has wrong dimension for block structure");
        data_ = 0.5 * (dense + dense.transpose());
    }

    static int dim(int m, int n) { return m * (n + 1); }

    int channels() const { return m_; }
    int order() const { return n_; }
    int dimension() const { return m_ * (n_ + 1); }
    const Matrix& data() const { return data_; }

    Matrix block(int i, int j) const {
        return data_.block(i * m_, j * m_, m_, m_);
    }

private:
    int m_;
    int n_;
    Matrix data_;
};

inline double inner(const SymBlockMatrix& a, const SymBlockMatrix& b) {
    return inner(a.data(), b.data());
}

}  // namespace dfa

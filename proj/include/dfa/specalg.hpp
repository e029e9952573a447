#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <vector>

#include "dfa/errors.hpp"
#include "dfa/types.hpp"

namespace dfa {

// Mean of f over the frequency grid, i.e. the quadrature approximation of
// (1/2pi) \int_{-pi}^{pi} f(theta) d(theta).
template <class F>
double grid_integral(const FrequencyGrid& grid, F&& f) {
    double acc = 0.0;
    for (int g = 0; g < grid.size; ++g) acc += f(grid.node(g));
    return acc * grid.weight();
}

// Coefficients of Phi = Delta X Delta^* where Delta(e^{i theta}) is the
// block shift row [I, e^{i theta} I, ..., e^{i n theta} I]:
//   R_0 = sum_h X_{hh},  R_k = sum_h X_{h,h+k}.
inline SpectralDensity build_from_sym(const SymBlockMatrix& x) {
    const int m = x.channels();
    const int n = x.order();
    std::vector<Matrix> coeffs(static_cast<std::size_t>(n + 1), Matrix::Zero(m, m));
    for (int k = 0; k <= n; ++k)
        for (int h = 0; h + k <= n; ++h) coeffs[static_cast<std::size_t>(k)] += x.block(h, h + k);
    return SpectralDensity(std::move(coeffs));
}

// Symmetric block Toeplitz lift: block (i,j) = Y_{j-i} for j >= i and
// Y_{i-j}^T for j < i.
inline SymBlockMatrix toeplitz_T(const BlockRow& y) {
    const int m = y.channels();
    const int n = y.order();
    Matrix dense = Matrix::Zero(m * (n + 1), m * (n + 1));
    for (int i = 0; i <= n; ++i)
        for (int j = 0; j <= n; ++j) {
            if (j >= i)
                dense.block(i * m, j * m, m, m) = y.block(j - i);
            else
                dense.block(i * m, j * m, m, m) = y.block(i - j).transpose();
        }
    return SymBlockMatrix(m, n, dense);
}

// Adjoint of toeplitz_T under <A,B> = sum_j tr(A_j^T B_j) on block rows and
// the Frobenius inner product on symmetric block matrices:
//   [D(X)]_0 = sum_h X_{hh},  [D(X)]_j = 2 sum_h X_{h,h+j}.
inline BlockRow adjoint_D(const SymBlockMatrix& x) {
    const int m = x.channels();
    const int n = x.order();
    BlockRow out(m, n);
    for (int j = 0; j <= n; ++j) {
        Matrix acc = Matrix::Zero(m, m);
        for (int h = 0; h + j <= n; ++h) acc += x.block(h, h + j);
        out.block_mutable(j) = (j == 0) ? acc : (2.0 * acc).eval();
    }
    return out;
}

// Off-diagonal part of a square matrix (diagonal zeroed).
inline Matrix ofd(const Matrix& a) {
    if (a.rows() != a.cols()) throw InvalidInput("ofd needs a square matrix");
    Matrix out = a;
    out.diagonal().setZero();
    return out;
}

// Blockwise off-diagonal projection on M_{m,n}: zeroes the diagonal of every
// block. Idempotent and self-adjoint; its range is the constraint space of
// hollow block rows.
inline BlockRow ofd_block(const BlockRow& y) {
    BlockRow out = y;
    for (int j = 0; j <= y.order(); ++j) out.block_mutable(j).diagonal().setZero();
    return out;
}

namespace detail {

inline Eigen::SelfAdjointEigenSolver<CMatrix> eig_of(const CMatrix& a) {
    Eigen::SelfAdjointEigenSolver<CMatrix> es(a);
    if (es.info() != Eigen::Success) throw NotPositiveDefinite("eigendecomposition failed");
    return es;
}

}  // namespace detail

// Grid quadrature of log det Phi. Eigenvalues below 1e-12 times the mean
// grid eigenvalue are floored before the log; if more than 1% of nodes need
// flooring the spectrum is reported as degenerate.
inline double log_det_integral(const SpectralDensity& s, const FrequencyGrid& grid) {
    const std::vector<CMatrix> values = eval_on_grid(s, grid);
    const int m = s.channels();
    double mean_eig = 0.0;
    for (const CMatrix& v : values) mean_eig += v.real().trace();
    mean_eig /= static_cast<double>(grid.size) * m;
    if (!(mean_eig > 0.0)) throw DegenerateSpectrum("spectrum has non-positive mean eigenvalue");
    const double floor = 1e-12 * mean_eig;

    double acc = 0.0;
    int clamped_nodes = 0;
    for (const CMatrix& v : values) {
        Eigen::SelfAdjointEigenSolver<CMatrix> es = detail::eig_of(v);
        bool clamped = false;
        for (int i = 0; i < m; ++i) {
            double lam = es.eigenvalues()[i];
            if (lam < floor) {
                lam = floor;
                clamped = true;
            }
            acc += std::log(lam);
        }
        if (clamped) ++clamped_nodes;
    }
    if (clamped_nodes > grid.size / 100)
        throw DegenerateSpectrum("spectrum is singular on more than 1% of grid nodes");
    return acc * grid.weight();
}

// Itakura-Saito divergence between spectra on the grid:
//   S(Phi1 || Phi2) = \int log det(Phi2 Phi1^{-1}) + tr(Phi2^{-1} Phi1 - I).
// Zero iff Phi1 = Phi2 on the grid; both spectra must be positive definite
// at every node.
inline double is_divergence(const SpectralDensity& phi1, const SpectralDensity& phi2,
                            const FrequencyGrid& grid) {
    if (phi1.channels() != phi2.channels())
        throw InvalidInput("divergence needs spectra with equal channel counts");
    const int m = phi1.channels();
    const std::vector<CMatrix> v1 = eval_on_grid(phi1, grid);
    const std::vector<CMatrix> v2 = eval_on_grid(phi2, grid);
    double acc = 0.0;
    for (int g = 0; g < grid.size; ++g) {
        Eigen::SelfAdjointEigenSolver<CMatrix> e1 = detail::eig_of(v1[static_cast<std::size_t>(g)]);
        Eigen::SelfAdjointEigenSolver<CMatrix> e2 = detail::eig_of(v2[static_cast<std::size_t>(g)]);
        if (e1.eigenvalues().minCoeff() <= 0.0)
            throw NotPositiveDefinite("first spectrum is singular at a grid node");
        if (e2.eigenvalues().minCoeff() <= 0.0)
            throw NotPositiveDefinite("second spectrum is singular at a grid node");
        for (int i = 0; i < m; ++i)
            acc += std::log(e2.eigenvalues()[i]) - std::log(e1.eigenvalues()[i]);
        CMatrix b = e2.eigenvectors().adjoint() * v1[static_cast<std::size_t>(g)] * e2.eigenvectors();
        for (int i = 0; i < m; ++i) acc += b(i, i).real() / e2.eigenvalues()[i] - 1.0;
    }
    return acc * grid.weight();
}

// Fourier coefficients of the inverse spectrum:
//   P_k = \int Phi^{-1}(theta) e^{i k theta} d(theta)/2pi,  k = 0..n.
// Returned as a block row [P_0 ... P_n]. The grid must resolve the inverse
// well; G >= 64 (n+1) is enforced.
inline BlockRow inverse_fourier_coeffs(const SpectralDensity& phihat, int n,
                                       const FrequencyGrid& grid) {
    if (n < 0) throw InvalidInput("inverse Fourier coefficients need n >= 0");
    if (grid.size < 64 * (n + 1))
        throw InvalidInput("grid too coarse for inverse Fourier coefficients: need G >= 64 (n+1)");
    const int m = phihat.channels();
    const std::vector<CMatrix> values = eval_on_grid(phihat, grid);
    std::vector<CMatrix> acc(static_cast<std::size_t>(n + 1), CMatrix::Zero(m, m));
    for (int g = 0; g < grid.size; ++g) {
        Eigen::SelfAdjointEigenSolver<CMatrix> es = detail::eig_of(values[static_cast<std::size_t>(g)]);
        if (es.eigenvalues().minCoeff() <= 0.0)
            throw NotPositiveDefinite("spectrum is singular at a grid node");
        CMatrix inv = es.eigenvectors() *
                      es.eigenvalues().cwiseInverse().asDiagonal().toDenseMatrix().cast<std::complex<double>>() *
                      es.eigenvectors().adjoint();
        const double theta = grid.node(g);
        for (int k = 0; k <= n; ++k) {
            std::complex<double> z(std::cos(k * theta), std::sin(k * theta));
            acc[static_cast<std::size_t>(k)] += z * inv;
        }
    }
    std::vector<Matrix> blocks;
    blocks.reserve(static_cast<std::size_t>(n + 1));
    for (int k = 0; k <= n; ++k)
        blocks.push_back(acc[static_cast<std::size_t>(k)].real() * grid.weight());
    return BlockRow(std::move(blocks));
}

}  // namespace dfa

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "dfa/errors.hpp"
#include "dfa/rng.hpp"
#include "dfa/specalg.hpp"
#include "dfa/types.hpp"

namespace dfa {

// Multivariate series y(1..N) stored column per time point.
struct TimeSeries {
    Matrix values;                        // m x N
    std::vector<std::string> names;       // optional channel names

    int channels() const { return static_cast<int>(values.rows()); }
    long length() const { return static_cast<long>(values.cols()); }

    static TimeSeries create(Matrix values, std::vector<std::string> names = {}) {
        if (values.rows() < 1 || values.cols() < 1)
            throw InvalidInput("time series needs at least one channel and one sample");
        if (!values.allFinite()) throw InvalidInput("time series contains non-finite values");
        if (!names.empty() && static_cast<long>(names.size()) != values.rows())
            throw InvalidInput("channel name count must match channel count");
        return TimeSeries{std::move(values), std::move(names)};
    }
};

// Biased sample covariances with divisor N:
//   R_j = (1/N) sum_{t=1}^{N-j} y(t+j) y(t)^T,  j = 0..n,  R_0 symmetrized.
inline std::vector<Matrix> sample_covariances(const TimeSeries& y, int n) {
    const int m = y.channels();
    const long N = y.length();
    if (n < 0) throw InvalidInput("covariance order must be nonnegative");
    if (N <= n) throw InsufficientData("need more samples than covariance lags");
    std::vector<Matrix> covs(static_cast<std::size_t>(n + 1), Matrix::Zero(m, m));
    for (int j = 0; j <= n; ++j) {
        Matrix acc = Matrix::Zero(m, m);
        for (long t = 0; t + j < N; ++t)
            acc.noalias() += y.values.col(t + j) * y.values.col(t).transpose();
        covs[static_cast<std::size_t>(j)] = acc / static_cast<double>(N);
    }
    covs[0] = 0.5 * (covs[0] + covs[0].transpose()).eval();
    return covs;
}

struct PeriodogramResult {
    SpectralDensity phi;
    double eps_used;
};

// Lag-truncated periodogram, regularized to be positive definite on the
// grid: if the raw estimate has minimum grid eigenvalue lambda_min <= 0,
// eps = |lambda_min| + 1e-3 tr(R_0)/m is added to R_0. The margin must keep
// the regularized spectrum comfortably invertible: resampling-based
// tolerance calibration divides by these estimates at their worst node, so
// a margin near machine noise makes the calibrated radius blow up.
inline PeriodogramResult truncated_periodogram(const TimeSeries& y, int n,
                                               const FrequencyGrid& grid) {
    std::vector<Matrix> covs = sample_covariances(y, n);
    const double trace_scale = covs[0].trace() / y.channels();
    SpectralDensity raw(std::move(covs));
    double min_eig = std::numeric_limits<double>::infinity();
    for (const CMatrix& v : eval_on_grid(raw, grid)) {
        Eigen::SelfAdjointEigenSolver<CMatrix> es = detail::eig_of(v);
        min_eig = std::min(min_eig, es.eigenvalues().minCoeff());
    }
    double eps = 0.0;
    if (min_eig <= 0.0) eps = -min_eig + 1e-3 * trace_scale;
    if (eps > 0.0) {
        std::vector<Matrix> shifted = raw.coeffs();
        shifted[0] += eps * Matrix::Identity(y.channels(), y.channels());
        return PeriodogramResult{SpectralDensity(std::move(shifted)), eps};
    }
    return PeriodogramResult{std::move(raw), 0.0};
}

namespace detail {

// Block-banded Cholesky factor of the order-K block Toeplitz moment matrix
// with blocks (i,j) = R_{i-j}. Returns the last block row reversed, i.e.
// the coefficients [L_{K,K}, L_{K,K-1}, ..., L_{K,K-n}].
inline std::vector<Matrix> bauer_last_row(const SpectralDensity& s, int K) {
    const int m = s.channels();
    const int n = s.order();
    // rows[i mod (n+1)] holds blocks L_{i,j} for j = i-n..i (left-padded).
    std::vector<std::vector<Matrix>> rows(static_cast<std::size_t>(n + 1),
                                          std::vector<Matrix>(static_cast<std::size_t>(n + 1)));
    auto stored = [&](int i, int j) -> Matrix& {
        return rows[static_cast<std::size_t>(i % (n + 1))][static_cast<std::size_t>(j - i + n)];
    };
    std::vector<Eigen::LLT<Matrix>> diag_llt(static_cast<std::size_t>(n + 1));
    for (int i = 0; i <= K; ++i) {
        for (int j = std::max(0, i - n); j <= i; ++j) {
            Matrix acc = s.coeff(i - j);
            for (int k = std::max(0, i - n); k < j; ++k)
                acc.noalias() -= stored(i, k) * stored(j, k).transpose();
            if (j < i) {
                stored(i, j) = diag_llt[static_cast<std::size_t>(j % (n + 1))]
                                   .matrixU()
                                   .solve<Eigen::OnTheRight>(acc);
            } else {
                Eigen::LLT<Matrix> llt(0.5 * (acc + acc.transpose()));
                if (llt.info() != Eigen::Success)
                    throw FactorizationDiverged("block Toeplitz moment matrix is not positive definite");
                stored(i, i) = llt.matrixL();
                diag_llt[static_cast<std::size_t>(i % (n + 1))] = llt;
            }
        }
    }
    std::vector<Matrix> w(static_cast<std::size_t>(n + 1), Matrix::Zero(m, m));
    for (int k = 0; k <= n; ++k)
        if (K - k >= 0) w[static_cast<std::size_t>(k)] = stored(K, K - k);
    return w;
}

inline CMatrix eval_ma_transfer(const std::vector<Matrix>& w, double theta) {
    CMatrix out = w[0].cast<std::complex<double>>();
    for (std::size_t k = 1; k < w.size(); ++k) {
        std::complex<double> z(std::cos(k * theta), -std::sin(k * theta));
        out += z * w[k].cast<std::complex<double>>();
    }
    return out;
}

}  // namespace detail

// Spectral factorization Phi = W W^* with W(z) = W_0 + W_1 z^{-1} + ... +
// W_n z^{-n} minimum phase and W_0 lower triangular with positive diagonal.
// The truncation K is doubled (up to 512) until the factor reproduces Phi on
// the grid within rel_tol in supremum Frobenius norm.
inline std::vector<Matrix> bauer_factorize(const SpectralDensity& s, const FrequencyGrid& grid,
                                           int K = 64, double rel_tol = 1e-4) {
    if (K < 1) throw InvalidInput("factorization truncation must be positive");
    const std::vector<CMatrix> values = eval_on_grid(s, grid);
    double sup_phi = 0.0;
    for (const CMatrix& v : values) {
        Eigen::SelfAdjointEigenSolver<CMatrix> es = detail::eig_of(v);
        if (es.eigenvalues().minCoeff() <= 0.0)
            throw NotPositiveDefinite("spectrum must be positive definite on the grid");
        sup_phi = std::max(sup_phi, v.norm());
    }
    const int cap = std::max(K, 512);
    for (int trunc = K;; trunc *= 2) {
        std::vector<Matrix> w = detail::bauer_last_row(s, trunc);
        double sup_err = 0.0;
        for (int g = 0; g < grid.size; ++g) {
            CMatrix wv = detail::eval_ma_transfer(w, grid.node(g));
            sup_err = std::max(sup_err, (wv * wv.adjoint() - values[static_cast<std::size_t>(g)]).norm());
        }
        if (sup_err <= rel_tol * sup_phi) return w;
        if (trunc >= cap)
            throw FactorizationDiverged("factor residual did not meet tolerance at maximum truncation");
    }
}

// Moving-average factor model y(t) = W_L(z) u(t) + W_D(z) w(t) with W_L
// m x r, W_D m x m diagonal, both polynomial of degree n in z^{-1}.
struct MAFactorModel {
    int m = 0;
    int r = 0;
    int n = 0;
    std::vector<Matrix> WL;  // n+1 blocks, m x r
    std::vector<Matrix> WD;  // n+1 blocks, m x m diagonal

    static MAFactorModel create(std::vector<Matrix> WL, std::vector<Matrix> WD) {
        if (WL.empty() || WD.empty() || WL.size() != WD.size())
            throw InvalidInput("factor model needs matching coefficient counts");
        MAFactorModel model;
        model.m = static_cast<int>(WD[0].rows());
        model.r = static_cast<int>(WL[0].cols());
        model.n = static_cast<int>(WL.size()) - 1;
        for (const Matrix& w : WL)
            if (w.rows() != model.m || w.cols() != model.r)
                throw InvalidInput("low-rank coefficients must share their shape");
        for (const Matrix& w : WD) {
            if (w.rows() != model.m || w.cols() != model.m)
                throw InvalidInput("diagonal coefficients must be m x m");
            if (ofd(w).norm() != 0.0)
                throw InvalidInput("diagonal coefficients must be diagonal matrices");
        }
        model.WL = std::move(WL);
        model.WD = std::move(WD);
        return model;
    }
};

// Applies the polynomial filter sum_k W_k z^{-k} to an input series with
// zero initial conditions.
inline Matrix filter_ma(const std::vector<Matrix>& w, const Matrix& input) {
    const long N = input.cols();
    Matrix out = Matrix::Zero(w[0].rows(), N);
    for (std::size_t k = 0; k < w.size(); ++k)
        for (long t = static_cast<long>(k); t < N; ++t)
            out.col(t).noalias() += w[k] * input.col(t - static_cast<long>(k));
    return out;
}

// Simulates the factor model with independent standard normal inputs. At
// each time step the r factor inputs are drawn first, then the m idiosyncratic
// inputs, which makes the draw order part of the contract.
inline TimeSeries simulate_ma(const MAFactorModel& model, long N, Rng& rng) {
    if (N < 1) throw InvalidInput("simulation length must be positive");
    Matrix u(model.r, N);
    Matrix w(model.m, N);
    for (long t = 0; t < N; ++t) {
        for (int i = 0; i < model.r; ++i) u(i, t) = rng.normal();
        for (int i = 0; i < model.m; ++i) w(i, t) = rng.normal();
    }
    Matrix y = filter_ma(model.WL, u) + filter_ma(model.WD, w);
    return TimeSeries::create(std::move(y));
}

// Spectral density sum_j R_j e^{-i j theta} of the MA filter output, with
// R_j = sum_k W_{k+j} W_k^T.
inline SpectralDensity ma_spectrum(const std::vector<Matrix>& w) {
    const int n = static_cast<int>(w.size()) - 1;
    const int m = static_cast<int>(w[0].rows());
    std::vector<Matrix> coeffs(static_cast<std::size_t>(n + 1), Matrix::Zero(m, m));
    for (int j = 0; j <= n; ++j)
        for (int k = 0; k + j <= n; ++k)
            coeffs[static_cast<std::size_t>(j)].noalias() +=
                w[static_cast<std::size_t>(k + j)] * w[static_cast<std::size_t>(k)].transpose();
    return SpectralDensity(std::move(coeffs));
}

inline SpectralDensity model_spectrum(const MAFactorModel& model) {
    return ma_spectrum(model.WL) + ma_spectrum(model.WD);
}

namespace detail {

// Multiplies the polynomial by (1 - root z^{-1}) for a real root, or by the
// real quadratic from a conjugate pair.
inline void apply_real_root(std::vector<double>& c, double root) {
    c.push_back(0.0);
    for (std::size_t i = c.size() - 1; i >= 1; --i) c[i] -= root * c[i - 1];
}

inline void apply_conjugate_pair(std::vector<double>& c, double re, double im) {
    const double b1 = -2.0 * re;
    const double b2 = re * re + im * im;
    c.push_back(0.0);
    c.push_back(0.0);
    for (std::size_t i = c.size() - 1; i >= 2; --i)
        c[i] += b1 * c[i - 1] + b2 * c[i - 2];
    c[1] += b1 * c[0];
}

// Degree-n polynomial with N(0,1) gain and roots in the disc of radius 0.95:
// each decision draws a conjugate pair with probability 1/2 (uniform in the
// disc) and a real root otherwise (uniform on [-0.95, 0.95]).
inline std::vector<double> random_polynomial(int n, Rng& rng) {
    std::vector<double> c{rng.normal()};
    int remaining = n;
    while (remaining > 0) {
        if (remaining >= 2 && rng.uniform() < 0.5) {
            double radius = 0.95 * std::sqrt(rng.uniform());
            double angle = 2.0 * M_PI * rng.uniform();
            apply_conjugate_pair(c, radius * std::cos(angle), radius * std::sin(angle));
            remaining -= 2;
        } else {
            apply_real_root(c, 0.95 * (2.0 * rng.uniform() - 1.0));
            remaining -= 1;
        }
    }
    return c;
}

}  // namespace detail

// Random MA factor model: every entry of W_L and every diagonal entry of
// W_D is an independent random degree-n polynomial with roots of modulus at
// most 0.95. Entries are drawn row-major over W_L, then down the W_D
// diagonal.
inline MAFactorModel random_factor_model(int m, int r, int n, Rng& rng) {
    if (m < 1 || r < 1 || r > m) throw InvalidInput("factor model needs 1 <= r <= m");
    if (n < 1) throw InvalidInput("random factor model needs n >= 1");
    std::vector<Matrix> WL(static_cast<std::size_t>(n + 1), Matrix::Zero(m, r));
    std::vector<Matrix> WD(static_cast<std::size_t>(n + 1), Matrix::Zero(m, m));
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < r; ++j) {
            std::vector<double> c = detail::random_polynomial(n, rng);
            for (int k = 0; k <= n; ++k) WL[static_cast<std::size_t>(k)](i, j) = c[static_cast<std::size_t>(k)];
        }
    for (int i = 0; i < m; ++i) {
        std::vector<double> c = detail::random_polynomial(n, rng);
        for (int k = 0; k <= n; ++k) WD[static_cast<std::size_t>(k)](i, i) = c[static_cast<std::size_t>(k)];
    }
    return MAFactorModel::create(std::move(WL), std::move(WD));
}

}  // namespace dfa

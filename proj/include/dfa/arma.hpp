#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "dfa/dual.hpp"
#include "dfa/errors.hpp"
#include "dfa/estimate.hpp"
#include "dfa/recovery.hpp"
#include "dfa/specalg.hpp"
#include "dfa/tolerance.hpp"
#include "dfa/types.hpp"

namespace dfa {

struct ArEstimate {
    std::vector<double> a;  // monic: a[0] = 1, length p+1
    int gn_iterations = 0;
    bool stable = true;
    std::string method = "prediction-error-ls+gauss-newton";
};

namespace detail {

// Roots w of a(w) = sum_k a_k w^k. Trailing coefficients that are
// numerically zero reduce the degree (those roots sit at infinity).
inline std::vector<std::complex<double>> polynomial_roots(const std::vector<double>& a) {
    double top = 0.0;
    for (double c : a) top = std::max(top, std::abs(c));
    int degree = static_cast<int>(a.size()) - 1;
    while (degree > 0 && std::abs(a[static_cast<std::size_t>(degree)]) <= 1e-14 * top) --degree;
    std::vector<std::complex<double>> roots;
    if (degree == 0) return roots;
    Matrix companion = Matrix::Zero(degree, degree);
    for (int i = 1; i < degree; ++i) companion(i, i - 1) = 1.0;
    for (int i = 0; i < degree; ++i)
        companion(i, degree - 1) = -a[static_cast<std::size_t>(i)] / a[static_cast<std::size_t>(degree)];
    Eigen::EigenSolver<Matrix> es(companion);
    for (int i = 0; i < degree; ++i) roots.push_back(es.eigenvalues()[i]);
    return roots;
}

// Stability of the filter 1/a(z): in the z^{-1} convention all roots of
// a(w) must lie strictly outside the closed unit disc.
inline bool ar_is_stable(const std::vector<double>& a) {
    for (const std::complex<double>& w : polynomial_roots(a))
        if (std::abs(w) <= 1.0) return false;
    return true;
}

}  // namespace detail

// Scalar AR polynomial fitted by least squares over all channels jointly,
// then refined by Gauss-Newton on log det of the residual covariance. The
// least-squares stage minimizes sum_t || y(t) + sum_k a_k y(t-k) ||^2.
inline ArEstimate estimate_ar(const TimeSeries& y, int p) {
    if (p < 0) throw InvalidInput("AR order must be nonnegative");
    ArEstimate est;
    est.a.assign(static_cast<std::size_t>(p) + 1, 0.0);
    est.a[0] = 1.0;
    if (p == 0) return est;
    const long N = y.length();
    if (N <= 10L * p) throw InsufficientData("AR estimation needs N > 10 p");

    const Matrix& yv = y.values;
    Matrix normal = Matrix::Zero(p, p);
    Vector rhs = Vector::Zero(p);
    for (long t = p; t < N; ++t) {
        for (int k = 1; k <= p; ++k) {
            rhs[k - 1] -= yv.col(t).dot(yv.col(t - k));
            for (int l = k; l <= p; ++l) normal(k - 1, l - 1) += yv.col(t - k).dot(yv.col(t - l));
        }
    }
    normal = normal.selfadjointView<Eigen::Upper>();
    Eigen::JacobiSVD<Matrix> svd(normal, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (svd.singularValues()[0] <= 0.0 ||
        svd.singularValues()[p - 1] <= 1e-12 * svd.singularValues()[0])
        throw SingularNormalEquations("AR normal equations are rank deficient");
    Vector coeffs = svd.solve(rhs);

    const int m = y.channels();
    const double T = static_cast<double>(N - p);
    auto residual_logdet = [&](const Vector& a) -> double {
        Matrix sigma = Matrix::Zero(m, m);
        for (long t = p; t < N; ++t) {
            Vector e = yv.col(t);
            for (int k = 1; k <= p; ++k) e += a[k - 1] * yv.col(t - k);
            sigma.noalias() += e * e.transpose();
        }
        sigma /= T;
        Eigen::LLT<Matrix> llt(sigma);
        if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
        double logdet = 0.0;
        for (int i = 0; i < m; ++i) logdet += std::log(llt.matrixL()(i, i));
        return 2.0 * logdet;
    };

    double f_cur = residual_logdet(coeffs);
    for (int iter = 0; iter < 20 && std::isfinite(f_cur); ++iter) {
        Matrix sigma = Matrix::Zero(m, m);
        std::vector<Vector> residuals(static_cast<std::size_t>(N - p));
        for (long t = p; t < N; ++t) {
            Vector e = yv.col(t);
            for (int k = 1; k <= p; ++k) e += coeffs[k - 1] * yv.col(t - k);
            sigma.noalias() += e * e.transpose();
            residuals[static_cast<std::size_t>(t - p)] = std::move(e);
        }
        sigma /= T;
        Eigen::LLT<Matrix> llt(sigma);
        if (llt.info() != Eigen::Success) break;
        Vector grad = Vector::Zero(p);
        Matrix hess = Matrix::Zero(p, p);
        for (long t = p; t < N; ++t) {
            Vector se = llt.solve(residuals[static_cast<std::size_t>(t - p)]);
            for (int k = 1; k <= p; ++k) {
                grad[k - 1] += 2.0 / T * yv.col(t - k).dot(se);
                Vector sy = llt.solve(yv.col(t - k));
                for (int l = k; l <= p; ++l)
                    hess(k - 1, l - 1) += 2.0 / T * yv.col(t - l).dot(sy);
            }
        }
        hess = hess.selfadjointView<Eigen::Upper>();
        Eigen::LLT<Matrix> hllt(hess);
        if (hllt.info() != Eigen::Success) break;
        Vector step = -hllt.solve(grad);
        double s = 1.0;
        double f_next = std::numeric_limits<double>::infinity();
        while (s > 1e-10) {
            f_next = residual_logdet(coeffs + s * step);
            if (f_next < f_cur) break;
            s *= 0.5;
        }
        if (!(f_next < f_cur)) break;
        coeffs += s * step;
        est.gn_iterations = iter + 1;
        const bool tiny = (s * step).norm() <= 1e-10 * (1.0 + coeffs.norm());
        f_cur = f_next;
        if (tiny) break;
    }

    for (int k = 1; k <= p; ++k) est.a[static_cast<std::size_t>(k)] = coeffs[k - 1];
    est.stable = detail::ar_is_stable(est.a);
    return est;
}

// Applies the scalar polynomial a(z) = sum_k a_k z^{-k} to every channel,
// with zero initial conditions.
inline TimeSeries ar_filter(const TimeSeries& y, const std::vector<double>& a) {
    if (a.empty() || a[0] != 1.0) throw InvalidInput("AR polynomial must be monic");
    const long N = y.length();
    Matrix out = Matrix::Zero(y.channels(), N);
    for (long t = 0; t < N; ++t) {
        out.col(t) = y.values.col(t);
        for (std::size_t k = 1; k < a.size() && static_cast<long>(k) <= t; ++k)
            out.col(t) += a[k] * y.values.col(t - static_cast<long>(k));
    }
    return TimeSeries::create(std::move(out), y.names);
}

// Inverse of ar_filter: solves a(z) y = x recursively with zero initial
// conditions.
inline TimeSeries ar_inverse_filter(const TimeSeries& x, const std::vector<double>& a) {
    if (a.empty() || a[0] != 1.0) throw InvalidInput("AR polynomial must be monic");
    const long N = x.length();
    Matrix out = Matrix::Zero(x.channels(), N);
    for (long t = 0; t < N; ++t) {
        out.col(t) = x.values.col(t);
        for (std::size_t k = 1; k < a.size() && static_cast<long>(k) <= t; ++k)
            out.col(t) -= a[k] * out.col(t - static_cast<long>(k));
    }
    return TimeSeries::create(std::move(out), x.names);
}

// Random monic AR polynomial whose filter 1/a(z) is stable: characteristic
// roots drawn in the disc of radius 0.95 (conjugate pairs with probability
// 1/2, real otherwise).
inline std::vector<double> random_stable_ar(int p, Rng& rng) {
    if (p < 0) throw InvalidInput("AR order must be nonnegative");
    std::vector<double> a{1.0};
    int remaining = p;
    while (remaining > 0) {
        if (remaining >= 2 && rng.uniform() < 0.5) {
            double radius = 0.95 * std::sqrt(rng.uniform());
            double angle = 2.0 * M_PI * rng.uniform();
            detail::apply_conjugate_pair(a, radius * std::cos(angle), radius * std::sin(angle));
            remaining -= 2;
        } else {
            detail::apply_real_root(a, 0.95 * (2.0 * rng.uniform() - 1.0));
            remaining -= 1;
        }
    }
    return a;
}

// Simulates y = a(z)^{-1} (W_L u + W_D w).
inline TimeSeries simulate_arma(const MAFactorModel& model, const std::vector<double>& a, long N,
                                Rng& rng) {
    TimeSeries yma = simulate_ma(model, N, rng);
    return ar_inverse_filter(yma, a);
}

// Prediction-ready identified model.
struct ArmaModel {
    int m = 0;
    int n = 0;
    int p = 0;
    std::vector<double> a;       // p+1 coefficients, a[0] = 1
    std::vector<Matrix> W_MA;    // n+1 blocks, m x m
};

struct IdentifyOptions {
    AdmmSettings admm;
    double alpha = 0.5;
    int trials = 200;
    std::uint64_t seed = 1;
    double tau = 1e-6;
    int grid_solver = 512;
    int grid_eval = 4096;
};

struct IdentifyResult {
    SpectralDensity phihat{1, 0};
    double eps_used = 0.0;
    DeltaReport delta;
    LambdaSearchResult search;
    PrimalSolution primal;
    FactorReport factors;
    std::vector<Matrix> W_MA;
};

// Full MA identification pipeline: periodogram, tolerance calibration,
// dual solve with outer lambda search, primal recovery, factor counting,
// and spectral factorization of the identified spectrum.
inline IdentifyResult identify_ma(const TimeSeries& y, int n, const IdentifyOptions& opts) {
    FrequencyGrid grid(opts.grid_solver);
    FrequencyGrid eval_grid(opts.grid_eval);
    PeriodogramResult perio = truncated_periodogram(y, n, grid);

    IdentifyResult result;
    result.phihat = perio.phi;
    result.eps_used = perio.eps_used;
    result.delta =
        estimate_delta_alpha(perio.phi, y.length(), opts.alpha, opts.trials, opts.seed, grid);

    BlockRow phat = inverse_fourier_coeffs(perio.phi, n, grid);
    const double c_phihat = log_det_integral(perio.phi, grid);
    result.search = search_lambda(phat, c_phihat, result.delta.delta_alpha, opts.admm);
    result.primal = recover_primal(result.search.solve, phat, perio.phi,
                                   result.delta.delta_alpha, grid, opts.tau);
    result.factors =
        estimate_factor_count(singular_value_profile(result.primal.PhiL, eval_grid, y.channels()));
    result.W_MA = bauer_factorize(result.primal.Phi, grid);
    return result;
}

struct ArmaIdentifyResult {
    ArEstimate ar;
    IdentifyResult ma;
    ArmaModel model;
};

// ARMA identification: scalar AR fit, whitening by a(z), MA identification
// of the filtered series.
inline ArmaIdentifyResult identify_arma(const TimeSeries& y, int n, int p,
                                        const IdentifyOptions& opts) {
    ArmaIdentifyResult result;
    result.ar = estimate_ar(y, p);
    TimeSeries filtered = ar_filter(y, result.ar.a);
    result.ma = identify_ma(filtered, n, opts);
    result.model.m = y.channels();
    result.model.n = n;
    result.model.p = p;
    result.model.a = result.ar.a;
    result.model.W_MA = result.ma.W_MA;
    return result;
}

// One-step-ahead predictions with zero initial conditions:
//   yhat(t) = -sum_{k=1}^p a_k y(t-k) + sum_{k=1}^n W_k e(t-k),
//   e(t) = W_0^{-1} (y(t) - yhat(t)).
inline TimeSeries one_step_predict(const ArmaModel& model, const TimeSeries& y_val) {
    if (model.W_MA.empty()) throw InvalidInput("model carries no MA coefficients");
    if (y_val.channels() != model.m) throw InvalidInput("validation data has wrong channel count");
    if (model.a.empty() || model.a[0] != 1.0) throw InvalidInput("AR polynomial must be monic");
    if (!detail::ar_is_stable(model.a))
        throw UnstableAR("AR polynomial has roots inside the closed unit disc");
    Eigen::FullPivLU<Matrix> lu(model.W_MA[0]);
    if (!lu.isInvertible()) throw SingularFactor("leading MA coefficient is singular");

    const long N = y_val.length();
    const int m = model.m;
    Matrix yhat = Matrix::Zero(m, N);
    Matrix innov = Matrix::Zero(m, N);
    for (long t = 0; t < N; ++t) {
        Vector pred = Vector::Zero(m);
        for (std::size_t k = 1; k < model.a.size() && static_cast<long>(k) <= t; ++k)
            pred -= model.a[k] * y_val.values.col(t - static_cast<long>(k));
        for (std::size_t k = 1; k < model.W_MA.size() && static_cast<long>(k) <= t; ++k)
            pred += model.W_MA[k] * innov.col(t - static_cast<long>(k));
        yhat.col(t) = pred;
        innov.col(t) = lu.solve(y_val.values.col(t) - pred);
    }
    return TimeSeries::create(std::move(yhat), y_val.names);
}

struct PredictionReport {
    Vector j_fit;        // per-channel fit percentage
    Vector val_means;    // per-channel validation means
    TimeSeries predicted;
};

// Fit percentage per channel: 100 (1 - RMS(y - yhat) / RMS(y - mean(y))).
// Exact prediction gives 100; predicting the channel mean gives 0.
inline PredictionReport fit_percent(const TimeSeries& y_val, const TimeSeries& y_hat) {
    if (y_val.channels() != y_hat.channels() || y_val.length() != y_hat.length())
        throw InvalidInput("validation and prediction shapes must match");
    const int m = y_val.channels();
    const long N = y_val.length();
    PredictionReport report;
    report.j_fit = Vector::Zero(m);
    report.val_means = Vector::Zero(m);
    for (int i = 0; i < m; ++i) {
        const double mean = y_val.values.row(i).mean();
        report.val_means[i] = mean;
        double dev = 0.0;
        double err = 0.0;
        for (long t = 0; t < N; ++t) {
            dev += (y_val.values(i, t) - mean) * (y_val.values(i, t) - mean);
            err += (y_val.values(i, t) - y_hat.values(i, t)) * (y_val.values(i, t) - y_hat.values(i, t));
        }
        if (dev == 0.0) throw ZeroVarianceChannel("validation channel has zero variance");
        report.j_fit[i] = 100.0 * (1.0 - std::sqrt(err / N) / std::sqrt(dev / N));
    }
    report.predicted = y_hat;
    return report;
}

}  // namespace dfa

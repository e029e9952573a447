#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "dfa/dual.hpp"
#include "dfa/errors.hpp"
#include "dfa/specalg.hpp"
#include "dfa/types.hpp"

namespace dfa {

// Orthonormal basis of the numerical kernel of a symmetric matrix: the
// eigenvectors whose |eigenvalue| is at most tau times the largest one.
inline Matrix nullspace_basis(const Matrix& a, double tau) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (a + a.transpose()));
    const Vector abs_eigs = es.eigenvalues().cwiseAbs();
    const double top = abs_eigs.maxCoeff();
    const double thresh = tau * top;
    std::vector<int> keep;
    for (int i = 0; i < abs_eigs.size(); ++i)
        if (abs_eigs[i] <= thresh || top == 0.0) keep.push_back(i);
    Matrix basis(a.rows(), static_cast<int>(keep.size()));
    for (std::size_t c = 0; c < keep.size(); ++c)
        basis.col(static_cast<int>(c)) = es.eigenvectors().col(keep[c]);
    return basis;
}

struct RecoveryDiagnostics {
    double lambda = 0.0;
    double J = 0.0;
    double delta = 0.0;
    double trace_L = 0.0;
    double duality_gap = 0.0;        // |tr(L) + J|
    double slack_V_rel = 0.0;        // ||V (X - L)|| / (||V|| ||X - L||)
    double slack_U_rel = 0.0;        // ||U L|| / (||U|| ||L||)
    int rank_V = 0;
    int ker_V_dim = 0;               // l
    int ker_U_dim = 0;               // r_tilde
    double qL_residual_rel = 0.0;
    double qD_residual_rel = 0.0;
    double min_eig_QL = 0.0;         // before clipping
    double min_eig_QD = 0.0;
    double offdiag_D_rel = 0.0;      // largest block off-diagonal of D, relative
    double is_divergence_value = 0.0;  // S(Phi || Phi_hat) on the solver grid
    double identity_residual = 0.0;  // | \int log det Phi - log det X_00 |
};

struct PrimalSolution {
    SymBlockMatrix X{1, 0};
    SymBlockMatrix L{1, 0};
    SymBlockMatrix D{1, 0};
    SpectralDensity Phi{1, 0};
    SpectralDensity PhiL{1, 0};
    SpectralDensity PhiD{1, 0};
    Matrix X00;
    RecoveryDiagnostics diagnostics;
};

namespace detail {

// Coefficient row of the quadratic form entry (Y Q Y^T)_{row_a, row_b} with
// Q symmetric and unknowns packed as vech (s <= t column-major).
inline void quadratic_form_row(const Matrix& y, int row_a, int row_b,
                               Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> out) {
    const int k = static_cast<int>(y.cols());
    int idx = 0;
    for (int t = 0; t < k; ++t)
        for (int s = 0; s <= t; ++s) {
            double v = y(row_a, s) * y(row_b, t);
            if (s != t) v += y(row_a, t) * y(row_b, s);
            out[idx++] = v;
        }
}

inline Matrix unpack_vech(const Vector& q, int k) {
    Matrix out = Matrix::Zero(k, k);
    int idx = 0;
    for (int t = 0; t < k; ++t)
        for (int s = 0; s <= t; ++s) {
            out(s, t) = q[idx];
            out(t, s) = q[idx];
            ++idx;
        }
    return out;
}

inline Matrix clip_psd(const Matrix& a, double& min_eig_out) {
    if (a.rows() == 0) {
        min_eig_out = 0.0;
        return a;
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (a + a.transpose()));
    min_eig_out = es.eigenvalues().minCoeff();
    return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).asDiagonal() *
           es.eigenvectors().transpose();
}

}  // namespace detail

// Rebuilds the primal optimum (X, L, D) from a converged dual iterate.
// The kernels of V = lambda T(P) + T(Z) - diag(W, 0) and U = I + lambda T(P)
// - diag(W, 0) carry the ranges of X - L and L; the block coordinates inside
// those kernels are pinned by minimum-norm least squares against the hollow
// constraints and the known corner block X_00 = lambda W^{-1}.
inline PrimalSolution recover_primal(const DualSolveResult& dual, const BlockRow& phat,
                                     const SpectralDensity& phihat, double delta,
                                     const FrequencyGrid& grid, double tau = 1e-6) {
    const int m = phat.channels();
    const int n = phat.order();
    const int d = m * (n + 1);
    const double lambda = dual.point.lambda;

    Matrix tp = toeplitz_T(phat).data();
    Matrix tz = toeplitz_T(dual.point.Z).data();
    Matrix v = lambda * tp + tz;
    v.topLeftCorner(m, m) -= dual.point.W;
    v = 0.5 * (v + v.transpose()).eval();
    Matrix u = Matrix::Identity(d, d) + lambda * tp;
    u.topLeftCorner(m, m) -= dual.point.W;
    u = 0.5 * (u + u.transpose()).eval();

    Eigen::LLT<Matrix> llt_w(0.5 * (dual.point.W + dual.point.W.transpose()));
    if (llt_w.info() != Eigen::Success)
        throw NotPositiveDefinite("dual iterate W must be positive definite");
    Matrix x00 = lambda * llt_w.solve(Matrix::Identity(m, m));
    x00 = 0.5 * (x00 + x00.transpose()).eval();

    // Kernel thresholds are relative to each slack matrix's own top
    // eigenvalue, except that a slack sitting at the solver noise floor
    // relative to its assembly scale is all kernel: when the constraint
    // never binds (e.g. the uncertainty ball already contains a feasible
    // diagonal spectrum, so V ~ 0) the top eigenvalue is itself noise and
    // a relative cut would report an empty kernel instead of a full one.
    const double assembly =
        std::max(1.0, lambda * tp.norm() + tz.norm() + dual.point.W.norm());
    auto kernel_or_full = [&](const Matrix& a) {
        Eigen::SelfAdjointEigenSolver<Matrix> es(a);
        if (es.eigenvalues().cwiseAbs().maxCoeff() <= tau * assembly)
            return Matrix(Matrix::Identity(a.rows(), a.cols()));
        return nullspace_basis(a, tau);
    };
    Matrix basis_d = kernel_or_full(v);   // range of X - L
    Matrix basis_l = kernel_or_full(u);   // range of L
    const int l_dim = static_cast<int>(basis_d.cols());
    const int r_dim = static_cast<int>(basis_l.cols());
    const int rank_v = d - l_dim;
    if (rank_v < m * n)
        throw RecoveryInconsistent("kernel of V is larger than one block");

    PrimalSolution sol;
    sol.diagnostics.lambda = lambda;
    sol.diagnostics.J = dual.J;
    sol.diagnostics.delta = delta;
    sol.diagnostics.rank_V = rank_v;
    sol.diagnostics.ker_V_dim = l_dim;
    sol.diagnostics.ker_U_dim = r_dim;

    // L = Y_L Q_L Y_L^T with the off-diagonal of block 00 matching X_00.
    Matrix big_l = Matrix::Zero(d, d);
    if (r_dim > 0) {
        const int unknowns = r_dim * (r_dim + 1) / 2;
        const int rows = m * (m - 1) / 2;
        const Matrix y0 = basis_l.topRows(m);
        Matrix a = Matrix::Zero(rows, unknowns);
        Vector rhs(rows);
        int row = 0;
        for (int j = 0; j < m; ++j)
            for (int i = 0; i < j; ++i) {
                detail::quadratic_form_row(y0, i, j, a.row(row));
                rhs[row] = x00(i, j);
                ++row;
            }
        Vector q;
        double residual = 0.0;
        if (rows > 0) {
            Eigen::CompleteOrthogonalDecomposition<Matrix> cod(a);
            q = cod.solve(rhs);
            residual = (a * q - rhs).norm();
        } else {
            q = Vector::Zero(unknowns);
        }
        const double scale = std::max(1.0, rhs.size() > 0 ? rhs.norm() : 0.0);
        sol.diagnostics.qL_residual_rel = residual / scale;
        if (sol.diagnostics.qL_residual_rel > 1e-5)
            throw RecoveryInconsistent("low-rank coordinate system is inconsistent");
        Matrix ql = detail::clip_psd(detail::unpack_vech(q, r_dim), sol.diagnostics.min_eig_QL);
        big_l = basis_l * ql * basis_l.transpose();
        big_l = 0.5 * (big_l + big_l.transpose()).eval();
    }

    // D = Y_D Q_D Y_D^T with every block diagonal (the normalized form of the
    // idiosyncratic part) and block 00 matching X_00 - L_00.
    Matrix big_d = Matrix::Zero(d, d);
    if (l_dim > 0) {
        const int unknowns = l_dim * (l_dim + 1) / 2;
        std::vector<Eigen::RowVectorXd> rows_acc;
        std::vector<double> rhs_acc;
        Eigen::RowVectorXd row_buf(unknowns);
        for (int h = 0; h <= n; ++h)
            for (int k = h; k <= n; ++k)
                for (int i = 0; i < m; ++i)
                    for (int j = 0; j < m; ++j) {
                        if (i == j) continue;
                        if (h == k && i > j) continue;
                        detail::quadratic_form_row(basis_d, h * m + i, k * m + j, row_buf);
                        rows_acc.push_back(row_buf);
                        rhs_acc.push_back(0.0);
                    }
        Matrix rhs00 = x00 - big_l.topLeftCorner(m, m);
        for (int j = 0; j < m; ++j)
            for (int i = 0; i <= j; ++i) {
                detail::quadratic_form_row(basis_d, i, j, row_buf);
                rows_acc.push_back(row_buf);
                rhs_acc.push_back(rhs00(i, j));
            }
        Matrix a(static_cast<int>(rows_acc.size()), unknowns);
        Vector rhs(static_cast<int>(rhs_acc.size()));
        for (std::size_t i = 0; i < rows_acc.size(); ++i) {
            a.row(static_cast<int>(i)) = rows_acc[i];
            rhs[static_cast<int>(i)] = rhs_acc[i];
        }
        Eigen::CompleteOrthogonalDecomposition<Matrix> cod(a);
        Vector q = cod.solve(rhs);
        const double scale = std::max(1.0, rhs.norm());
        sol.diagnostics.qD_residual_rel = (a * q - rhs).norm() / scale;
        if (sol.diagnostics.qD_residual_rel > 1e-5)
            throw RecoveryInconsistent("diagonal coordinate system is inconsistent");
        Matrix qd = detail::clip_psd(detail::unpack_vech(q, l_dim), sol.diagnostics.min_eig_QD);
        big_d = basis_d * qd * basis_d.transpose();
        big_d = 0.5 * (big_d + big_d.transpose()).eval();
    } else {
        const double mismatch = (x00 - big_l.topLeftCorner(m, m)).norm();
        sol.diagnostics.qD_residual_rel = mismatch / std::max(1.0, x00.norm());
        if (sol.diagnostics.qD_residual_rel > 1e-5)
            throw RecoveryInconsistent("empty kernel of V cannot carry the diagonal part");
    }

    sol.L = SymBlockMatrix(m, n, big_l);
    sol.D = SymBlockMatrix(m, n, big_d);
    sol.X = SymBlockMatrix(m, n, big_l + big_d);
    sol.X00 = x00;
    sol.Phi = build_from_sym(sol.X);
    sol.PhiL = build_from_sym(sol.L);
    sol.PhiD = build_from_sym(sol.D);

    RecoveryDiagnostics& diag = sol.diagnostics;
    diag.trace_L = big_l.trace();
    diag.duality_gap = std::abs(diag.trace_L + dual.J);
    const Matrix xml = sol.X.data() - big_l;
    double denom_v = v.norm() * xml.norm();
    diag.slack_V_rel = denom_v > 0.0 ? (v * xml).norm() / denom_v : 0.0;
    double denom_u = u.norm() * big_l.norm();
    diag.slack_U_rel = denom_u > 0.0 ? (u * big_l).norm() / denom_u : 0.0;

    double d_norm = big_d.norm();
    double worst_offdiag = 0.0;
    for (int h = 0; h <= n; ++h)
        for (int k = 0; k <= n; ++k)
            worst_offdiag = std::max(worst_offdiag, ofd(sol.D.block(h, k)).norm());
    diag.offdiag_D_rel = d_norm > 0.0 ? worst_offdiag / d_norm : 0.0;

    // Divergence from the recovered spectrum to the estimate, on the solver
    // grid. The trace term uses the exact finite-sum identity
    // \int tr(Phihat^{-1} Phi) = <X, T(P)> that holds when P was computed on
    // the same grid.
    const double c_phihat = log_det_integral(phihat, grid);
    double logdet_phi;
    try {
        logdet_phi = log_det_integral(sol.Phi, grid);
    } catch (const DegenerateSpectrum&) {
        logdet_phi = -std::numeric_limits<double>::infinity();
    }
    const double trace_term = inner(sol.X.data(), tp);
    diag.is_divergence_value = c_phihat - logdet_phi + trace_term - m;

    Eigen::LLT<Matrix> llt_x00(sol.X.block(0, 0));
    if (llt_x00.info() == Eigen::Success) {
        double logdet_x00 = 0.0;
        for (int i = 0; i < m; ++i) logdet_x00 += std::log(llt_x00.matrixL()(i, i));
        diag.identity_residual = std::abs(logdet_phi - 2.0 * logdet_x00);
    } else {
        diag.identity_residual = std::numeric_limits<double>::infinity();
    }
    return sol;
}

struct FactorReport {
    std::vector<double> s;
    int r_hat = 0;
    std::string rule = "max-ratio-drop";
};

// Normalized singular-value profile of a low-rank spectrum: s_j is the grid
// average of sigma_j(theta)/sigma_1(theta) over the nodes where sigma_1 is
// nonnegligible (1e-12 of its grid mean). Returns min(count, m) values.
inline std::vector<double> singular_value_profile(const SpectralDensity& phiL,
                                                  const FrequencyGrid& grid, int count) {
    const int m = phiL.channels();
    count = std::min(count, m);
    if (count < 1) throw InvalidInput("profile needs at least one value");
    std::vector<CMatrix> values = eval_on_grid(phiL, grid);
    std::vector<Vector> sigma(values.size());
    double mean_top = 0.0;
    for (std::size_t g = 0; g < values.size(); ++g) {
        Eigen::SelfAdjointEigenSolver<CMatrix> es = detail::eig_of(values[g]);
        sigma[g] = es.eigenvalues().cwiseMax(0.0).reverse();
        mean_top += sigma[g][0];
    }
    mean_top /= static_cast<double>(values.size());
    std::vector<double> s(static_cast<std::size_t>(count), 0.0);
    long counted = 0;
    for (const Vector& sig : sigma) {
        if (sig[0] <= 1e-12 * mean_top) continue;
        ++counted;
        for (int j = 0; j < count; ++j) s[static_cast<std::size_t>(j)] += sig[j] / sig[0];
    }
    if (counted > 0)
        for (double& v : s) v /= static_cast<double>(counted);
    else
        std::fill(s.begin(), s.end(), 0.0);
    return s;
}

// Factor count from the profile: the candidate j (s_j >= 0.02) with the
// largest drop ratio s_j / (s_{j+1} + 1e-6), where s beyond the profile is
// treated as zero. A zero profile reports zero factors.
inline FactorReport estimate_factor_count(const std::vector<double>& s) {
    FactorReport report;
    report.s = s;
    double best = -1.0;
    for (std::size_t j = 0; j < s.size(); ++j) {
        if (s[j] < 0.02) continue;
        const double next = (j + 1 < s.size()) ? s[j + 1] : 0.0;
        const double ratio = s[j] / (next + 1e-6);
        if (ratio > best) {
            best = ratio;
            report.r_hat = static_cast<int>(j) + 1;
        }
    }
    return report;
}

}  // namespace dfa

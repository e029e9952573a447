#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "dfa/errors.hpp"
#include "dfa/specalg.hpp"
#include "dfa/types.hpp"

namespace dfa {

struct AdmmSettings {
    // ADMM
    double rho = 0.05;
    double eps_abs = 1e-4;
    double eps_rel = 1e-4;
    int max_iters = 20000;
    // Backtracking line search of the inner projected-gradient step
    double armijo_c = 1e-4;
    double beta_step = 0.5;
    // Dichotomous search bracket [a, b], terminal width l, probe offset h
    double a = 0.1;
    double b = 200.0;
    double l = 7.0;
    double h = 3.0;

    void validate() const {
        if (!(rho > 0.0)) throw InvalidInput("rho must be positive");
        if (!(eps_abs > 0.0) || !(eps_rel >= 0.0))
            throw InvalidInput("residual tolerances must be positive");
        if (max_iters < 1) throw InvalidInput("max_iters must be at least 1");
        if (!(armijo_c > 0.0 && armijo_c < 1.0))
            throw InvalidInput("armijo constant must lie in (0, 1)");
        if (!(beta_step > 0.0 && beta_step < 1.0))
            throw InvalidInput("backtracking factor must lie in (0, 1)");
        if (!(a > 0.0 && a < b)) throw InvalidInput("search bracket needs 0 < a < b");
        if (!(l > 0.0 && h > 0.0 && h < 0.5 * l))
            throw InvalidInput("search offsets need 0 < h < l/2");
    }
};

// Iterate of the dual solver. W is the m x m slack of the log-det term, Z
// the hollow block-row multiplier, Y the consensus copy of Q - W, M the
// multiplier of the consensus constraint.
struct DualPoint {
    double lambda = 0.0;
    Matrix W;
    BlockRow Z{1, 0};
    Matrix Y;
    Matrix M;
};

struct DualSolveResult {
    DualPoint point;
    double J = 0.0;
    int iterations = 0;
    bool converged = false;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    double primal_tol = 0.0;
    double dual_tol = 0.0;
    std::vector<double> primal_history;
    std::vector<double> dual_history;
};

namespace detail {

// Partitioned view of T(Z + lambda P) with the trailing n x n block-grid
// factored: q is the Schur complement of T11, e solves T11 e = T01^T, so the
// congruence basis is B = [I; -e].
struct ToeplitzSchur {
    bool ok = false;
    Matrix t01;  // m x mn
    Matrix e;    // mn x m
    Matrix q;    // m x m
};

inline ToeplitzSchur schur_state(double lambda, const BlockRow& z, const BlockRow& phat) {
    const int m = phat.channels();
    const int n = phat.order();
    BlockRow h = z + phat.scaled(lambda);
    SymBlockMatrix t = toeplitz_T(h);
    ToeplitzSchur st;
    if (n == 0) {
        st.ok = true;
        st.t01 = Matrix::Zero(m, 0);
        st.e = Matrix::Zero(0, m);
        st.q = t.data();
        return st;
    }
    const int tail = m * n;
    Matrix t11 = t.data().bottomRightCorner(tail, tail);
    Eigen::LLT<Matrix> llt(t11);
    if (llt.info() != Eigen::Success) return st;
    st.ok = true;
    st.t01 = t.data().topRightCorner(m, tail);
    st.e = llt.solve(st.t01.transpose());
    Matrix q = t.data().topLeftCorner(m, m) - st.t01 * st.e;
    st.q = 0.5 * (q + q.transpose());
    return st;
}

// Adjoint of the Schur-complement congruence: D(B G B^T) with B = [I; -e].
inline BlockRow congruence_adjoint(const ToeplitzSchur& st, const Matrix& g, int m, int n) {
    Matrix full(m * (n + 1), m * (n + 1));
    Matrix ge = g * st.e.transpose();  // m x mn
    full.topLeftCorner(m, m) = g;
    full.topRightCorner(m, m * n) = -ge;
    full.bottomLeftCorner(m * n, m) = -ge.transpose();
    full.bottomRightCorner(m * n, m * n).noalias() = st.e * ge;
    return adjoint_D(SymBlockMatrix(m, n, full));
}

inline bool is_pd(const Matrix& a) {
    Eigen::LLT<Matrix> llt(0.5 * (a + a.transpose()));
    return llt.info() == Eigen::Success;
}

}  // namespace detail

// Schur complement Q(lambda, Z) = T00 - T01 T11^{-1} T01^T of T(Z + lambda P).
inline Matrix schur_Q(double lambda, const BlockRow& z, const BlockRow& phat) {
    detail::ToeplitzSchur st = detail::schur_state(lambda, z, phat);
    if (!st.ok) throw BlockNotPD("trailing block of T(Z + lambda P) is not positive definite");
    return st.q;
}

// Upper cap R(lambda) = I + S00 - S01 (I + S11)^{-1} S01^T where S = T(lambda P).
inline Matrix schur_R(double lambda, const BlockRow& phat) {
    const int m = phat.channels();
    const int n = phat.order();
    SymBlockMatrix s = toeplitz_T(phat.scaled(lambda));
    if (n == 0) return Matrix::Identity(m, m) + s.data();
    const int tail = m * n;
    Matrix inner = Matrix::Identity(tail, tail) + s.data().bottomRightCorner(tail, tail);
    Eigen::LLT<Matrix> llt(inner);
    if (llt.info() != Eigen::Success)
        throw BlockNotPD("trailing block of I + T(lambda P) is not positive definite");
    Matrix s01 = s.data().topRightCorner(m, tail);
    Matrix r = Matrix::Identity(m, m) + s.data().topLeftCorner(m, m) -
               s01 * llt.solve(s01.transpose());
    return 0.5 * (r + r.transpose());
}

// Dual objective J(lambda, W) = lambda (-log det(W / lambda) - c + delta).
inline double dual_objective(double lambda, const Matrix& w, double c_phihat, double delta) {
    if (!(lambda > 0.0)) throw InvalidInput("lambda must be positive");
    Eigen::LLT<Matrix> llt(0.5 * (w + w.transpose()));
    if (llt.info() != Eigen::Success) throw NotPositiveDefinite("W must be positive definite");
    double logdet = 0.0;
    for (int i = 0; i < w.rows(); ++i) logdet += std::log(llt.matrixL()(i, i));
    logdet *= 2.0;
    return lambda * (-logdet + w.rows() * std::log(lambda) - c_phihat + delta);
}

// Eigenvalue clamp onto the positive semidefinite cone.
inline Matrix psd_project(const Matrix& a) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (a + a.transpose()));
    return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).asDiagonal() *
           es.eigenvectors().transpose();
}

// Projection onto {W : W <= cap} in the semidefinite order.
inline Matrix cap_project(const Matrix& a, const Matrix& cap) {
    return cap - psd_project(cap - a);
}

// Augmented Lagrangian value at a dual iterate.
inline double aug_lagrangian_value(const DualPoint& p, const BlockRow& phat, double rho,
                                   double c_phihat, double delta) {
    Matrix q = schur_Q(p.lambda, p.Z, phat);
    Matrix gap = p.Y - q + p.W;
    return dual_objective(p.lambda, p.W, c_phihat, delta) + inner(p.M, gap) +
           0.5 * rho * gap.squaredNorm();
}

// Gradients of the augmented Lagrangian in (W, Z). The Z gradient lives in
// M_{m,n} and is computed through the congruence adjoint of the Schur basis.
inline std::pair<Matrix, BlockRow> aug_lagrangian_gradients(const DualPoint& p,
                                                            const BlockRow& phat, double rho) {
    const int m = phat.channels();
    const int n = phat.order();
    detail::ToeplitzSchur st = detail::schur_state(p.lambda, p.Z, phat);
    if (!st.ok) throw BlockNotPD("trailing block of T(Z + lambda P) is not positive definite");
    Matrix gap = p.Y - st.q + p.W;
    Matrix g = -p.M - rho * gap;
    Eigen::LLT<Matrix> llt(0.5 * (p.W + p.W.transpose()));
    if (llt.info() != Eigen::Success) throw NotPositiveDefinite("W must be positive definite");
    Matrix grad_w = -p.lambda * llt.solve(Matrix::Identity(m, m)) - g;
    BlockRow grad_z = detail::congruence_adjoint(st, g, m, n);
    return {0.5 * (grad_w + grad_w.transpose()).eval(), std::move(grad_z)};
}

// ADMM for the dual problem at fixed lambda. Each iteration takes one
// backtracked projected-gradient step in (W, Z) on the augmented Lagrangian,
// then updates the consensus copy Y and the multiplier M in closed form.
// Stops when both consensus residuals fall below their mixed
// absolute/relative tolerances; a run that exhausts max_iters returns the
// last iterate with converged = false.
inline DualSolveResult admm_solve_fixed_lambda(double lambda, const BlockRow& phat,
                                               double c_phihat, double delta,
                                               const AdmmSettings& settings,
                                               const std::optional<DualPoint>& warm = std::nullopt) {
    settings.validate();
    if (!(lambda > 0.0)) throw InvalidInput("lambda must be positive");
    const int m = phat.channels();
    const int n = phat.order();
    const double rho = settings.rho;

    const Matrix r_cap = schur_R(lambda, phat);
    Eigen::SelfAdjointEigenSolver<Matrix> es_r(r_cap);
    const double min_eig_r = es_r.eigenvalues().minCoeff();
    if (min_eig_r <= 0.0) throw InfeasibleStart("upper cap R(lambda) is not positive definite");

    DualPoint p;
    p.lambda = lambda;
    bool warm_ok = false;
    if (warm.has_value()) {
        DualPoint cand = *warm;
        cand.lambda = lambda;
        cand.W = cap_project(cand.W, r_cap);
        if (detail::is_pd(cand.W) && detail::schur_state(lambda, cand.Z, phat).ok) {
            p = std::move(cand);
            warm_ok = true;
        }
    }
    if (!warm_ok) {
        p.Z = BlockRow(m, n);
        detail::ToeplitzSchur st0 = detail::schur_state(lambda, p.Z, phat);
        if (!st0.ok) throw InfeasibleStart("T(lambda P) has a non-positive trailing block");
        Eigen::SelfAdjointEigenSolver<Matrix> es_q(st0.q);
        const double min_eig_q = es_q.eigenvalues().minCoeff();
        const double scale = min_eig_q > 0.0 ? 0.5 * std::min(min_eig_q, min_eig_r)
                                             : 1e-3 * min_eig_r;
        p.W = scale * Matrix::Identity(m, m);
        p.Y = psd_project(st0.q - p.W);
        p.M = Matrix::Zero(m, m);
    }

    DualSolveResult result;
    detail::ToeplitzSchur st = detail::schur_state(lambda, p.Z, phat);
    if (!st.ok) throw InfeasibleStart("warm start is infeasible");

    auto objective_part = [&](const Matrix& w) {
        return dual_objective(lambda, w, c_phihat, delta);
    };
    auto lagrangian = [&](const Matrix& w, const Matrix& q) {
        Matrix gap = p.Y - q + w;
        return objective_part(w) + inner(p.M, gap) + 0.5 * rho * gap.squaredNorm();
    };

    for (int k = 0; k < settings.max_iters; ++k) {
        Matrix gap = p.Y - st.q + p.W;
        Matrix g = -p.M - rho * gap;
        Eigen::LLT<Matrix> llt_w(p.W);
        Matrix grad_w = -lambda * llt_w.solve(Matrix::Identity(m, m)) - g;
        grad_w = 0.5 * (grad_w + grad_w.transpose()).eval();
        BlockRow grad_z = detail::congruence_adjoint(st, g, m, n);
        const double l_cur = lagrangian(p.W, st.q);

        double t = 1.0;
        Matrix w_next = p.W;
        BlockRow z_next = p.Z;
        detail::ToeplitzSchur st_next = st;
        while (true) {
            Matrix w_try = cap_project(p.W - t * grad_w, r_cap);
            BlockRow z_try = ofd_block(p.Z - grad_z.scaled(t));
            if (detail::is_pd(w_try)) {
                detail::ToeplitzSchur st_try = detail::schur_state(lambda, z_try, phat);
                if (st_try.ok) {
                    const double decrease =
                        inner(grad_w, w_try - p.W) + inner(grad_z, z_try - p.Z);
                    if (lagrangian(w_try, st_try.q) <= l_cur + settings.armijo_c * decrease) {
                        w_next = std::move(w_try);
                        z_next = std::move(z_try);
                        st_next = std::move(st_try);
                        break;
                    }
                }
            }
            t *= settings.beta_step;
            if (t < 1e-20) break;  // no acceptable step; keep the iterate
        }

        Matrix y_prev = p.Y;
        p.W = w_next;
        p.Z = z_next;
        st = st_next;
        p.Y = psd_project(st.q - p.W - p.M / rho);
        Matrix gap_new = p.Y - st.q + p.W;
        p.M += rho * gap_new;

        const double res_p = gap_new.norm();
        const double res_d =
            detail::congruence_adjoint(st, (rho * (p.Y - y_prev)).eval(), m, n).norm();
        const double tol_p =
            m * settings.eps_abs +
            settings.eps_rel * std::max({p.W.norm(), st.q.norm(), p.Y.norm()});
        const double tol_d =
            m * std::sqrt(n + 1.0) * settings.eps_abs +
            settings.eps_rel * detail::congruence_adjoint(st, p.M, m, n).norm();

        result.primal_history.push_back(res_p);
        result.dual_history.push_back(res_d);
        result.iterations = k + 1;
        result.primal_residual = res_p;
        result.dual_residual = res_d;
        result.primal_tol = tol_p;
        result.dual_tol = tol_d;
        if (res_p <= tol_p && res_d <= tol_d) {
            result.converged = true;
            break;
        }
    }

    result.point = std::move(p);
    result.J = objective_part(result.point.W);
    return result;
}

// Dichotomous minimization of a unimodal function: probes at midpoint +- h,
// keeps the side with the smaller value, stops when the bracket is narrower
// than l, and returns the final midpoint.
template <class G>
double search_minimum(G&& g, double a, double b, double l, double h) {
    if (!(a < b) || !(h > 0.0) || !(h < 0.5 * l))
        throw InvalidInput("dichotomous search needs a < b and 0 < h < l/2");
    while (b - a >= l) {
        const double mid = 0.5 * (a + b);
        if (g(mid - h) < g(mid + h))
            b = mid + h;
        else
            a = mid - h;
    }
    return 0.5 * (a + b);
}

struct LambdaSearchResult {
    double lambda = 0.0;
    DualSolveResult solve;
    int admm_solves = 0;
    double bracket_a = 0.0;
    double bracket_b = 0.0;
    bool expanded = false;
};

// Outer search over lambda: dichotomous shrinking of [a, b] driven by the
// converged ADMM objective, with warm starts shared by both probes of an
// iteration so the result does not depend on their evaluation order. If the
// objective keeps preferring the right end (b never moves), b is expanded
// once by a factor of 10. Probes where the solver fails count as +infinity;
// if both probes of an iteration fail the bracket is reported invalid.
inline LambdaSearchResult search_lambda(const BlockRow& phat, double c_phihat, double delta,
                                        const AdmmSettings& settings) {
    settings.validate();
    LambdaSearchResult out;
    double a = settings.a;
    double b = settings.b;
    std::optional<DualPoint> warm;

    auto probe = [&](double lam) -> std::optional<DualSolveResult> {
        try {
            DualSolveResult r = admm_solve_fixed_lambda(lam, phat, c_phihat, delta, settings, warm);
            ++out.admm_solves;
            return r;
        } catch (const Error&) {
            ++out.admm_solves;
            return std::nullopt;
        }
    };

    bool b_moved = false;
    while (true) {
        while (b - a >= settings.l) {
            const double mid = 0.5 * (a + b);
            std::optional<DualSolveResult> left = probe(mid - settings.h);
            std::optional<DualSolveResult> right = probe(mid + settings.h);
            if (!left && !right)
                throw BracketInvalid("dual solver failed at both probes of the bracket");
            const double gl = left ? left->J : std::numeric_limits<double>::infinity();
            const double gr = right ? right->J : std::numeric_limits<double>::infinity();
            if (gl < gr) {
                b = mid + settings.h;
                b_moved = true;
                warm = left->point;
            } else {
                a = mid - settings.h;
                warm = right ? right->point : warm;
            }
        }
        if (!b_moved && !out.expanded) {
            out.expanded = true;
            b *= 10.0;
            continue;
        }
        break;
    }

    out.lambda = 0.5 * (a + b);
    out.bracket_a = a;
    out.bracket_b = b;
    out.solve = admm_solve_fixed_lambda(out.lambda, phat, c_phihat, delta, settings, warm);
    ++out.admm_solves;
    return out;
}

}  // namespace dfa

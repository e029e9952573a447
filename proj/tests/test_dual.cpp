#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <optional>
#include <vector>

#include "dfa/dfa.hpp"
#include "oracle_barrier.hpp"

using namespace dfa;

namespace {

BlockRow identity_row(int m, int n) {
    BlockRow p(m, n);
    p.block_mutable(0) = Matrix::Identity(m, m);
    return p;
}

Matrix random_sym(int m, Rng& rng, double scale) {
    Matrix a(m, m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) a(i, j) = rng.normal();
    return scale * 0.5 * (a + a.transpose());
}

// A well-inside-the-cone dual iterate on a random instance, for derivative
// checks: Z small hollow, W strictly between 0 and the caps.
struct FeasibleState {
    DualPoint p;
    BlockRow phat{1, 0};
    double c_phihat = 0.0;
    double delta = 0.0;
};

FeasibleState random_feasible_state(unsigned long seed) {
    Rng rng(seed);
    const int m = 2 + static_cast<int>(seed % 2);
    const int n = static_cast<int>(seed % 3);
    MAFactorModel model = random_factor_model(m, std::max(1, m - 1), std::max(1, n), rng);
    SpectralDensity phi = model_spectrum(model);
    // Lift the spectrum away from singularity so the states are well inside.
    std::vector<Matrix> coeffs = phi.coeffs();
    coeffs.resize(static_cast<std::size_t>(n + 1), Matrix::Zero(m, m));
    coeffs[0] += (0.5 + phi.coeff(0).trace() / m) * Matrix::Identity(m, m);
    SpectralDensity lifted(coeffs);

    FeasibleState st;
    FrequencyGrid grid(256);
    st.phat = inverse_fourier_coeffs(lifted, n, grid);
    st.c_phihat = log_det_integral(lifted, grid);
    st.delta = 0.1 + 0.2 * std::abs(rng.normal());

    DualPoint p;
    p.lambda = 1.0 + 3.0 * std::abs(rng.normal());
    p.Z = BlockRow(m, n);
    for (int k = 0; k <= n; ++k) {
        Matrix zk(m, m);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j) zk(i, j) = 0.05 * rng.normal();
        p.Z.block_mutable(k) = zk;
    }
    p.Z = ofd_block(p.Z);
    while (!detail::schur_state(p.lambda, p.Z, st.phat).ok) p.Z = p.Z.scaled(0.5);

    Matrix q = schur_Q(p.lambda, p.Z, st.phat);
    Matrix r = schur_R(p.lambda, st.phat);
    Eigen::SelfAdjointEigenSolver<Matrix> eq(q), er(r);
    const double floor_w = 0.4 * std::min(eq.eigenvalues().minCoeff(), er.eigenvalues().minCoeff());
    REQUIRE(floor_w > 0.0);
    p.W = floor_w * Matrix::Identity(m, m) + 0.05 * floor_w * random_sym(m, rng, 1.0);
    p.Y = psd_project(q - p.W + random_sym(m, rng, 0.1));
    p.M = random_sym(m, rng, 0.3);
    st.p = std::move(p);
    return st;
}

}  // namespace

TEST_CASE("Schur reduction of the identity block row is lambda I") {
    const int m = 2, n = 1;
    BlockRow p = identity_row(m, n);
    for (double lambda : {0.5, 2.0, 17.0}) {
        Matrix q = schur_Q(lambda, BlockRow(m, n), p);
        CHECK((q - lambda * Matrix::Identity(m, m)).norm() <= 1e-12 * lambda);
    }
}

TEST_CASE("Schur upper cap at order zero is I + lambda P0") {
    const int m = 3;
    Rng rng(41);
    Matrix g(m, m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) g(i, j) = rng.normal();
    Matrix p0 = g * g.transpose() + Matrix::Identity(m, m);
    BlockRow p(m, 0);
    p.block_mutable(0) = p0;
    Matrix r = schur_R(2.5, p);
    CHECK((r - (Matrix::Identity(m, m) + 2.5 * p0)).norm() <= 1e-12 * r.norm());
}

TEST_CASE("Schur reduction rejects an indefinite trailing block") {
    const int m = 2, n = 1;
    BlockRow p(m, n);
    Matrix p0 = Matrix::Identity(m, m);
    p0(1, 1) = -1.0;  // T11 = lambda * p0 indefinite
    p.block_mutable(0) = p0;
    CHECK_THROWS_AS(schur_Q(1.0, BlockRow(m, n), p), BlockNotPD);
}

TEST_CASE("dual objective closed forms and input validation") {
    const int m = 3;
    const double delta = 0.37;
    for (double lambda : {0.2, 1.0, 8.0}) {
        Matrix w = lambda * Matrix::Identity(m, m);
        CHECK(dual_objective(lambda, w, 0.0, delta) ==
              Catch::Approx(lambda * delta).margin(1e-12 * (1.0 + lambda * delta)));
    }
    // c shifts J by -lambda c.
    CHECK(dual_objective(2.0, 2.0 * Matrix::Identity(m, m), 0.7, delta) ==
          Catch::Approx(2.0 * (delta - 0.7)).margin(1e-12));
    CHECK_THROWS_AS(dual_objective(0.0, Matrix::Identity(m, m), 0.0, delta), InvalidInput);
    Matrix bad = -Matrix::Identity(m, m);
    CHECK_THROWS_AS(dual_objective(1.0, bad, 0.0, delta), NotPositiveDefinite);
}

TEST_CASE("cone projections: eigenvalue clip and semidefinite cap") {
    Rng rng(7);
    const int m = 4;
    Matrix a = random_sym(m, rng, 2.0);
    Matrix pa = psd_project(a);
    Eigen::SelfAdjointEigenSolver<Matrix> es(pa);
    CHECK(es.eigenvalues().minCoeff() >= -1e-12);
    CHECK((pa - psd_project(pa)).norm() <= 1e-12);

    Matrix cap = psd_project(random_sym(m, rng, 1.5)) + Matrix::Identity(m, m);
    Matrix capped = cap_project(a, cap);
    Eigen::SelfAdjointEigenSolver<Matrix> gapes(cap - capped);
    CHECK(gapes.eigenvalues().minCoeff() >= -1e-12);
    // A matrix already below the cap is untouched.
    Matrix below = cap - Matrix::Identity(m, m) * 0.5;
    CHECK((cap_project(below, cap) - below).norm() <= 1e-12);
}

TEST_CASE("augmented Lagrangian gradients match central finite differences") {
    // Mirrors the acceptance gradient check: 20 random feasible states.
    for (unsigned long seed = 1; seed <= 20; ++seed) {
        FeasibleState st = random_feasible_state(seed);
        const int m = st.phat.channels();
        const int n = st.phat.order();
        const double rho = 0.05;
        Rng rng(seed + 1000);

        auto value = [&](const DualPoint& p) {
            return aug_lagrangian_value(p, st.phat, rho, st.c_phihat, st.delta);
        };
        std::pair<Matrix, BlockRow> grads = aug_lagrangian_gradients(st.p, st.phat, rho);

        // Symmetric direction in W.
        Matrix ew = random_sym(m, rng, 1.0);
        ew /= ew.norm();
        const double eps_w = 1e-5 * (1.0 + st.p.W.norm());
        DualPoint plus = st.p, minus = st.p;
        plus.W += eps_w * ew;
        minus.W -= eps_w * ew;
        const double fd_w = (value(plus) - value(minus)) / (2.0 * eps_w);
        const double an_w = inner(grads.first, ew);
        CHECK(std::abs(fd_w - an_w) <= 1e-4 * (1.0 + std::abs(an_w)));

        // Hollow direction in Z.
        BlockRow ez(m, n);
        for (int k = 0; k <= n; ++k) {
            Matrix zk(m, m);
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < m; ++j) zk(i, j) = rng.normal();
            ez.block_mutable(k) = zk;
        }
        ez = ofd_block(ez);
        if (ez.norm() > 0.0) {
            ez = ez.scaled(1.0 / ez.norm());
            const double eps_z = 1e-5 * (1.0 + st.p.Z.norm());
            DualPoint zplus = st.p, zminus = st.p;
            zplus.Z = st.p.Z + ez.scaled(eps_z);
            zminus.Z = st.p.Z + ez.scaled(-eps_z);
            const double fd_z = (value(zplus) - value(zminus)) / (2.0 * eps_z);
            const double an_z = inner(grads.second, ez);
            CHECK(std::abs(fd_z - an_z) <= 1e-4 * (1.0 + std::abs(an_z)));
        }
    }
}

TEST_CASE("scalar order-zero dual solve has the closed-form optimum") {
    // phi = 1 gives P0 = 1 and c = 0; at fixed lambda the V constraint
    // binds at W = lambda and J = lambda * delta.
    const double delta = 0.3, lambda = 2.0;
    BlockRow phat = identity_row(1, 0);
    AdmmSettings st;
    st.eps_abs = st.eps_rel = 1e-10;
    DualSolveResult r = admm_solve_fixed_lambda(lambda, phat, 0.0, delta, st);
    CHECK(r.converged);
    CHECK(r.point.W(0, 0) == Catch::Approx(lambda).margin(1e-4));
    CHECK(r.J == Catch::Approx(lambda * delta).margin(1e-4));
}

TEST_CASE("fixed-lambda dual objective matches the interior-point oracle") {
    // m=2, n=0 constant spectrum [[2,1],[1,2]].
    Matrix a(2, 2);
    a << 2.0, 1.0, 1.0, 2.0;
    SpectralDensity phi({a});
    FrequencyGrid grid(128);
    BlockRow phat = inverse_fourier_coeffs(phi, 0, grid);
    const double c = log_det_integral(phi, grid);
    const double delta = 0.2, lambda = 5.0;

    oracle::BarrierResult orc = oracle::barrier_solve(phat, c, delta, lambda, true);
    REQUIRE(orc.converged);

    AdmmSettings st;
    st.eps_abs = st.eps_rel = 1e-9;
    st.max_iters = 60000;
    DualSolveResult r = admm_solve_fixed_lambda(lambda, phat, c, delta, st);
    CHECK(r.converged);
    CHECK(std::abs(r.J - orc.J) <= 1e-3 * (1.0 + std::abs(orc.J)));
}

TEST_CASE("dichotomous search brackets synthetic minima") {
    auto parabola = [](double x) { return (x - 50.0) * (x - 50.0); };
    double found = search_minimum(parabola, 0.1, 200.0, 7.0, 3.0);
    CHECK(std::abs(found - 50.0) <= 3.5);

    auto increasing = [](double x) { return 3.0 * x; };
    double left = search_minimum(increasing, 0.1, 200.0, 7.0, 3.0);
    CHECK(left <= 0.1 + 7.0);

    CHECK_THROWS_AS(search_minimum(parabola, 5.0, 1.0, 7.0, 3.0), InvalidInput);
    CHECK_THROWS_AS(search_minimum(parabola, 0.1, 200.0, 7.0, 4.0), InvalidInput);
}

TEST_CASE("lambda search lands within probe noise of the sweep minimum") {
    Rng rng(3);
    MAFactorModel model = random_factor_model(2, 1, 1, rng);
    TimeSeries y = simulate_ma(model, 4000, rng);
    FrequencyGrid grid(256);
    PeriodogramResult perio = truncated_periodogram(y, 1, grid);
    const double c = log_det_integral(perio.phi, grid);
    BlockRow phat = inverse_fourier_coeffs(perio.phi, 1, grid);
    DeltaReport rep = estimate_delta_alpha(perio.phi, 4000, 0.5, 60, 77, grid);

    AdmmSettings st;
    st.eps_abs = st.eps_rel = 1e-8;
    st.max_iters = 60000;
    LambdaSearchResult search = search_lambda(phat, c, rep.delta_alpha, st);
    CHECK(search.solve.converged);
    CHECK(search.bracket_a <= search.lambda);
    CHECK(search.lambda <= search.bracket_b);

    // 11-point sweep over the default bracket must not beat the search
    // result by more than solver noise.
    double sweep_best = std::numeric_limits<double>::infinity();
    std::optional<DualPoint> warm;
    for (int i = 0; i <= 10; ++i) {
        const double lam = 0.1 + (200.0 - 0.1) * i / 10.0;
        try {
            DualSolveResult r = admm_solve_fixed_lambda(lam, phat, c, rep.delta_alpha, st, warm);
            warm = r.point;
            if (r.converged) sweep_best = std::min(sweep_best, r.J);
        } catch (const Error&) {
        }
    }
    CHECK(search.solve.J <= sweep_best + 2e-3 * (1.0 + std::abs(sweep_best)));
}

TEST_CASE("warm starts accelerate a neighboring fixed-lambda solve") {
    Matrix a(2, 2);
    a << 2.0, 1.0, 1.0, 2.0;
    SpectralDensity phi({a});
    FrequencyGrid grid(128);
    BlockRow phat = inverse_fourier_coeffs(phi, 0, grid);
    const double c = log_det_integral(phi, grid);
    AdmmSettings st;
    st.eps_abs = st.eps_rel = 1e-8;
    st.max_iters = 60000;
    DualSolveResult cold = admm_solve_fixed_lambda(5.0, phat, c, 0.2, st);
    REQUIRE(cold.converged);
    DualSolveResult warm = admm_solve_fixed_lambda(5.1, phat, c, 0.2, st, cold.point);
    DualSolveResult cold2 = admm_solve_fixed_lambda(5.1, phat, c, 0.2, st);
    REQUIRE(warm.converged);
    REQUIRE(cold2.converged);
    CHECK(warm.iterations <= cold2.iterations);
    CHECK(std::abs(warm.J - cold2.J) <= 1e-5 * (1.0 + std::abs(cold2.J)));
}

TEST_CASE("solver settings are validated") {
    AdmmSettings st;
    st.rho = 0.0;
    CHECK_THROWS_AS(st.validate(), InvalidInput);
    st = AdmmSettings{};
    st.max_iters = 0;
    CHECK_THROWS_AS(st.validate(), InvalidInput);
    st = AdmmSettings{};
    st.h = st.l;  // violates h < l/2
    CHECK_THROWS_AS(st.validate(), InvalidInput);
    st = AdmmSettings{};
    st.a = 5.0;
    st.b = 1.0;
    CHECK_THROWS_AS(st.validate(), InvalidInput);
    BlockRow phat = identity_row(1, 0);
    AdmmSettings ok;
    CHECK_THROWS_AS(admm_solve_fixed_lambda(-1.0, phat, 0.0, 0.1, ok), InvalidInput);
}

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "dfa/errors.hpp"
#include "dfa/estimate.hpp"
#include "dfa/parallel.hpp"
#include "dfa/rng.hpp"
#include "dfa/specalg.hpp"
#include "dfa/types.hpp"

namespace dfa {

// Largest meaningful divergence budget: the divergence from Phi to the
// closest diagonal spectrum, which has entries 1/(Phi^{-1})_{ii} and gives
//   delta_max = \int [ log det Phi + sum_i log (Phi^{-1})_{ii} ].
// Beyond this budget the trivial diagonal solution is feasible. Zero for
// m = 1 and for diagonal spectra.
inline double delta_max(const SpectralDensity& phihat, const FrequencyGrid& grid) {
    const int m = phihat.channels();
    double acc = 0.0;
    for (const CMatrix& v : eval_on_grid(phihat, grid)) {
        Eigen::SelfAdjointEigenSolver<CMatrix> es = detail::eig_of(v);
        if (es.eigenvalues().minCoeff() <= 0.0)
            throw NotPositiveDefinite("spectrum is singular at a grid node");
        for (int i = 0; i < m; ++i) acc += std::log(es.eigenvalues()[i]);
        CMatrix inv = es.eigenvectors() *
                      es.eigenvalues().cwiseInverse().asDiagonal().toDenseMatrix().cast<std::complex<double>>() *
                      es.eigenvectors().adjoint();
        for (int i = 0; i < m; ++i) acc += std::log(inv(i, i).real());
    }
    return acc * grid.weight();
}

struct DeltaReport {
    double alpha = 0.0;
    double delta_alpha = 0.0;
    double delta_max = 0.0;
    int trials = 0;
    long sample_length = 0;
    std::uint64_t seed = 0;
    std::vector<double> divergences;  // sorted ascending
    bool exceeds_delta_max = false;   // calibration hit the trivial regime
    bool quantile_unstable = false;   // trials < 200
};

// Calibrates the divergence tolerance by parametric resampling: the
// regularized periodogram is spectrally factored, N-sample paths of the
// factor are simulated, each path is re-estimated with the same periodogram
// rule, and delta_alpha is the alpha-quantile (order statistic at index
// ceil(alpha * trials)) of the divergences from the original estimate to the
// re-estimates.
inline DeltaReport estimate_delta_alpha(const SpectralDensity& phihat, long N, double alpha,
                                        int trials, std::uint64_t seed,
                                        const FrequencyGrid& grid) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidInput("alpha must lie in (0, 1)");
    if (trials < 50) throw InvalidInput("tolerance calibration needs at least 50 trials");
    if (N <= phihat.order()) throw InsufficientData("resampling length must exceed the lag order");

    const std::vector<Matrix> w = bauer_factorize(phihat, grid);
    const int n = phihat.order();

    std::vector<double> divergences(static_cast<std::size_t>(trials));
    parallel_for(trials, [&](int trial) {
        Rng rng = Rng::derived(seed, static_cast<std::uint64_t>(trial));
        Matrix e(phihat.channels(), N);
        for (long t = 0; t < N; ++t)
            for (int i = 0; i < phihat.channels(); ++i) e(i, t) = rng.normal();
        TimeSeries path = TimeSeries::create(filter_ma(w, e));
        PeriodogramResult re = truncated_periodogram(path, n, grid);
        divergences[static_cast<std::size_t>(trial)] = is_divergence(phihat, re.phi, grid);
    });
    std::sort(divergences.begin(), divergences.end());

    DeltaReport report;
    report.alpha = alpha;
    report.trials = trials;
    report.sample_length = N;
    report.seed = seed;
    const int index = static_cast<int>(std::ceil(alpha * trials));
    report.delta_alpha = divergences[static_cast<std::size_t>(std::clamp(index, 1, trials) - 1)];
    report.delta_max = delta_max(phihat, grid);
    report.divergences = std::move(divergences);
    report.exceeds_delta_max = report.delta_alpha >= report.delta_max;
    report.quantile_unstable = trials < 200;
    return report;
}

}  // namespace dfa

#pragma once

#include <vector>

#include "dfa/rng.hpp"
#include "dfa/types.hpp"

namespace testsup {

inline dfa::Matrix random_matrix(int rows, int cols, dfa::Rng& rng) {
    dfa::Matrix out(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) out(i, j) = rng.normal();
    return out;
}

inline dfa::Matrix random_symmetric(int n, dfa::Rng& rng) {
    dfa::Matrix a = random_matrix(n, n, rng);
    return 0.5 * (a + a.transpose());
}

inline dfa::Matrix random_spd(int n, dfa::Rng& rng, double ridge = 0.1) {
    dfa::Matrix a = random_matrix(n, n, rng);
    return a * a.transpose() / n + ridge * dfa::Matrix::Identity(n, n);
}

inline dfa::SymBlockMatrix random_sym_block(int m, int n, dfa::Rng& rng) {
    const int d = m * (n + 1);
    return dfa::SymBlockMatrix(m, n, random_symmetric(d, rng));
}

inline dfa::SymBlockMatrix random_spd_block(int m, int n, dfa::Rng& rng, double ridge = 0.1) {
    const int d = m * (n + 1);
    return dfa::SymBlockMatrix(m, n, random_spd(d, rng, ridge));
}

inline dfa::BlockRow random_block_row(int m, int n, dfa::Rng& rng) {
    std::vector<dfa::Matrix> blocks;
    blocks.push_back(random_symmetric(m, rng));
    for (int j = 1; j <= n; ++j) blocks.push_back(random_matrix(m, m, rng));
    return dfa::BlockRow(std::move(blocks));
}

}  // namespace testsup

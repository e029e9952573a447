#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "dfa/arma.hpp"
#include "dfa/errors.hpp"
#include "dfa/estimate.hpp"
#include "dfa/types.hpp"

namespace dfa {

using json = nlohmann::ordered_json;

namespace detail {

inline std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.push_back("");
    return fields;
}

}  // namespace detail

// CSV layout: header with channel names, then one row per time point with
// values printed at 17 significant digits so doubles round-trip exactly.
inline void write_csv(const std::string& path, const TimeSeries& y) {
    std::ofstream out(path);
    if (!out) throw InvalidInput("cannot open output file: " + path);
    const int m = y.channels();
    for (int i = 0; i < m; ++i) {
        if (i > 0) out << ',';
        out << (y.names.empty() ? "y" + std::to_string(i + 1) : y.names[static_cast<std::size_t>(i)]);
    }
    out << '\n';
    for (long t = 0; t < y.length(); ++t) {
        for (int i = 0; i < m; ++i) {
            if (i > 0) out << ',';
            out << detail::format_g17(y.values(i, t));
        }
        out << '\n';
    }
    if (!out) throw InvalidInput("failed writing output file: " + path);
}

inline TimeSeries read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open input file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw InvalidInput("input file is empty: " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> names = detail::split_csv_line(line);
    const int m = static_cast<int>(names.size());
    if (m < 1) throw InvalidInput("input file has no columns: " + path);
    std::vector<double> flat;
    long rows = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields = detail::split_csv_line(line);
        if (static_cast<int>(fields.size()) != m)
            throw InvalidInput("row " + std::to_string(rows + 2) + " has wrong field count");
        for (const std::string& f : fields) {
            char* end = nullptr;
            double v = std::strtod(f.c_str(), &end);
            if (end == f.c_str() || (end && *end != '\0'))
                throw InvalidInput("row " + std::to_string(rows + 2) + " has a non-numeric field");
            flat.push_back(v);
        }
        ++rows;
    }
    if (rows == 0) throw InvalidInput("input file has no data rows: " + path);
    Matrix values(m, rows);
    for (long t = 0; t < rows; ++t)
        for (int i = 0; i < m; ++i) values(i, t) = flat[static_cast<std::size_t>(t * m + i)];
    return TimeSeries::create(std::move(values), std::move(names));
}

// Matrices are serialized as flat row-major arrays, one per lag.
inline json matrix_to_json(const Matrix& a) {
    json out = json::array();
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j) out.push_back(a(i, j));
    return out;
}

inline json coeffs_to_json(const std::vector<Matrix>& coeffs) {
    json out = json::array();
    for (const Matrix& c : coeffs) out.push_back(matrix_to_json(c));
    return out;
}

inline Matrix matrix_from_json(const json& a, int rows, int cols) {
    if (!a.is_array() || static_cast<int>(a.size()) != rows * cols)
        throw InvalidInput("matrix entry has wrong length");
    Matrix out(rows, cols);
    int idx = 0;
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) out(i, j) = a[static_cast<std::size_t>(idx++)].get<double>();
    return out;
}

inline json delta_to_json(const DeltaReport& report, bool include_samples) {
    json out;
    out["alpha"] = report.alpha;
    out["delta_alpha"] = report.delta_alpha;
    out["delta_max"] = report.delta_max;
    out["trials"] = report.trials;
    out["sample_length"] = report.sample_length;
    out["seed"] = report.seed;
    out["exceeds_delta_max"] = report.exceeds_delta_max;
    out["quantile_unstable"] = report.quantile_unstable;
    if (include_samples) out["divergences"] = report.divergences;
    return out;
}

inline json settings_to_json(const IdentifyOptions& opts) {
    json out;
    out["rho"] = opts.admm.rho;
    out["eps_abs"] = opts.admm.eps_abs;
    out["eps_rel"] = opts.admm.eps_rel;
    out["max_iters"] = opts.admm.max_iters;
    out["armijo_c"] = opts.admm.armijo_c;
    out["beta_step"] = opts.admm.beta_step;
    out["a"] = opts.admm.a;
    out["b"] = opts.admm.b;
    out["l"] = opts.admm.l;
    out["h"] = opts.admm.h;
    out["alpha"] = opts.alpha;
    out["trials"] = opts.trials;
    out["seed"] = opts.seed;
    out["tau"] = opts.tau;
    out["grid_solver"] = opts.grid_solver;
    out["grid_eval"] = opts.grid_eval;
    return out;
}

// Identified-model document: coefficients of the recovered spectra, the MA
// factor, the AR polynomial, the factor count, and solver diagnostics.
inline json result_to_json(const ArmaIdentifyResult& result, const IdentifyOptions& opts) {
    const IdentifyResult& ma = result.ma;
    json out;
    out["schema"] = "dfa-model/1";
    out["m"] = result.model.m;
    out["n"] = result.model.n;
    out["p"] = result.model.p;
    out["a"] = result.model.a;
    out["r_hat"] = ma.factors.r_hat;
    out["Phi_coeffs"] = coeffs_to_json(ma.primal.Phi.coeffs());
    out["PhiL_coeffs"] = coeffs_to_json(ma.primal.PhiL.coeffs());
    out["PhiD_coeffs"] = coeffs_to_json(ma.primal.PhiD.coeffs());
    out["W_MA_coeffs"] = coeffs_to_json(result.model.W_MA);
    out["s_profile"] = ma.factors.s;
    out["factor_rule"] = ma.factors.rule;
    out["ar"] = {{"method", result.ar.method},
                 {"gn_iterations", result.ar.gn_iterations},
                 {"stable", result.ar.stable}};
    out["delta"] = delta_to_json(ma.delta, false);
    json solver;
    solver["lambda"] = ma.search.lambda;
    solver["J"] = ma.search.solve.J;
    solver["iterations"] = ma.search.solve.iterations;
    solver["converged"] = ma.search.solve.converged;
    solver["admm_solves"] = ma.search.admm_solves;
    solver["bracket"] = {ma.search.bracket_a, ma.search.bracket_b};
    solver["bracket_expanded"] = ma.search.expanded;
    solver["primal_residual"] = ma.search.solve.primal_residual;
    solver["dual_residual"] = ma.search.solve.dual_residual;
    solver["primal_tol"] = ma.search.solve.primal_tol;
    solver["dual_tol"] = ma.search.solve.dual_tol;
    solver["eps_used"] = ma.eps_used;
    out["solver"] = solver;
    const RecoveryDiagnostics& d = ma.primal.diagnostics;
    json diag;
    diag["duality_gap"] = d.duality_gap;
    diag["trace_L"] = d.trace_L;
    diag["slack_V_rel"] = d.slack_V_rel;
    diag["slack_U_rel"] = d.slack_U_rel;
    diag["rank_V"] = d.rank_V;
    diag["ker_V_dim"] = d.ker_V_dim;
    diag["ker_U_dim"] = d.ker_U_dim;
    diag["qL_residual_rel"] = d.qL_residual_rel;
    diag["qD_residual_rel"] = d.qD_residual_rel;
    diag["min_eig_QL"] = d.min_eig_QL;
    diag["min_eig_QD"] = d.min_eig_QD;
    diag["offdiag_D_rel"] = d.offdiag_D_rel;
    diag["is_divergence"] = d.is_divergence_value;
    diag["identity_residual"] = d.identity_residual;
    out["diagnostics"] = diag;
    out["settings"] = settings_to_json(opts);
    return out;
}

inline ArmaModel model_from_json(const json& doc) {
    for (const char* key : {"m", "n", "p", "a", "W_MA_coeffs"})
        if (!doc.contains(key)) throw InvalidInput(std::string("model JSON lacks field: ") + key);
    ArmaModel model;
    model.m = doc["m"].get<int>();
    model.n = doc["n"].get<int>();
    model.p = doc["p"].get<int>();
    if (model.m < 1 || model.n < 0 || model.p < 0)
        throw InvalidInput("model JSON has invalid dimensions");
    model.a = doc["a"].get<std::vector<double>>();
    if (static_cast<int>(model.a.size()) != model.p + 1 || model.a.empty() || model.a[0] != 1.0)
        throw InvalidInput("model JSON AR polynomial must be monic of length p + 1");
    const json& w = doc["W_MA_coeffs"];
    if (!w.is_array() || static_cast<int>(w.size()) != model.n + 1)
        throw InvalidInput("model JSON W_MA_coeffs must hold n + 1 lags");
    for (const json& lag : w) model.W_MA.push_back(matrix_from_json(lag, model.m, model.m));
    return model;
}

// Simulation sidecar: the generating model next to the sample path.
inline json simulation_model_to_json(const MAFactorModel& model, const std::vector<double>& a,
                                     std::uint64_t seed) {
    json out;
    out["schema"] = "dfa-sim-model/1";
    out["m"] = model.m;
    out["r"] = model.r;
    out["n"] = model.n;
    out["p"] = static_cast<int>(a.size()) - 1;
    out["seed"] = seed;
    out["a"] = a;
    out["WL_coeffs"] = coeffs_to_json(model.WL);
    json wd = json::array();
    for (const Matrix& w : model.WD) {
        json diag = json::array();
        for (int i = 0; i < model.m; ++i) diag.push_back(w(i, i));
        wd.push_back(diag);
    }
    out["WD_diag_coeffs"] = wd;
    return out;
}

inline void write_json(const std::string& path, const json& doc) {
    std::ofstream out(path);
    if (!out) throw InvalidInput("cannot open output file: " + path);
    out << doc.dump(2) << '\n';
    if (!out) throw InvalidInput("failed writing output file: " + path);
}

inline json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open input file: " + path);
    json doc;
    try {
        in >> doc;
    } catch (const std::exception& e) {
        throw InvalidInput(std::string("invalid JSON: ") + e.what());
    }
    return doc;
}

}  // namespace dfa

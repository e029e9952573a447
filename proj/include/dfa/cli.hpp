#pragma once

#include <algorithm>
#include <cstdint>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dfa/arma.hpp"
#include "dfa/errors.hpp"
#include "dfa/io.hpp"
#include "dfa/parallel.hpp"

namespace dfa {

namespace detail {

// Applies a JSON config file onto the option struct. Flags parsed
// afterwards override these values.
inline void apply_config(const std::string& path, IdentifyOptions& opts) {
    json doc = read_json(path);
    if (!doc.is_object()) throw InvalidInput("config must be a JSON object");
    for (const auto& [key, value] : doc.items()) {
        if (key == "rho") opts.admm.rho = value.get<double>();
        else if (key == "eps_abs") opts.admm.eps_abs = value.get<double>();
        else if (key == "eps_rel") opts.admm.eps_rel = value.get<double>();
        else if (key == "max_iters") opts.admm.max_iters = value.get<int>();
        else if (key == "armijo_c") opts.admm.armijo_c = value.get<double>();
        else if (key == "beta_step") opts.admm.beta_step = value.get<double>();
        else if (key == "a") opts.admm.a = value.get<double>();
        else if (key == "b") opts.admm.b = value.get<double>();
        else if (key == "l") opts.admm.l = value.get<double>();
        else if (key == "h") opts.admm.h = value.get<double>();
        else if (key == "alpha") opts.alpha = value.get<double>();
        else if (key == "trials") opts.trials = value.get<int>();
        else if (key == "seed") opts.seed = value.get<std::uint64_t>();
        else if (key == "tau") opts.tau = value.get<double>();
        else if (key == "grid_solver") opts.grid_solver = value.get<int>();
        else if (key == "grid_eval") opts.grid_eval = value.get<int>();
        else throw InvalidInput("unknown config key: " + key);
    }
}

inline void add_solver_flags(CLI::App* cmd, IdentifyOptions& opts) {
    cmd->add_option("--rho", opts.admm.rho, "ADMM penalty parameter");
    cmd->add_option("--eps-abs", opts.admm.eps_abs, "absolute residual tolerance");
    cmd->add_option("--eps-rel", opts.admm.eps_rel, "relative residual tolerance");
    cmd->add_option("--max-iters", opts.admm.max_iters, "ADMM iteration cap");
    cmd->add_option("--armijo-c", opts.admm.armijo_c, "line search sufficient-decrease constant");
    cmd->add_option("--beta-step", opts.admm.beta_step, "line search backtracking factor");
    cmd->add_option("--bracket-a", opts.admm.a, "lambda search bracket lower end");
    cmd->add_option("--bracket-b", opts.admm.b, "lambda search bracket upper end");
    cmd->add_option("--search-l", opts.admm.l, "lambda search terminal width");
    cmd->add_option("--search-h", opts.admm.h, "lambda search probe offset");
    cmd->add_option("--alpha", opts.alpha, "tolerance quantile level");
    cmd->add_option("--trials", opts.trials, "tolerance calibration trials");
    cmd->add_option("--seed", opts.seed, "random seed");
    cmd->add_option("--tau", opts.tau, "kernel threshold for primal recovery");
    cmd->add_option("--grid-solver", opts.grid_solver, "frequency grid size for the solver");
    cmd->add_option("--grid-eval", opts.grid_eval, "frequency grid size for evaluation");
}

inline ArmaIdentifyResult wrap_ma_result(IdentifyResult ma, int m, int n) {
    ArmaIdentifyResult result;
    result.ar.a = {1.0};
    result.ar.gn_iterations = 0;
    result.ar.stable = true;
    result.model.m = m;
    result.model.n = n;
    result.model.p = 0;
    result.model.a = {1.0};
    result.model.W_MA = ma.W_MA;
    result.ma = std::move(ma);
    return result;
}

}  // namespace detail

// Batch entry point used by the binary and the tests. Exit codes: 0 on
// success, 1 for usage or input errors, 2 for numerical failures.
inline int run_command(const std::vector<std::string>& args) {
    CLI::App app{"ARMA dynamic factor model identification"};
    app.require_subcommand(1);

    IdentifyOptions opts;
    std::string config_path;
    // The config file is applied before flag values so that flags override.
    for (std::size_t i = 0; i + 1 < args.size(); ++i)
        if (args[i] == "--config") config_path = args[i + 1];
    try {
        if (!config_path.empty()) detail::apply_config(config_path, opts);
    } catch (const InvalidInput& e) {
        std::cerr << e.what() << "\n";
        return 1;
    } catch (const Error& e) {
        std::cerr << e.what() << "\n";
        return 2;
    }
    std::string config_sink;

    // simulate
    auto* sim = app.add_subcommand("simulate", "simulate a random ARMA factor model");
    int sim_m = 10, sim_r = 2, sim_n = 2, sim_p = 0;
    long sim_N = 2000;
    std::uint64_t sim_seed = 1;
    std::string sim_out, sim_model_out;
    sim->add_option("--m", sim_m, "channel count")->required();
    sim->add_option("--r", sim_r, "factor count")->required();
    sim->add_option("--n", sim_n, "MA order")->required();
    sim->add_option("--N", sim_N, "sample length")->required();
    sim->add_option("--p", sim_p, "AR order (0 for pure MA)");
    sim->add_option("--seed", sim_seed, "random seed");
    sim->add_option("--out", sim_out, "output CSV path")->required();
    sim->add_option("--model-out", sim_model_out, "sidecar JSON path for the generating model");

    // estimate / estimate-arma
    auto* est = app.add_subcommand("estimate", "identify an MA factor model from data");
    std::string est_data, est_out;
    int est_n = 2;
    est->add_option("--data", est_data, "input CSV path")->required();
    est->add_option("--n", est_n, "MA order")->required();
    est->add_option("--out", est_out, "output JSON path")->required();
    est->add_option("--config", config_sink, "JSON config file");
    detail::add_solver_flags(est, opts);

    auto* earma = app.add_subcommand("estimate-arma", "identify an ARMA factor model from data");
    std::string earma_data, earma_out;
    int earma_n = 2, earma_p = 1, earma_mc = 1;
    earma->add_option("--data", earma_data, "input CSV path")->required();
    earma->add_option("--n", earma_n, "MA order")->required();
    earma->add_option("--p", earma_p, "AR order")->required();
    earma->add_option("--monte-carlo", earma_mc, "number of calibration-seed re-runs");
    earma->add_option("--out", earma_out, "output JSON path")->required();
    earma->add_option("--config", config_sink, "JSON config file");
    detail::add_solver_flags(earma, opts);

    // delta
    auto* del = app.add_subcommand("delta", "calibrate the divergence tolerance only");
    std::string del_data, del_out;
    int del_n = 2;
    del->add_option("--data", del_data, "input CSV path")->required();
    del->add_option("--n", del_n, "MA order")->required();
    del->add_option("--out", del_out, "output JSON path")->required();
    del->add_option("--config", config_sink, "JSON config file");
    detail::add_solver_flags(del, opts);

    // validate
    auto* val = app.add_subcommand("validate", "one-step prediction fit on validation data");
    std::string val_model, val_data, val_out;
    val->add_option("--model", val_model, "identified model JSON")->required();
    val->add_option("--data", val_data, "validation CSV path")->required();
    val->add_option("--out", val_out, "output CSV path for per-channel fit")->required();

    // profile
    auto* prof = app.add_subcommand("profile", "singular value profile of an identified model");
    std::string prof_result, prof_out;
    int prof_grid = 4096;
    prof->add_option("--result", prof_result, "identified model JSON")->required();
    prof->add_option("--out", prof_out, "output CSV path")->required();
    prof->add_option("--grid-eval", prof_grid, "frequency grid size for evaluation");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (sim->parsed()) {
            Rng rng(sim_seed);
            MAFactorModel model = random_factor_model(sim_m, sim_r, sim_n, rng);
            std::vector<double> a{1.0};
            if (sim_p > 0) a = random_stable_ar(sim_p, rng);
            TimeSeries y = sim_p > 0 ? simulate_arma(model, a, sim_N, rng)
                                     : simulate_ma(model, sim_N, rng);
            write_csv(sim_out, y);
            if (!sim_model_out.empty())
                write_json(sim_model_out, simulation_model_to_json(model, a, sim_seed));
            std::cout << "simulated " << sim_m << " channels, " << sim_N << " samples -> "
                      << sim_out << "\n";
        } else if (est->parsed()) {
            TimeSeries y = read_csv(est_data);
            ArmaIdentifyResult result =
                detail::wrap_ma_result(identify_ma(y, est_n, opts), y.channels(), est_n);
            write_json(est_out, result_to_json(result, opts));
            std::cout << "r_hat = " << result.ma.factors.r_hat
                      << ", lambda = " << result.ma.search.lambda
                      << ", converged = " << (result.ma.search.solve.converged ? "yes" : "no")
                      << " -> " << est_out << "\n";
        } else if (earma->parsed()) {
            TimeSeries y = read_csv(earma_data);
            if (earma_mc < 1) throw InvalidInput("--monte-carlo must be at least 1");
            if (earma_mc == 1) {
                ArmaIdentifyResult result = identify_arma(y, earma_n, earma_p, opts);
                write_json(earma_out, result_to_json(result, opts));
                std::cout << "r_hat = " << result.ma.factors.r_hat
                          << ", lambda = " << result.ma.search.lambda << " -> " << earma_out
                          << "\n";
            } else {
                std::vector<json> runs(static_cast<std::size_t>(earma_mc));
                std::vector<int> rhats(static_cast<std::size_t>(earma_mc));
                parallel_for(earma_mc, [&](int i) {
                    IdentifyOptions run_opts = opts;
                    run_opts.seed = opts.seed + static_cast<std::uint64_t>(i);
                    ArmaIdentifyResult r = identify_arma(y, earma_n, earma_p, run_opts);
                    runs[static_cast<std::size_t>(i)] = result_to_json(r, run_opts);
                    rhats[static_cast<std::size_t>(i)] = r.ma.factors.r_hat;
                });
                std::map<int, int> votes;
                for (int r : rhats) ++votes[r];
                json out;
                out["schema"] = "dfa-montecarlo/1";
                out["base_seed"] = opts.seed;
                out["runs"] = runs;
                json votes_json;
                for (const auto& [r, count] : votes) votes_json[std::to_string(r)] = count;
                out["r_hat_votes"] = votes_json;
                write_json(earma_out, out);
                std::cout << earma_mc << " runs -> " << earma_out << "\n";
            }
        } else if (del->parsed()) {
            TimeSeries y = read_csv(del_data);
            FrequencyGrid grid(opts.grid_solver);
            PeriodogramResult perio = truncated_periodogram(y, del_n, grid);
            DeltaReport report = estimate_delta_alpha(perio.phi, y.length(), opts.alpha,
                                                      opts.trials, opts.seed, grid);
            json doc = delta_to_json(report, true);
            doc["schema"] = "dfa-delta/1";
            doc["eps_used"] = perio.eps_used;
            write_json(del_out, doc);
            std::cout << "delta_alpha = " << report.delta_alpha
                      << ", delta_max = " << report.delta_max << " -> " << del_out << "\n";
        } else if (val->parsed()) {
            ArmaModel model = model_from_json(read_json(val_model));
            TimeSeries y = read_csv(val_data);
            PredictionReport report = fit_percent(y, one_step_predict(model, y));
            std::ofstream out(val_out);
            if (!out) throw InvalidInput("cannot open output file: " + val_out);
            out << "channel,j_fit\n";
            for (int i = 0; i < report.j_fit.size(); ++i)
                out << (y.names.empty() ? "y" + std::to_string(i + 1)
                                        : y.names[static_cast<std::size_t>(i)])
                    << ',' << detail::format_g17(report.j_fit[i]) << '\n';
            Vector sorted = report.j_fit;
            std::sort(sorted.begin(), sorted.end());
            const int mid = static_cast<int>(sorted.size()) / 2;
            const double median = sorted.size() % 2 == 1
                                      ? sorted[mid]
                                      : 0.5 * (sorted[mid - 1] + sorted[mid]);
            std::cout << "median fit = " << median << " -> " << val_out << "\n";
        } else if (prof->parsed()) {
            json doc = read_json(prof_result);
            for (const char* key : {"m", "n", "PhiL_coeffs"})
                if (!doc.contains(key))
                    throw InvalidInput(std::string("result JSON lacks field: ") + key);
            const int m = doc["m"].get<int>();
            const int n = doc["n"].get<int>();
            std::vector<Matrix> coeffs;
            for (const json& lag : doc["PhiL_coeffs"])
                coeffs.push_back(matrix_from_json(lag, m, m));
            SpectralDensity phiL(std::move(coeffs));
            if (phiL.order() != n) throw InvalidInput("PhiL_coeffs lag count does not match n");
            std::vector<double> s =
                singular_value_profile(phiL, FrequencyGrid(prof_grid), m);
            std::ofstream out(prof_out);
            if (!out) throw InvalidInput("cannot open output file: " + prof_out);
            out << "j,s\n";
            for (std::size_t j = 0; j < s.size(); ++j)
                out << (j + 1) << ',' << detail::format_g17(s[j]) << '\n';
            std::cout << "profile with " << s.size() << " values -> " << prof_out << "\n";
        }
    } catch (const InvalidInput& e) {
        std::cerr << e.what() << "\n";
        return 1;
    } catch (const Error& e) {
        std::cerr << e.what() << "\n";
        return 2;
    }
    return 0;
}

}  // namespace dfa

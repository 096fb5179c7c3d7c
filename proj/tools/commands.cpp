#include "commands.hpp"

#include "lafa/objective.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "lafa/errors.hpp"
#include "lafa/grad_backprop.hpp"
#include "lafa/grad_implicit.hpp"

namespace lafa::cli {

namespace {

NmfModel factorize_with(const DenseMatrix& x, const FactorPair& init, std::size_t iterations,
                        std::optional<double> tol = std::nullopt) {
    NmfConfig nc;
    nc.max_iterations = iterations;
    nc.rel_change_tol = tol;
    return run_nmf(x, init.w, init.h, nc);
}

std::size_t attack_rank(const AttackOptions& opts, const DatasetBundle& data) {
    if (opts.rank > 0) return opts.rank;
    if (data.w_true) return data.w_true->cols();
    throw InputError("--rank is required when the input has no known factors");
}

void require_in_range(const DenseMatrix& x, const AttackConfig& cfg) {
    const double hi = cfg.clamp_hi.value_or(INFINITY);
    if (min_entry(x) < 0.0 || max_entry(x) > hi) {
        std::ostringstream os;
        os << "input entries must lie in [0, " << hi
           << "]; pass --normalize to rescale or --no-clamp to lift the upper bound";
        throw InputError(os.str());
    }
}

json attack_config_json(const AttackOptions& opts, const AttackConfig& cfg) {
    json j = {{"data", to_json(opts.data)},
              {"driver", opts.driver},
              {"method", to_string(cfg.grad_method)},
              {"norm", to_string(cfg.norm)},
              {"epsilon", cfg.epsilon},
              {"steps", cfg.steps},
              {"step_size", cfg.resolved_step_size()},
              {"nmf_iterations", cfg.nmf_iterations},
              {"seed", cfg.seed},
              {"objective", to_string(cfg.objective)},
              {"jx_mode", cfg.jx_mode == JxMode::jx_free ? "jx-free" : "materialize"},
              {"fixed_point_tol", cfg.fixed_point_tol},
              {"ref", opts.ref},
              {"rank", opts.rank},
              {"out", opts.out}};
    j["clamp_hi"] = cfg.clamp_hi ? json(*cfg.clamp_hi) : json(nullptr);
    return j;
}

std::string trace_csv(const AttackResult& r, double epsilon) {
    std::ostringstream os;
    os << "epsilon,step,fe,recon_abs,recon_rel,w_error,bytes_peak,wall_ms\n";
    for (std::size_t s = 0; s < r.fe_trace.size(); ++s) {
        std::size_t bytes = 0;
        double wall = 0.0;
        if (s > 0 && s - 1 < r.grad_reports.size()) {
            bytes = r.grad_reports[s - 1].bytes_peak;
            wall = r.grad_reports[s - 1].wall_ms;
        }
        os << format_double(epsilon) << ',' << s << ',' << format_double(r.fe_trace[s]) << ','
           << format_double(r.recon_trace[s].absolute) << ','
           << format_double(r.recon_trace[s].relative) << ','
           << format_double(r.w_error_trace[s]) << ',' << bytes << ',' << format_double(wall)
           << '\n';
    }
    return os.str();
}

std::size_t peak_bytes(const AttackResult& r) {
    std::size_t peak = 0;
    for (const auto& g : r.grad_reports) peak = std::max(peak, g.bytes_peak);
    return peak;
}

double total_wall_ms(const AttackResult& r) {
    double total = 0.0;
    for (const auto& g : r.grad_reports) total += g.wall_ms;
    return total;
}

json result_json(const AttackResult& r) {
    json j = {{"final_fe", r.final_fe()},
              {"clean_fe", r.fe_trace.front()},
              {"recon_abs", r.final_recon().absolute},
              {"recon_rel", r.final_recon().relative},
              {"w_error", r.w_error_trace.at(r.best_step)},
              {"best_step", r.best_step},
              {"steps_run", r.grad_reports.size()},
              {"perturbation_norm", r.perturbation_norm},
              {"assignment_flips", r.assignment_flips},
              {"bytes_peak", peak_bytes(r)},
              {"gradient_wall_ms", total_wall_ms(r)}};
    j["stopped_early"] = r.stopped_early ? json(*r.stopped_early) : json(nullptr);
    return j;
}

double cosine(const DenseMatrix& a, const DenseMatrix& b) {
    const double na = frobenius_norm(a), nb = frobenius_norm(b);
    return na > 0.0 && nb > 0.0 ? dot(a.values(), b.values()) / (na * nb) : 0.0;
}

double norm_gap(const DenseMatrix& reference, const DenseMatrix& other) {
    const double nr = frobenius_norm(reference);
    return nr > 0.0 ? std::abs(frobenius_norm(other) - nr) / nr : 0.0;
}

int attack_gradcheck(const AttackOptions& opts, const AttackConfig& cfg, const DatasetBundle& data,
                     const BalancedFeatures& ref, const std::vector<std::string>& argv) {
    const FactorPair init = attack_init(cfg, data.x.rows(), data.x.cols(), ref.rank());
    const NmfModel model = factorize_with(data.x, init, cfg.nmf_iterations);
    AttackConfig bp_cfg = cfg;
    bp_cfg.grad_method = GradMethod::backprop;
    AttackConfig im_cfg = cfg;
    im_cfg.grad_method = GradMethod::implicit;
    im_cfg.polish_iterations = 0;
    const AttackGradient bp = attack_gradient(data.x, model, init, ref, bp_cfg);
    AttackGradient im;
    try {
        im = attack_gradient(data.x, model, init, ref, im_cfg);
    } catch (const PreconditionError& e) {
        std::cerr << "implicit: " << e.what() << '\n';
        return kExitCheckFailed;
    }
    const double cos = cosine(bp.grad, im.grad);
    const double gap = norm_gap(bp.grad, im.grad);
    const bool pass = cos > 0.99;
    std::cout << "gradcheck backprop vs implicit: cosine " << cos << ", relative norm gap " << gap
              << (pass ? " PASS" : " FAIL") << '\n';
    json summary = summary_envelope("attack", argv, attack_config_json(opts, cfg), cfg.seed);
    summary["gradcheck"] = {{"cosine", cos},
                            {"norm_gap", gap},
                            {"pass", pass},
                            {"backprop_bytes_peak", bp.summary.bytes_peak},
                            {"implicit_bytes_peak", im.summary.bytes_peak}};
    const auto dir = prepare_out_dir(opts.out);
    write_json(dir / "summary.json", summary);
    return pass ? kExitOk : kExitCheckFailed;
}

}  // namespace

AttackConfig make_attack_config(const AttackOptions& opts) {
    AttackConfig cfg;
    const auto norm = parse_attack_norm(opts.norm);
    if (!norm) throw InputError("unknown --norm '" + opts.norm + "' (expected l2 or linf)");
    const auto method = parse_grad_method(opts.method);
    if (!method)
        throw InputError("unknown --method '" + opts.method + "' (expected backprop or implicit)");
    const auto objective = parse_objective(opts.objective);
    if (!objective)
        throw InputError("unknown --objective '" + opts.objective +
                         "' (expected feature-error or reconstruction)");
    if (opts.jx != "jx-free" && opts.jx != "materialize")
        throw InputError("unknown --jx '" + opts.jx + "' (expected jx-free or materialize)");
    if (opts.driver != "pgd" && opts.driver != "fgsm")
        throw InputError("unknown --driver '" + opts.driver + "' (expected pgd or fgsm)");
    cfg.norm = *norm;
    cfg.grad_method = *method;
    cfg.objective = *objective;
    cfg.jx_mode = opts.jx == "jx-free" ? JxMode::jx_free : JxMode::materialize;
    cfg.epsilon = opts.epsilon;
    cfg.steps = opts.steps;
    cfg.step_size = opts.step_size;
    cfg.nmf_iterations = opts.iterations;
    cfg.seed = opts.seed;
    cfg.clamp_hi = opts.no_clamp ? std::nullopt : std::optional<double>(opts.clamp_hi);
    cfg.fixed_point_tol = opts.fixed_point_tol;
    try {
        cfg.validate();
    } catch (const std::exception& e) {
        throw InputError(e.what());
    }
    return cfg;
}

int run_factorize(const FactorizeOptions& opts, const std::vector<std::string>& argv) {
    if (opts.rank == 0) throw InputError("--rank must be >= 1");
    if (opts.iterations == 0) throw InputError("--iters must be >= 1");
    if (opts.tol && !(*opts.tol > 0.0)) throw InputError("--tol must be > 0");
    const DatasetBundle data = resolve_dataset(opts.data);
    Rng rng(opts.seed);
    const FactorPair init = seed_factors(rng, data.x.rows(), data.x.cols(), opts.rank);
    const NmfModel model = factorize_with(data.x, init, opts.iterations, opts.tol);

    const auto dir = prepare_out_dir(opts.out);
    save_matrix(dir / "W.f64", model.w, MatrixFormat::raw_f64);
    save_matrix(dir / "H.f64", model.h, MatrixFormat::raw_f64);
    save_matrix(dir / "W.csv", model.w, MatrixFormat::csv);
    save_matrix(dir / "H.csv", model.h, MatrixFormat::csv);
    std::ostringstream hist;
    hist << "iteration,kl\n";
    for (std::size_t i = 0; i < model.divergence_history.size(); ++i)
        hist << model.history_iterations[i] << ',' << format_double(model.divergence_history[i])
             << '\n';
    write_text(dir / "history.csv", hist.str());

    const ReconstructionError rec = reconstruction_error(data.x, model);
    json config = {{"data", to_json(opts.data)},
                   {"rank", opts.rank},
                   {"iterations", opts.iterations},
                   {"seed", opts.seed},
                   {"out", opts.out}};
    config["tol"] = opts.tol ? json(*opts.tol) : json(nullptr);
    json summary = summary_envelope("factorize", argv, config, opts.seed);
    summary["result"] = {{"rows", data.x.rows()},
                         {"cols", data.x.cols()},
                         {"iterations_run", model.iterations_run},
                         {"kl_final", model.divergence_history.back()},
                         {"recon_abs", rec.absolute},
                         {"recon_rel", rec.relative},
                         {"fixed_point_residual", fixed_point_residual(data.x, model.w, model.h)}};
    if (data.w_true && data.h_true && data.w_true->cols() == opts.rank)
        summary["result"]["fe_vs_ground_truth"] =
            fe_loss(balance_guarded(model.w, model.h), balance(*data.w_true, *data.h_true)).fe;
    write_json(dir / "summary.json", summary);
    std::cout << "factorize: " << data.x.shape_string() << " rank " << opts.rank << ", "
              << model.iterations_run << " iterations, relative reconstruction error "
              << rec.relative << '\n';
    return kExitOk;
}

int run_attack(const AttackOptions& opts, const std::vector<std::string>& argv) {
    const AttackConfig cfg = make_attack_config(opts);
    const DatasetBundle data = resolve_dataset(opts.data);
    require_in_range(data.x, cfg);
    const BalancedFeatures ref = resolve_reference(data, opts.ref, attack_rank(opts, data), cfg);
    if (opts.gradcheck) return attack_gradcheck(opts, cfg, data, ref, argv);

    const AttackResult r = opts.driver == "fgsm" ? fgsm(data.x, ref, cfg) : pgd(data.x, ref, cfg);
    const auto dir = prepare_out_dir(opts.out);
    save_matrix(dir / "x_adv.f64", r.x_adv, MatrixFormat::raw_f64);
    write_text(dir / "trace.csv", trace_csv(r, cfg.epsilon));
    json summary = summary_envelope("attack", argv, attack_config_json(opts, cfg), cfg.seed);
    summary["result"] = result_json(r);
    write_json(dir / "summary.json", summary);
    std::cout << "attack: fe " << r.final_fe() << " (clean " << r.fe_trace.front()
              << "), relative reconstruction error " << r.final_recon().relative
              << ", perturbation " << r.perturbation_norm << '\n';
    return kExitOk;
}

int run_sweep(const SweepOptions& opts, const std::vector<std::string>& argv) {
    if (opts.epsilons.empty()) throw InputError("--eps needs at least one value");
    if (opts.jobs == 0) throw InputError("--jobs must be >= 1");
    const AttackConfig base = make_attack_config(opts.attack);
    for (double e : opts.epsilons)
        if (!(e >= 0.0) || !std::isfinite(e)) throw InputError("--eps values must be >= 0");
    const DatasetBundle data = resolve_dataset(opts.attack.data);
    require_in_range(data.x, base);
    const BalancedFeatures ref =
        resolve_reference(data, opts.attack.ref, attack_rank(opts.attack, data), base);

    struct Outcome {
        std::optional<AttackResult> result;
        std::string error;
    };
    std::vector<Outcome> outcomes(opts.epsilons.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < opts.epsilons.size(); i = next++) {
            AttackConfig cfg = base;
            cfg.epsilon = opts.epsilons[i];
            try {
                outcomes[i].result = opts.attack.driver == "fgsm" ? fgsm(data.x, ref, cfg)
                                                                  : pgd(data.x, ref, cfg);
            } catch (const std::exception& e) {
                outcomes[i].error = e.what();
            }
        }
    };
    {
        std::vector<std::jthread> pool;
        const std::size_t n = std::min(opts.jobs, opts.epsilons.size());
        for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
    }

    std::ostringstream csv;
    csv << "epsilon,fe,recon_abs,recon_rel,w_error,perturbation_norm,bytes_peak,wall_ms,status\n";
    json rows = json::array();
    std::size_t ok = 0;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        const double eps = opts.epsilons[i];
        const auto& o = outcomes[i];
        if (o.result) {
            ++ok;
            const AttackResult& r = *o.result;
            csv << format_double(eps) << ',' << format_double(r.final_fe()) << ','
                << format_double(r.final_recon().absolute) << ','
                << format_double(r.final_recon().relative) << ','
                << format_double(r.w_error_trace.at(r.best_step)) << ','
                << format_double(r.perturbation_norm) << ',' << peak_bytes(r) << ','
                << format_double(total_wall_ms(r)) << ",ok\n";
            json row = result_json(r);
            row["epsilon"] = eps;
            rows.push_back(row);
        } else {
            csv << format_double(eps) << ",nan,nan,nan,nan,nan,0,0,failed\n";
            rows.push_back({{"epsilon", eps}, {"error", o.error}});
            std::cerr << "sweep: epsilon " << eps << " failed: " << o.error << '\n';
        }
    }
    const auto dir = prepare_out_dir(opts.attack.out);
    write_text(dir / "sweep.csv", csv.str());
    json config = attack_config_json(opts.attack, base);
    config["epsilons"] = opts.epsilons;
    config["jobs"] = opts.jobs;
    json summary = summary_envelope("sweep", argv, config, base.seed);
    summary["rows"] = rows;
    write_json(dir / "summary.json", summary);
    std::cout << "sweep: " << ok << " of " << outcomes.size() << " budgets succeeded\n";
    return ok > 0 ? kExitOk : kExitNumerical;
}

int run_path(const PathOptions& opts, const std::vector<std::string>& argv) {
    const AttackConfig cfg = make_attack_config(opts.attack);
    const DatasetBundle data = resolve_dataset(opts.attack.data);
    DenseMatrix x_tilde;
    if (!opts.tilde.empty()) {
        DataOptions tilde = opts.attack.data;
        tilde.input = opts.tilde;
        x_tilde = resolve_dataset(tilde).x;
    } else {
        if (!opts.attack.data.input.empty() || opts.attack.data.builtin != "synthetic")
            throw InputError("--tilde is required unless the built-in synthetic data is used");
        SyntheticSpec spec;
        spec.seed = opts.attack.data.data_seed;
        x_tilde = matmul(remove_spikes(*data.w_true, spec), *data.h_true);
    }
    if (!x_tilde.same_shape(data.x))
        throw InputError("--tilde is " + x_tilde.shape_string() + ", input is " +
                         data.x.shape_string());
    if (!(opts.alpha_step > 0.0 && opts.alpha_step <= 1.0))
        throw InputError("--alpha-step must be in (0, 1]");
    const BalancedFeatures ref =
        resolve_reference(data, opts.attack.ref, attack_rank(opts.attack, data), cfg);
    const std::vector<PathPoint> path =
        interpolation_path(data.x, x_tilde, alpha_grid(opts.alpha_step), ref, cfg);

    std::ostringstream csv;
    csv << "alpha,fe,recon_rel,w_error\n";
    double jump = -INFINITY, jump_alpha = 0.0;
    for (std::size_t i = 0; i < path.size(); ++i) {
        const PathPoint& p = path[i];
        csv << format_double(p.alpha) << ',' << format_double(p.fe) << ','
            << format_double(p.recon_rel) << ',' << format_double(p.w_error) << '\n';
        if (i > 0 && p.fe - path[i - 1].fe > jump) {
            jump = p.fe - path[i - 1].fe;
            jump_alpha = p.alpha;
        }
    }
    const auto dir = prepare_out_dir(opts.attack.out);
    write_text(dir / "path.csv", csv.str());
    json config = attack_config_json(opts.attack, cfg);
    config["tilde"] = opts.tilde;
    config["alpha_step"] = opts.alpha_step;
    json summary = summary_envelope("path", argv, config, cfg.seed);
    summary["result"] = {{"points", path.size()},
                         {"fe_start", path.front().fe},
                         {"fe_end", path.back().fe},
                         {"perturbation_rel", frobenius_norm(x_tilde - data.x) /
                                                  frobenius_norm(data.x)}};
    summary["result"]["max_jump"] = path.size() > 1 ? json(jump) : json(nullptr);
    summary["result"]["max_jump_alpha"] = path.size() > 1 ? json(jump_alpha) : json(nullptr);
    write_json(dir / "summary.json", summary);
    std::cout << "path: " << path.size() << " points, FE " << path.front().fe << " -> "
              << path.back().fe;
    if (path.size() > 1) std::cout << ", largest step increase " << jump << " at alpha " << jump_alpha;
    std::cout << '\n';
    return kExitOk;
}

int run_gradcheck(const GradcheckOptions& opts, const std::vector<std::string>& argv) {
    if (opts.m == 0 || opts.n == 0 || opts.rank == 0) throw InputError("empty toy shape");
    if (opts.iterations == 0) throw InputError("--t must be >= 1");
    if (opts.directions == 0) throw InputError("--directions must be >= 1");
    if (!(opts.h > 0.0)) throw InputError("--fd-step must be > 0");
    if (!(opts.fixed_point_tol > 0.0)) throw InputError("--fixed-point-tol must be > 0");

    ToySpec spec;
    spec.m = opts.m;
    spec.n = opts.n;
    spec.k = opts.rank;
    spec.seed = opts.seed;
    const DatasetBundle toy = gen_toy(spec);
    const DenseMatrix& x = toy.x;
    const BalancedFeatures ref = balance(*toy.w_true, *toy.h_true);
    Rng init_rng(opts.seed + 1);
    const FactorPair init = seed_factors(init_rng, x.rows(), x.cols(), opts.rank);
    const std::size_t t = opts.iterations;

    auto pipeline = [&](const DenseMatrix& xx) {
        const NmfModel model = factorize_with(xx, init, t);
        return fe_loss(balance(model.w, model.h), ref);
    };
    const FeatureErrorResult base = pipeline(x);
    const GradientReport bp = backprop_gradient(x, init.w, init.h, t, ref);

    std::optional<ImplicitGradientReport> im;
    std::string implicit_error;
    try {
        const NmfModel model = factorize_with(x, init, t);
        ImplicitOptions io;
        io.fixed_point_tol = opts.fixed_point_tol;
        im = implicit_gradient(x, model, feature_error_objective(ref), io);
    } catch (const PreconditionError& e) {
        implicit_error = e.what();
    }

    Rng dir_rng(opts.seed + 2);
    double bp_fd = 0.0, im_fd = 0.0;
    std::size_t unstable = 0;
    for (std::size_t d = 0; d < opts.directions; ++d) {
        DenseMatrix dir(x.rows(), x.cols());
        for (double& v : dir.values()) v = dir_rng.normal();
        dir = (1.0 / frobenius_norm(dir)) * dir;
        const FeatureErrorResult plus = pipeline(x + opts.h * dir);
        const FeatureErrorResult minus = pipeline(x - opts.h * dir);
        if (plus.assignment.perm != base.assignment.perm ||
            minus.assignment.perm != base.assignment.perm) {
            ++unstable;
            continue;
        }
        const double fd = (plus.fe - minus.fe) / (2.0 * opts.h);
        auto rel = [&](double ad) {
            const double scale = std::max({std::abs(fd), std::abs(ad), 1e-12});
            return std::abs(fd - ad) / scale;
        };
        bp_fd = std::max(bp_fd, rel(dot(bp.grad_x.values(), dir.values())));
        if (im) im_fd = std::max(im_fd, rel(dot(im->grad_x.values(), dir.values())));
    }

    bool pass = true;
    auto verdict = [&](bool ok) {
        pass = pass && ok;
        return ok ? "PASS" : "FAIL";
    };
    std::cout << "toy " << x.shape_string() << " rank " << opts.rank << ", T = " << t
              << ", FE = " << base.fe << ", " << opts.directions - unstable << " of "
              << opts.directions << " directions with a stable assignment\n";
    if (unstable == opts.directions) {
        std::cout << "no direction kept the assignment stable FAIL\n";
        pass = false;
    }
    std::cout << "backprop vs finite differences: max relative error " << bp_fd << " (tol "
              << opts.fd_tol << ") " << verdict(bp_fd <= opts.fd_tol) << '\n';
    json checks = {{"backprop_fd_max_rel", bp_fd}, {"stable_directions", opts.directions - unstable}};
    if (!im) {
        std::cout << "implicit: fixed-point precondition failed: " << implicit_error << " FAIL\n";
        std::cerr << "gradcheck: implicit gradient unavailable: " << implicit_error << '\n';
        pass = false;
        checks["implicit_error"] = implicit_error;
    } else {
        const double cos = cosine(bp.grad_x, im->grad_x);
        const double gap = norm_gap(bp.grad_x, im->grad_x);
        std::cout << "implicit vs finite differences: max relative error " << im_fd << " (tol "
                  << opts.implicit_fd_tol << ") " << verdict(im_fd <= opts.implicit_fd_tol)
                  << '\n';
        std::cout << "implicit vs backprop: cosine " << cos << " (min " << opts.min_cosine
                  << "), relative norm gap " << gap << " (max " << opts.max_norm_gap << ") "
                  << verdict(cos > opts.min_cosine && gap < opts.max_norm_gap) << '\n';
        checks["implicit_fd_max_rel"] = im_fd;
        checks["cosine"] = cos;
        checks["norm_gap"] = gap;
        checks["implicit_solve_residual"] = im->solve_residual;
        checks["fixed_point_residual"] = im->fixed_point_residual;
    }
    checks["pass"] = pass;
    if (!opts.out.empty()) {
        json config = {{"m", opts.m},
                       {"n", opts.n},
                       {"rank", opts.rank},
                       {"t", opts.iterations},
                       {"seed", opts.seed},
                       {"directions", opts.directions},
                       {"h", opts.h},
                       {"fixed_point_tol", opts.fixed_point_tol},
                       {"out", opts.out}};
        json summary = summary_envelope("gradcheck", argv, config, opts.seed);
        summary["result"] = checks;
        write_json(prepare_out_dir(opts.out) / "summary.json", summary);
    }
    if (!pass) std::cerr << "gradcheck: tolerance breach\n";
    return pass ? kExitOk : kExitCheckFailed;
}

int run_report(const ReportOptions& opts) {
    if (opts.files.empty()) throw InputError("report needs at least one summary file");
    std::ostringstream csv;
    csv << "file,command,epsilon,fe,recon_rel,perturbation_norm,bytes_peak\n";
    for (const std::string& file : opts.files) {
        std::ifstream in(file);
        if (!in) throw InputError("cannot open '" + file + "'");
        json doc;
        try {
            doc = json::parse(in);
        } catch (const json::exception& e) {
            throw InputError("'" + file + "' is not valid JSON: " + e.what());
        }
        if (!doc.contains("schema_version") || doc["schema_version"] != kSchemaVersion)
            throw InputError("'" + file + "' has an unsupported schema_version");
        const std::string command = doc.value("command", "");
        std::cout << file << ": " << command;
        auto emit = [&](const json& r, double eps) {
            const double fe = r.value("final_fe", NAN);
            const double rec = r.value("recon_rel", NAN);
            csv << file << ',' << command << ',' << format_double(eps) << ','
                << format_double(fe) << ',' << format_double(rec) << ','
                << format_double(r.value("perturbation_norm", NAN)) << ','
                << r.value("bytes_peak", std::size_t{0}) << '\n';
            std::cout << "\n  eps " << eps << ": fe " << fe << ", recon_rel " << rec;
        };
        if (command == "attack" && doc.contains("result")) {
            emit(doc["result"], doc["config_echo"].value("epsilon", NAN));
        } else if (command == "sweep") {
            for (const json& row : doc.value("rows", json::array())) {
                if (row.contains("error"))
                    std::cout << "\n  eps " << row.value("epsilon", NAN) << ": failed";
                else
                    emit(row, row.value("epsilon", NAN));
            }
        } else if (doc.contains("result")) {
            std::cout << "\n  " << doc["result"].dump();
        }
        std::cout << '\n';
    }
    if (!opts.csv.empty()) write_text(opts.csv, csv.str());
    return kExitOk;
}

std::vector<std::string> replay_argv(const ReplayOptions& opts) {
    std::ifstream in(opts.summary);
    if (!in) throw InputError("cannot open '" + opts.summary + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw InputError("'" + opts.summary + "' is not valid JSON: " + e.what());
    }
    if (!doc.contains("config_echo") || !doc["config_echo"].contains("argv"))
        throw InputError("'" + opts.summary + "' has no recorded argv");
    std::vector<std::string> argv = doc["config_echo"]["argv"].get<std::vector<std::string>>();
    if (argv.empty()) throw InputError("'" + opts.summary + "' has an empty argv");
    if (!opts.out.empty()) {
        bool replaced = false;
        for (std::size_t i = 1; i + 1 < argv.size(); ++i) {
            if (argv[i] == "--out") {
                argv[i + 1] = opts.out;
                replaced = true;
            }
        }
        if (!replaced) {
            argv.push_back("--out");
            argv.push_back(opts.out);
        }
    }
    return argv;
}

}  // namespace lafa::cli

#include "lafa/attack.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "lafa/errors.hpp"
#include "lafa/grad_backprop.hpp"

namespace lafa {

std::string_view to_string(AttackNorm norm) {
    return norm == AttackNorm::l2 ? "l2" : "linf";
}

std::string_view to_string(GradMethod method) {
    return method == GradMethod::backprop ? "backprop" : "implicit";
}

std::optional<AttackNorm> parse_attack_norm(std::string_view name) {
    if (name == "l2" || name == "L2") return AttackNorm::l2;
    if (name == "linf" || name == "Linf" || name == "inf") return AttackNorm::linf;
    return std::nullopt;
}

std::optional<GradMethod> parse_grad_method(std::string_view name) {
    if (name == "backprop") return GradMethod::backprop;
    if (name == "implicit") return GradMethod::implicit;
    return std::nullopt;
}

std::optional<Objective> parse_objective(std::string_view name) {
    if (name == "feature-error" || name == "fe") return Objective::feature_error;
    if (name == "reconstruction" || name == "recon") return Objective::reconstruction;
    return std::nullopt;
}

double AttackConfig::resolved_step_size() const {
    return step_size ? *step_size : 2.5 * epsilon / static_cast<double>(steps);
}

void AttackConfig::validate() const {
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon))
        throw PreconditionError("attack: epsilon must be finite and >= 0");
    if (steps == 0) throw PreconditionError("attack: steps must be >= 1");
    if (nmf_iterations == 0) throw PreconditionError("attack: nmf_iterations must be >= 1");
    if (step_size && !(*step_size > 0.0)) throw PreconditionError("attack: step_size must be > 0");
    if (clamp_hi && !(*clamp_hi > 0.0)) throw PreconditionError("attack: clamp_hi must be > 0");
}

namespace {

NmfModel factorize(const DenseMatrix& x, const FactorPair& init, const AttackConfig& cfg) {
    NmfConfig nc;
    nc.max_iterations = cfg.nmf_iterations;
    nc.epsilon_guard = cfg.guard;
    nc.record_every = cfg.nmf_iterations;
    return run_nmf(x, init.w, init.h, nc);
}

TerminalObjective make_objective(const BalancedFeatures& ref, Objective objective) {
    return objective == Objective::feature_error ? feature_error_objective(ref)
                                                 : reconstruction_objective();
}

void check_input(const DenseMatrix& x, const BalancedFeatures& ref, const AttackConfig& cfg,
                 const char* what) {
    cfg.validate();
    if (x.empty()) throw ShapeError(std::string(what) + ": empty input");
    if (ref.m_rows != x.rows() || ref.wh.rows() != x.rows() + x.cols()) {
        throw ShapeError(std::string(what) + ": reference features do not match input " +
                         x.shape_string());
    }
    const double hi = cfg.clamp_hi.value_or(INFINITY);
    for (double v : x.values()) {
        if (!(v >= 0.0) || v > hi) {
            std::ostringstream os;
            os << what << ": input entries must lie in [0, " << hi << "]";
            throw PreconditionError(os.str());
        }
    }
}

std::size_t best_index(const AttackResult& r, Objective objective) {
    std::size_t best = 0;
    for (std::size_t s = 1; s < r.fe_trace.size(); ++s) {
        const bool better = objective == Objective::feature_error
                                ? r.fe_trace[s] > r.fe_trace[best]
                                : r.recon_trace[s].absolute > r.recon_trace[best].absolute;
        if (better) best = s;
    }
    return best;
}

/// Ascent direction: sign(G) for L∞, G/‖G‖_F for L2 (zero when G = 0).
DenseMatrix ascent_direction(const DenseMatrix& g, AttackNorm norm) {
    DenseMatrix d(g.rows(), g.cols());
    if (norm == AttackNorm::linf) {
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double v = g.values()[i];
            d.values()[i] = v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
        }
        return d;
    }
    const double n = frobenius_norm(g);
    return n > 0.0 ? (1.0 / n) * g : d;
}

class AttackRun {
public:
    AttackRun(const DenseMatrix& x, const BalancedFeatures& ref, const AttackConfig& cfg)
        : x_(x), ref_(ref), cfg_(cfg), clean_norm_(frobenius_norm(x)),
          init_(attack_init(cfg, x.rows(), x.cols(), ref.rank())) {}

    /// Factorizes and scores `xs`; returns the model for the gradient step.
    NmfModel record(const DenseMatrix& xs) {
        NmfModel model = factorize(xs, init_, cfg_);
        IterateMetrics m = evaluate_iterate(xs, model, ref_, clean_norm_);
        if (last_perm_ && *last_perm_ != m.assignment.perm) ++result_.assignment_flips;
        last_perm_ = m.assignment.perm;
        result_.fe_trace.push_back(m.fe);
        result_.recon_trace.push_back(m.recon);
        result_.w_error_trace.push_back(m.w_error);
        result_.delta_fro_trace.push_back(frobenius_norm(xs - x_));
        iterates_.push_back(xs);
        return model;
    }

    std::optional<DenseMatrix> gradient(const DenseMatrix& xs, const NmfModel& model,
                                        std::size_t step) {
        try {
            AttackGradient g = attack_gradient(xs, model, init_, ref_, cfg_);
            g.summary.step = step;
            result_.grad_reports.push_back(g.summary);
            return std::move(g.grad);
        } catch (const DegenerateComponentError& e) {
            result_.stopped_early = e.what();
            return std::nullopt;
        }
    }

    AttackResult finish() {
        result_.best_step = best_index(result_, cfg_.objective);
        result_.x_adv = std::move(iterates_[result_.best_step]);
        result_.perturbation_norm = perturbation_norm(result_.x_adv, x_, cfg_.norm);
        return std::move(result_);
    }

private:
    const DenseMatrix& x_;
    const BalancedFeatures& ref_;
    const AttackConfig& cfg_;
    double clean_norm_;
    FactorPair init_;
    AttackResult result_;
    std::vector<DenseMatrix> iterates_;
    std::optional<std::vector<std::size_t>> last_perm_;
};

}  // namespace

IterateMetrics evaluate_iterate(const DenseMatrix& x, const NmfModel& model,
                                const BalancedFeatures& ref, double clean_norm) {
    IterateMetrics out;
    const BalancedFeatures feats = balance_guarded(model.w, model.h);
    const FeatureErrorResult fe = fe_loss(feats, ref);
    out.fe = fe.fe;
    out.assignment = fe.assignment;
    out.w_error = w_only_error(feats.w_block(), ref.w_block(), fe.assignment);
    out.recon.absolute = reconstruction_error(x, model.w, model.h).absolute;
    out.recon.relative = clean_norm > 0.0 ? out.recon.absolute / clean_norm : 0.0;
    return out;
}

FactorPair attack_init(const AttackConfig& cfg, std::size_t m, std::size_t n, std::size_t k) {
    Rng rng(cfg.seed);
    return seed_factors(rng, m, n, k);
}

double perturbation_norm(const DenseMatrix& a, const DenseMatrix& b, AttackNorm norm) {
    require_same_shape(a, b, "perturbation_norm");
    return norm == AttackNorm::l2 ? frobenius_norm(a - b) : max_abs_diff(a, b);
}

DenseMatrix project_perturbation(const DenseMatrix& x, const DenseMatrix& candidate,
                                 const AttackConfig& cfg) {
    require_same_shape(x, candidate, "project_perturbation");
    DenseMatrix delta = candidate - x;
    const double eps = cfg.epsilon;
    if (cfg.norm == AttackNorm::linf) {
        for (double& d : delta.values()) d = std::clamp(d, -eps, eps);
    } else {
        const double n = frobenius_norm(delta);
        if (n > eps) delta = (n > 0.0 ? eps / n : 0.0) * delta;
    }
    DenseMatrix out = x + delta;
    const double hi = cfg.clamp_hi.value_or(INFINITY);
    for (double& v : out.values()) v = std::clamp(v, 0.0, hi);
    return out;
}

AttackGradient attack_gradient(const DenseMatrix& x, const NmfModel& model, const FactorPair& init,
                               const BalancedFeatures& ref, const AttackConfig& cfg) {
    const TerminalObjective objective = make_objective(ref, cfg.objective);
    AttackGradient out;
    if (cfg.grad_method == GradMethod::backprop) {
        GradientReport rep =
            backprop_gradient(x, init.w, init.h, cfg.nmf_iterations, objective, cfg.guard);
        out.grad = std::move(rep.grad_x);
        out.summary.bytes_peak = rep.bytes_peak;
        out.summary.wall_ms = rep.wall_time.count() * 1e3;
        out.summary.loss_value = rep.loss_value;
        return out;
    }
    ImplicitOptions opts;
    opts.guard = cfg.guard;
    opts.mode = cfg.jx_mode;
    opts.fixed_point_tol = cfg.fixed_point_tol;
    // MU from an iterate whose entries may have underflowed to zero; run_nmf
    // rejects such starts, so step directly.
    NmfModel polished = model;
    std::size_t extra = 0;
    while (extra < cfg.polish_iterations &&
           fixed_point_residual(x, polished.w, polished.h, cfg.guard) > cfg.fixed_point_tol) {
        for (std::size_t i = 0; i < 100 && extra < cfg.polish_iterations; ++i, ++extra) {
            FactorPair next = mu_step(x, polished.w, polished.h, cfg.guard);
            polished.w = std::move(next.w);
            polished.h = std::move(next.h);
        }
    }
    ImplicitGradientReport rep = implicit_gradient(x, polished, objective, opts);
    out.summary.polish_iterations = extra;
    out.grad = std::move(rep.grad_x);
    out.summary.bytes_peak = rep.bytes_peak;
    out.summary.wall_ms = rep.wall_time.count() * 1e3;
    out.summary.loss_value = rep.loss_value;
    out.summary.solve_residual = rep.solve_residual;
    out.summary.fixed_point_residual = rep.fixed_point_residual;
    out.summary.gauge_rank = rep.gauge_rank;
    return out;
}

AttackResult fgsm(const DenseMatrix& x, const BalancedFeatures& ref, const AttackConfig& cfg) {
    check_input(x, ref, cfg, "fgsm");
    AttackRun run(x, ref, cfg);
    const NmfModel model = run.record(x);
    if (cfg.epsilon > 0.0) {
        if (auto g = run.gradient(x, model, 0)) {
            const DenseMatrix step = cfg.epsilon * ascent_direction(*g, cfg.norm);
            run.record(project_perturbation(x, x + step, cfg));
        }
    }
    return run.finish();
}

AttackResult pgd(const DenseMatrix& x, const BalancedFeatures& ref, const AttackConfig& cfg) {
    check_input(x, ref, cfg, "pgd");
    AttackRun run(x, ref, cfg);
    const double alpha = cfg.resolved_step_size();
    DenseMatrix xs = x;
    NmfModel model = run.record(xs);
    if (cfg.epsilon == 0.0) return run.finish();
    for (std::size_t s = 0; s < cfg.steps; ++s) {
        const std::optional<DenseMatrix> g = run.gradient(xs, model, s);
        if (!g) break;
        xs = project_perturbation(x, xs + alpha * ascent_direction(*g, cfg.norm), cfg);
        model = run.record(xs);
    }
    return run.finish();
}

std::vector<PathPoint> interpolation_path(const DenseMatrix& x, const DenseMatrix& x_tilde,
                                          const std::vector<double>& alphas,
                                          const BalancedFeatures& ref, const AttackConfig& cfg) {
    require_same_shape(x, x_tilde, "interpolation_path");
    if (ref.m_rows != x.rows() || ref.wh.rows() != x.rows() + x.cols())
        throw ShapeError("interpolation_path: reference features do not match input " +
                         x.shape_string());
    for (double a : alphas)
        if (!(a >= 0.0 && a <= 1.0))
            throw PreconditionError("interpolation_path: alphas must lie in [0, 1]");
    const FactorPair init = attack_init(cfg, x.rows(), x.cols(), ref.rank());
    std::vector<PathPoint> out;
    out.reserve(alphas.size());
    for (double a : alphas) {
        const DenseMatrix blend = a * x_tilde + (1.0 - a) * x;
        const NmfModel model = factorize(blend, init, cfg);
        const IterateMetrics m = evaluate_iterate(blend, model, ref, frobenius_norm(blend));
        out.push_back({a, m.fe, m.recon.relative, m.w_error});
    }
    return out;
}

std::vector<double> alpha_grid(double step) {
    if (!(step > 0.0 && step <= 1.0)) throw PreconditionError("alpha_grid: step must be in (0, 1]");
    const auto count = static_cast<std::size_t>(std::floor(1.0 / step + 1e-9));
    std::vector<double> out;
    for (std::size_t i = 0; i <= count; ++i)
        out.push_back(std::min(1.0, static_cast<double>(i) * step));
    if (out.back() < 1.0) out.push_back(1.0);
    return out;
}

std::vector<double> rank_profile(const DenseMatrix& w) { return singular_values(w); }

}  // namespace lafa

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "commands.hpp"
#include "lafa/errors.hpp"

namespace {

using namespace lafa::cli;

void add_data_flags(CLI::App* cmd, DataOptions& data) {
    cmd->add_option("--input", data.input, "Input matrix (.csv or raw-f64)");
    cmd->add_option("--builtin", data.builtin, "Built-in dataset when no --input is given")
        ->check(CLI::IsMember({"synthetic", "toy"}));
    cmd->add_option("--format", data.format, "Input format override: csv or raw-f64");
    cmd->add_flag("--allow-shift", data.allow_shift, "Shift negative inputs to a zero minimum");
    cmd->add_flag("--normalize", data.normalize, "Min-max normalize the input to [0, 1]");
    cmd->add_option("--data-seed", data.data_seed, "Seed of the built-in generators");
}

void add_attack_flags(CLI::App* cmd, AttackOptions& a) {
    add_data_flags(cmd, a.data);
    cmd->add_option("--driver", a.driver, "pgd or fgsm");
    cmd->add_option("--method", a.method, "Gradient engine: backprop or implicit");
    cmd->add_option("--norm", a.norm, "Attack norm: l2 or linf");
    cmd->add_option("--eps", a.epsilon, "Perturbation budget");
    cmd->add_option("--steps", a.steps, "Ascent steps");
    cmd->add_option("--step-size", a.step_size, "Ascent step (default 2.5*eps/steps)");
    cmd->add_option("--iters", a.iterations, "Multiplicative updates per inner factorization");
    cmd->add_option("--seed", a.seed, "Seed of the shared inner initialization");
    cmd->add_option("--clamp-hi", a.clamp_hi, "Upper clamp of attacked entries");
    cmd->add_flag("--no-clamp", a.no_clamp, "Only enforce non-negativity");
    cmd->add_option("--objective", a.objective, "feature-error or reconstruction");
    cmd->add_option("--jx", a.jx, "Implicit contraction: jx-free or materialize");
    cmd->add_option("--fixed-point-tol", a.fixed_point_tol,
                    "Largest fixed-point residual accepted by the implicit engine");
    cmd->add_option("--ref", a.ref, "Reference features: ground-truth or clean-nmf");
    cmd->add_option("--rank", a.rank, "Factorization rank (default: ground-truth rank)");
    cmd->add_option("--out", a.out, "Output directory");
}

/// Adds an explicit --seed to the recorded argv when it came from LAFA_SEED
/// or the built-in default, so replays do not depend on the environment.
std::vector<std::string> recorded_argv(const std::vector<std::string>& args, CLI::App* cmd,
                                       std::uint64_t seed) {
    std::vector<std::string> out = args;
    if (cmd->get_option_no_throw("--seed") && cmd->count("--seed") == 0) {
        out.push_back("--seed");
        out.push_back(std::to_string(seed));
    }
    return out;
}

int run(std::vector<std::string> args, int depth = 0) {
    CLI::App app{"Feature attacks on KL non-negative matrix factorization", "lafa"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kToolVersion));

    const std::uint64_t seed = default_seed();

    FactorizeOptions fo;
    fo.seed = seed;
    auto* factorize = app.add_subcommand("factorize", "Run KL multiplicative updates");
    add_data_flags(factorize, fo.data);
    factorize->add_option("--rank", fo.rank, "Factorization rank")->required();
    factorize->add_option("--iters", fo.iterations, "Maximum updates");
    factorize->add_option("--tol", fo.tol, "Stop when the relative factor change falls below this");
    factorize->add_option("--seed", fo.seed, "Initialization seed");
    factorize->add_option("--out", fo.out, "Output directory");

    AttackOptions ao;
    ao.seed = seed;
    auto* attack = app.add_subcommand("attack", "Run one PGD or FGSM feature attack");
    add_attack_flags(attack, ao);
    attack->add_flag("--gradcheck", ao.gradcheck,
                     "Compare back-propagated and implicit gradients at the clean input");

    SweepOptions so;
    so.attack.seed = seed;
    auto* sweep = app.add_subcommand("sweep", "Attack once per budget");
    add_attack_flags(sweep, so.attack);
    sweep->add_option("--eps-list", so.epsilons, "Budgets, comma separated")
        ->delimiter(',')
        ->required()
        ->check(CLI::Validator(
            [](std::string& v) { return v.empty() ? std::string("empty budget") : std::string(); },
            "EPS"));
    sweep->add_option("--jobs", so.jobs, "Concurrent attacks");

    PathOptions po;
    po.attack.seed = seed;
    auto* path = app.add_subcommand("path", "Factorize along the blend from X to X-tilde");
    add_attack_flags(path, po.attack);
    path->add_option("--tilde", po.tilde, "Endpoint matrix (default: spikes removed)");
    path->add_option("--alpha-step", po.alpha_step, "Grid spacing of alpha");

    GradcheckOptions go;
    if (std::getenv("LAFA_SEED")) go.seed = seed;
    auto* gradcheck = app.add_subcommand("gradcheck", "Check both gradient engines on a toy instance");
    gradcheck->add_option("--m", go.m, "Rows");
    gradcheck->add_option("--n", go.n, "Columns");
    gradcheck->add_option("--rank", go.rank, "Rank");
    gradcheck->add_option("--t", go.iterations, "Multiplicative updates");
    gradcheck->add_option("--seed", go.seed, "Instance seed");
    gradcheck->add_option("--directions", go.directions, "Random directions");
    gradcheck->add_option("--fd-step", go.h, "Finite-difference step");
    gradcheck->add_option("--fixed-point-tol", go.fixed_point_tol,
                          "Largest fixed-point residual accepted by the implicit engine");
    gradcheck->add_option("--out", go.out, "Optional summary directory");

    ReportOptions ro;
    auto* report = app.add_subcommand("report", "Summarize JSON summaries");
    report->add_option("files", ro.files, "summary.json files")->required();
    report->add_option("--csv", ro.csv, "Aggregate CSV output");

    ReplayOptions rp;
    auto* replay = app.add_subcommand("replay", "Rerun a command from its summary.json");
    replay->add_option("summary", rp.summary, "summary.json to replay")->required();
    replay->add_option("--out", rp.out, "Output directory for the rerun");

    std::vector<std::string> reversed(args.rbegin(), args.rend() - 1);
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return e.get_exit_code() == 0 ? code : kExitInput;
    }

    if (*factorize) return run_factorize(fo, recorded_argv(args, factorize, fo.seed));
    if (*attack) return run_attack(ao, recorded_argv(args, attack, ao.seed));
    if (*sweep) return run_sweep(so, recorded_argv(args, sweep, so.attack.seed));
    if (*path) return run_path(po, recorded_argv(args, path, po.attack.seed));
    if (*gradcheck) return run_gradcheck(go, recorded_argv(args, gradcheck, go.seed));
    if (*report) return run_report(ro);
    if (*replay) {
        if (depth > 0) throw InputError("a replayed command cannot itself be a replay");
        return run(replay_argv(rp), depth + 1);
    }
    return kExitInput;
}

}  // namespace

int main(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    try {
        return run(args);
    } catch (const InputError& e) {
        std::cerr << "lafa: " << e.what() << '\n';
        return kExitInput;
    } catch (const CheckFailed& e) {
        std::cerr << "lafa: " << e.what() << '\n';
        return kExitCheckFailed;
    } catch (const std::exception& e) {
        std::cerr << "lafa: numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    }
}

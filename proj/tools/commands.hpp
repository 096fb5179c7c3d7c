#ifndef LAFA_TOOLS_COMMANDS_HPP
#define LAFA_TOOLS_COMMANDS_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cli_common.hpp"

namespace lafa::cli {

struct FactorizeOptions {
    DataOptions data;
    std::size_t rank = 0;
    std::size_t iterations = 1000;
    std::optional<double> tol;
    std::uint64_t seed = 0;
    std::string out = "lafa_out";
};

/// Flags shared by attack, sweep and path.
struct AttackOptions {
    DataOptions data;
    std::string driver = "pgd";  ///< pgd | fgsm
    std::string method = "implicit";
    std::string norm = "linf";
    double epsilon = 0.02;
    std::size_t steps = 40;
    std::optional<double> step_size;
    std::size_t iterations = 10000;
    std::uint64_t seed = 0;
    double clamp_hi = 1.0;
    bool no_clamp = false;
    std::string objective = "feature-error";
    std::string jx = "jx-free";
    double fixed_point_tol = 1e-4;
    std::string ref = "ground-truth";
    std::size_t rank = 0;  ///< 0: rank of the built-in ground truth
    bool gradcheck = false;
    std::string out = "lafa_out";
};

struct SweepOptions {
    AttackOptions attack;
    std::vector<double> epsilons;
    std::size_t jobs = 1;
};

struct PathOptions {
    AttackOptions attack;
    std::string tilde;  ///< empty: removing-spike adversary of the synthetic data
    double alpha_step = 0.02;
};

struct GradcheckOptions {
    std::size_t m = 10;
    std::size_t n = 12;
    std::size_t rank = 2;
    std::size_t iterations = 5000;
    std::uint64_t seed = 42;
    std::size_t directions = 20;
    double h = 1e-5;
    double fixed_point_tol = 1e-6;
    double fd_tol = 1e-4;
    double implicit_fd_tol = 1e-3;
    double min_cosine = 0.99;
    double max_norm_gap = 0.05;
    std::string out;  ///< optional summary directory
};

struct ReportOptions {
    std::vector<std::string> files;
    std::string csv;  ///< optional aggregate output
};

struct ReplayOptions {
    std::string summary;
    std::string out;  ///< overrides the recorded --out
};

int run_factorize(const FactorizeOptions& opts, const std::vector<std::string>& argv);
int run_attack(const AttackOptions& opts, const std::vector<std::string>& argv);
int run_sweep(const SweepOptions& opts, const std::vector<std::string>& argv);
int run_path(const PathOptions& opts, const std::vector<std::string>& argv);
int run_gradcheck(const GradcheckOptions& opts, const std::vector<std::string>& argv);
int run_report(const ReportOptions& opts);

/// Resolves a recorded argv for replay with --out replaced.
std::vector<std::string> replay_argv(const ReplayOptions& opts);

/// Builds the AttackConfig the flags describe (InputError on bad values).
AttackConfig make_attack_config(const AttackOptions& opts);

}  // namespace lafa::cli

#endif  // LAFA_TOOLS_COMMANDS_HPP

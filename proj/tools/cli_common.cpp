#include "cli_common.hpp"

#include <charconv>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <system_error>

#include "lafa/errors.hpp"
#include "lafa/feature_error.hpp"
#include "lafa/nmf.hpp"

namespace lafa::cli {

std::uint64_t default_seed() {
    const char* env = std::getenv("LAFA_SEED");
    if (!env) return 0;
    const std::string_view text(env);
    std::uint64_t seed = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), seed);
    if (ec != std::errc() || ptr != text.data() + text.size())
        throw InputError("LAFA_SEED is not an unsigned integer: '" + std::string(text) + "'");
    return seed;
}

DatasetBundle resolve_dataset(const DataOptions& opts) {
    try {
        DatasetBundle bundle;
        if (!opts.input.empty()) {
            const std::filesystem::path path(opts.input);
            MatrixFormat format = format_from_path(path);
            if (!opts.format.empty()) {
                const auto parsed = parse_matrix_format(opts.format);
                if (!parsed) throw InputError("unknown matrix format '" + opts.format + "'");
                format = *parsed;
            }
            bundle.name = path.filename().string();
            bundle.x = load_matrix(path, format, LoadOptions{opts.allow_shift});
            if (opts.normalize) {
                NormalizedMatrix n = normalize_unit(bundle.x);
                bundle.x = std::move(n.x);
                bundle.normalization = n.normalization;
            }
        } else if (opts.builtin == "synthetic") {
            SyntheticSpec spec;
            spec.seed = opts.data_seed;
            bundle = gen_synthetic(spec);
        } else if (opts.builtin == "toy") {
            ToySpec spec;
            spec.seed = opts.data_seed;
            bundle = gen_toy(spec);
        } else {
            throw InputError("unknown built-in dataset '" + opts.builtin + "'");
        }
        return bundle;
    } catch (const InputError&) {
        throw;
    } catch (const std::exception& e) {
        throw InputError(e.what());
    }
}

json to_json(const DataOptions& opts) {
    return {{"input", opts.input},       {"builtin", opts.builtin},
            {"format", opts.format},     {"allow_shift", opts.allow_shift},
            {"normalize", opts.normalize}, {"data_seed", opts.data_seed}};
}

BalancedFeatures resolve_reference(const DatasetBundle& data, const std::string& mode,
                                   std::size_t rank, const AttackConfig& cfg) {
    if (mode == "ground-truth") {
        if (!data.w_true || !data.h_true)
            throw InputError("--ref ground-truth needs a built-in dataset with known factors");
        return balance(*data.w_true, *data.h_true);
    }
    if (mode != "clean-nmf") throw InputError("unknown --ref '" + mode + "'");
    if (rank == 0) throw InputError("--rank must be >= 1");
    const FactorPair init = attack_init(cfg, data.x.rows(), data.x.cols(), rank);
    NmfConfig nc;
    nc.max_iterations = cfg.nmf_iterations;
    nc.epsilon_guard = cfg.guard;
    nc.record_every = cfg.nmf_iterations;
    const NmfModel model = run_nmf(data.x, init.w, init.h, nc);
    return balance(model.w, model.h);
}

std::filesystem::path prepare_out_dir(const std::string& dir) {
    const std::filesystem::path path(dir);
    std::error_code ec;
    std::filesystem::create_directories(path, ec);
    if (ec) throw InputError("cannot create output directory '" + dir + "': " + ec.message());
    return path;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) throw InputError("cannot write '" + path.string() + "'");
}

void write_json(const std::filesystem::path& path, const json& doc) {
    write_text(path, doc.dump(2) + "\n");
}

json summary_envelope(const std::string& command, const std::vector<std::string>& argv,
                      const json& config, std::uint64_t seed) {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char stamp[32];
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &tm);
    json config_echo = config;
    config_echo["argv"] = argv;
    return {{"schema_version", kSchemaVersion},
            {"command", command},
            {"config_echo", config_echo},
            {"environment", {{"tool_version", kToolVersion}, {"seed", seed}, {"timestamp", stamp}}}};
}

std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return ec == std::errc() ? std::string(buf, ptr) : std::string("nan");
}

}  // namespace lafa::cli

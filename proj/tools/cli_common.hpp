#ifndef LAFA_TOOLS_CLI_COMMON_HPP
#define LAFA_TOOLS_CLI_COMMON_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "lafa/attack.hpp"
#include "lafa/data_io.hpp"

namespace lafa::cli {

using nlohmann::json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitInput = 2;
inline constexpr int kExitNumerical = 3;

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kToolVersion = "0.1.0";

/// Bad flags, unreadable files or invalid data (exit 2).
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A check that ran to completion but did not pass (exit 1).
class CheckFailed : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Seed default: LAFA_SEED when set and parseable, else 0.
std::uint64_t default_seed();

/// Where the input matrix comes from.
struct DataOptions {
    std::string input;        ///< empty: use `builtin`
    std::string builtin = "synthetic";  ///< synthetic | toy
    std::string format;       ///< csv | raw-f64; empty: from the extension
    bool allow_shift = false;
    bool normalize = false;
    std::uint64_t data_seed = 0;  ///< seed of the built-in generators
};

/// Loads or generates the input. Errors become InputError.
DatasetBundle resolve_dataset(const DataOptions& opts);

json to_json(const DataOptions& opts);

/// Reference features for an attack: ground truth (built-in data only) or
/// the clean factorization with the attack's initialization.
BalancedFeatures resolve_reference(const DatasetBundle& data, const std::string& mode,
                                   std::size_t rank, const AttackConfig& cfg);

std::filesystem::path prepare_out_dir(const std::string& dir);

void write_text(const std::filesystem::path& path, const std::string& text);
void write_json(const std::filesystem::path& path, const json& doc);

/// Summary envelope shared by every subcommand.
json summary_envelope(const std::string& command, const std::vector<std::string>& argv,
                      const json& config, std::uint64_t seed);

std::string format_double(double v);

}  // namespace lafa::cli

#endif  // LAFA_TOOLS_CLI_COMMON_HPP

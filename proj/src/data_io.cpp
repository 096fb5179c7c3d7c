#include "lafa/data_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "lafa/errors.hpp"

namespace lafa {

namespace {

double gaussian(double row, double center, double width) {
    const double z = (row - center) / width;
    return std::exp(-0.5 * z * z);
}

void validate_spec(const SyntheticSpec& spec) {
    if (spec.k != 3) throw PreconditionError("gen_synthetic: the construction has rank 3");
    if (spec.m == 0 || spec.n == 0) throw PreconditionError("gen_synthetic: empty shape");
    if (spec.gaussian_centers.size() != 2 || spec.gaussian_widths.size() != 2 ||
        spec.mix_coefficients.size() != 2) {
        throw PreconditionError("gen_synthetic: expected two Gaussians and two mix coefficients");
    }
    if (spec.spike_positions.size() != 3 || spec.spike_heights.size() != 3) {
        throw PreconditionError("gen_synthetic: expected one spike per component");
    }
    for (double wd : spec.gaussian_widths)
        if (!(wd > 0.0)) throw PreconditionError("gen_synthetic: Gaussian widths must be > 0");
    for (std::size_t pos : spec.spike_positions)
        if (pos >= spec.m) throw PreconditionError("gen_synthetic: spike row outside W");
    for (double hgt : spec.spike_heights)
        if (!(hgt >= 0.0)) throw PreconditionError("gen_synthetic: spike heights must be >= 0");
    for (double c : spec.mix_coefficients)
        if (!(c >= 0.0)) throw PreconditionError("gen_synthetic: mix coefficients must be >= 0");
}

/// Gaussian-only part of W (spikes omitted).
DenseMatrix gaussian_part(const SyntheticSpec& spec) {
    DenseMatrix g(spec.m, 3);
    for (std::size_t i = 0; i < spec.m; ++i) {
        const double row = static_cast<double>(i);
        const double g0 = gaussian(row, spec.gaussian_centers[0], spec.gaussian_widths[0]);
        const double g1 = gaussian(row, spec.gaussian_centers[1], spec.gaussian_widths[1]);
        g(i, 0) = g0;
        g(i, 1) = g1;
        g(i, 2) = spec.mix_coefficients[0] * g0 + spec.mix_coefficients[1] * g1;
    }
    return g;
}

}  // namespace

DenseMatrix synthetic_w(const SyntheticSpec& spec) {
    validate_spec(spec);
    DenseMatrix w = gaussian_part(spec);
    for (std::size_t c = 0; c < 3; ++c) w(spec.spike_positions[c], c) += spec.spike_heights[c];
    return w;
}

DatasetBundle gen_toy(const ToySpec& spec) {
    if (spec.m == 0 || spec.n == 0 || spec.k == 0) throw PreconditionError("gen_toy: empty shape");
    if (!(spec.noise >= 0.0)) throw PreconditionError("gen_toy: noise must be >= 0");
    Rng rng(spec.seed);
    DenseMatrix w = uniform_matrix(rng, spec.m, spec.k, 0.1, 1.0);
    DenseMatrix h = uniform_matrix(rng, spec.k, spec.n, 0.1, 1.0);
    // Every third anti-diagonal of each factor is zero.
    for (std::size_t i = 0; i < spec.m; ++i)
        for (std::size_t p = 0; p < spec.k; ++p)
            if ((i + p) % 3 == 0) w(i, p) = 0.0;
    for (std::size_t p = 0; p < spec.k; ++p)
        for (std::size_t j = 0; j < spec.n; ++j)
            if ((j + p) % 3 == 0) h(p, j) = 0.0;
    DenseMatrix raw = matmul(w, h);
    if (spec.noise > 0.0) raw = raw + uniform_matrix(rng, spec.m, spec.n, 0.0, spec.noise);
    const double scale = max_entry(raw);
    const double inv = 1.0 / scale;
    DatasetBundle bundle;
    bundle.name = "toy";
    bundle.normalization = {0.0, scale, false};
    bundle.x = inv * raw;
    bundle.w_true = inv * w;
    bundle.h_true = std::move(h);
    return bundle;
}

DatasetBundle gen_synthetic(const SyntheticSpec& spec) {
    DenseMatrix w = synthetic_w(spec);
    const std::vector<double> sv = singular_values(w);
    const double ratio = sv.front() > 0.0 ? sv.back() / sv.front() : 0.0;
    if (!(ratio > 1e-6)) {
        std::ostringstream os;
        os << "gen_synthetic: W_true is rank deficient (sigma3/sigma1 = " << ratio << ")";
        throw PreconditionError(os.str());
    }
    Rng rng(spec.seed);
    DenseMatrix h = uniform_matrix(rng, 3, spec.n, 0.0, 1.0);
    const DenseMatrix raw = matmul(w, h);

    // Dividing by the maximum keeps X = W·H exact (a min-shift would add a rank-one term).
    const double scale = max_entry(raw);
    DatasetBundle bundle;
    bundle.name = "synthetic";
    bundle.normalization = {0.0, scale > 0.0 ? scale : 1.0, !(scale > 0.0)};
    const double inv = 1.0 / bundle.normalization.scale;
    bundle.x = inv * raw;
    bundle.w_true = inv * w;
    bundle.h_true = std::move(h);
    return bundle;
}

DenseMatrix remove_spikes(const DenseMatrix& w_true, const SyntheticSpec& spec) {
    validate_spec(spec);
    if (w_true.rows() != spec.m || w_true.cols() != 3) {
        throw ShapeError("remove_spikes: W_true is " + w_true.shape_string() + ", spec expects " +
                         std::to_string(spec.m) + "x3");
    }
    // w_true may be the raw W or a uniformly rescaled copy; keep only the Gaussian
    // fraction of each spike entry so the result carries the same scale.
    const DenseMatrix g = gaussian_part(spec);
    DenseMatrix out = w_true;
    for (std::size_t c = 0; c < 3; ++c) {
        const std::size_t r = spec.spike_positions[c];
        const double raw = g(r, c) + spec.spike_heights[c];
        out(r, c) = raw > 0.0 ? w_true(r, c) * (g(r, c) / raw) : 0.0;
    }
    return out;
}

NormalizedMatrix normalize_unit(const DenseMatrix& x) {
    const double lo = min_entry(x);
    const double hi = max_entry(x);
    NormalizedMatrix out;
    if (!(hi > lo)) {
        out.x = DenseMatrix(x.rows(), x.cols());
        out.normalization = {lo, 1.0, true};
        return out;
    }
    const double span = hi - lo;
    out.x = DenseMatrix(x.rows(), x.cols());
    auto src = x.values();
    auto dst = out.x.values();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = (src[i] - lo) / span;
    out.normalization = {lo, span, false};
    return out;
}

std::optional<MatrixFormat> parse_matrix_format(std::string_view name) {
    if (name == "csv") return MatrixFormat::csv;
    if (name == "raw-f64" || name == "raw" || name == "f64") return MatrixFormat::raw_f64;
    return std::nullopt;
}

MatrixFormat format_from_path(const std::filesystem::path& path) {
    return path.extension() == ".csv" ? MatrixFormat::csv : MatrixFormat::raw_f64;
}

namespace {

DenseMatrix apply_sign_policy(DenseMatrix x, const LoadOptions& options) {
    const double lo = min_entry(x);
    if (lo < 0.0) {
        if (!options.allow_shift) {
            std::ostringstream os;
            os << "load_matrix: negative entry " << lo << " (use --allow-shift to shift to 0)";
            throw ParseError(os.str());
        }
        for (double& v : x.values()) v -= lo;
    }
    return x;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

/// Parses one comma-separated line; returns false at the first bad field.
bool parse_row(std::string_view line, std::vector<double>& out, std::size_t& bad_field) {
    out.clear();
    std::size_t field = 0;
    while (true) {
        const std::size_t comma = line.find(',');
        std::string_view cell = trim(line.substr(0, comma));
        if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
        double v = 0.0;
        const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
        if (cell.empty() || res.ec != std::errc() || res.ptr != cell.data() + cell.size() ||
            !std::isfinite(v)) {
            bad_field = field;
            return false;
        }
        out.push_back(v);
        ++field;
        if (comma == std::string_view::npos) break;
        line.remove_prefix(comma + 1);
    }
    return true;
}

}  // namespace

DenseMatrix parse_csv_matrix(std::string_view text, const LoadOptions& options) {
    std::vector<double> data;
    std::vector<double> row;
    std::size_t cols = 0, rows = 0, line_no = 0;
    bool first_content = true;
    while (!text.empty()) {
        const std::size_t nl = text.find('\n');
        const std::string_view line = trim(text.substr(0, nl));
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (line.empty()) continue;
        std::size_t bad_field = 0;
        if (!parse_row(line, row, bad_field)) {
            if (first_content) {  // header line
                first_content = false;
                continue;
            }
            throw ParseError("csv line " + std::to_string(line_no) + ": field " +
                             std::to_string(bad_field + 1) + " is not a finite number");
        }
        first_content = false;
        if (rows == 0) {
            cols = row.size();
        } else if (row.size() != cols) {
            throw ParseError("csv line " + std::to_string(line_no) + " (row " +
                             std::to_string(rows + 1) + "): expected " + std::to_string(cols) +
                             " fields, got " + std::to_string(row.size()));
        }
        data.insert(data.end(), row.begin(), row.end());
        ++rows;
    }
    if (rows == 0) throw ParseError("csv: no numeric rows");
    return apply_sign_policy(DenseMatrix(rows, cols, std::move(data)), options);
}

std::string to_csv(const DenseMatrix& x) {
    std::string out;
    char buf[32];
    for (std::size_t i = 0; i < x.rows(); ++i) {
        for (std::size_t j = 0; j < x.cols(); ++j) {
            if (j) out.push_back(',');
            // Shortest round-trip representation.
            const auto res = std::to_chars(buf, buf + sizeof buf, x(i, j));
            out.append(buf, res.ptr);
        }
        out.push_back('\n');
    }
    return out;
}

namespace {

template <class T>
T to_little_endian(T v) {
    if constexpr (std::endian::native == std::endian::big) {
        auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
        std::reverse(bytes.begin(), bytes.end());
        return std::bit_cast<T>(bytes);
    }
    return v;
}

template <class T>
void put(std::vector<unsigned char>& out, T v) {
    const auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(to_little_endian(v));
    out.insert(out.end(), bytes.begin(), bytes.end());
}

template <class T>
T get(const std::vector<unsigned char>& in, std::size_t offset) {
    std::array<unsigned char, sizeof(T)> bytes;
    std::memcpy(bytes.data(), in.data() + offset, sizeof(T));
    return to_little_endian(std::bit_cast<T>(bytes));
}

}  // namespace

std::vector<unsigned char> to_raw_f64(const DenseMatrix& x) {
    std::vector<unsigned char> out;
    out.reserve(16 + x.bytes());
    put<std::uint64_t>(out, x.rows());
    put<std::uint64_t>(out, x.cols());
    for (double v : x.values()) put<double>(out, v);
    return out;
}

DenseMatrix parse_raw_f64(const std::vector<unsigned char>& bytes, const LoadOptions& options) {
    if (bytes.size() < 16) {
        throw ParseError("raw-f64: header truncated at byte " + std::to_string(bytes.size()));
    }
    const auto rows = get<std::uint64_t>(bytes, 0);
    const auto cols = get<std::uint64_t>(bytes, 8);
    const std::size_t payload = bytes.size() - 16;
    if (rows != 0 && cols > payload / 8 / rows) {
        throw ParseError("raw-f64: header claims " + std::to_string(rows) + "x" +
                         std::to_string(cols) + " but file has " + std::to_string(bytes.size()) +
                         " bytes");
    }
    const std::size_t expected = 16 + rows * cols * 8;
    if (bytes.size() != expected) {
        throw ParseError("raw-f64: expected " + std::to_string(expected) + " bytes, found " +
                         std::to_string(bytes.size()));
    }
    std::vector<double> data(rows * cols);
    for (std::size_t i = 0; i < data.size(); ++i) {
        data[i] = get<double>(bytes, 16 + 8 * i);
        if (!std::isfinite(data[i])) {
            throw ParseError("raw-f64: non-finite value at byte " + std::to_string(16 + 8 * i));
        }
    }
    return apply_sign_policy(DenseMatrix(rows, cols, std::move(data)), options);
}

DenseMatrix load_matrix(const std::filesystem::path& path, MatrixFormat format,
                        const LoadOptions& options) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    try {
        if (format == MatrixFormat::csv) {
            return parse_csv_matrix(
                std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()),
                options);
        }
        return parse_raw_f64(bytes, options);
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

void save_matrix(const std::filesystem::path& path, const DenseMatrix& x, MatrixFormat format) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    if (format == MatrixFormat::csv) {
        const std::string text = to_csv(x);
        out.write(text.data(), static_cast<std::streamsize>(text.size()));
    } else {
        const auto bytes = to_raw_f64(x);
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
    }
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace lafa

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "doctest.h"
#include "lafa/data_io.hpp"
#include "lafa/errors.hpp"
#include "lafa/feature_error.hpp"
#include "lafa/nmf.hpp"
#include "oracles.hpp"

using namespace lafa;
namespace fs = std::filesystem;

namespace {

fs::path temp_path(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "lafa_data_io_test";
    fs::create_directories(dir);
    return dir / name;
}

std::vector<unsigned char> read_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

double sigma_ratio(const DenseMatrix& w) {
    const auto sv = singular_values(w);
    return sv.back() / sv.front();
}

}  // namespace

TEST_SUITE("data-io") {

TEST_CASE("synthetic bundle: shape, range, exactness and rank") {
    const SyntheticSpec spec;
    const DatasetBundle b = gen_synthetic(spec);
    CHECK(b.x.rows() == 100);
    CHECK(b.x.cols() == 200);
    CHECK(min_entry(b.x) >= 0.0);
    CHECK(max_entry(b.x) == 1.0);
    REQUIRE(b.w_true);
    REQUIRE(b.h_true);
    CHECK(b.w_true->cols() == 3);
    CHECK(min_entry(*b.w_true) >= 0.0);
    CHECK(min_entry(*b.h_true) >= 0.0);
    CHECK(max_entry(*b.h_true) < 1.0);
    CHECK(sigma_ratio(*b.w_true) > 1e-6);
    CHECK(sigma_ratio(synthetic_w(spec)) > 1e-6);

    // Raw data is exactly W·H; normalization divides both by the same scalar.
    const DenseMatrix raw = matmul(synthetic_w(spec), *b.h_true);
    CHECK(b.normalization.scale == max_entry(raw));
    const DenseMatrix back = b.normalization.scale * b.x;
    CHECK(frobenius_norm(back - raw) <= 1e-14 * frobenius_norm(raw));
    CHECK(frobenius_norm(matmul(*b.w_true, *b.h_true) - b.x) <= 1e-14 * frobenius_norm(b.x));

    const auto sv = singular_values(b.x);
    CHECK(sv[2] / sv[0] > 1e-6);
    CHECK(sv[3] / sv[0] < 1e-12);
}

TEST_CASE("synthetic bundle is seed-deterministic") {
    SyntheticSpec spec;
    spec.seed = 5;
    const DatasetBundle a = gen_synthetic(spec), b = gen_synthetic(spec);
    CHECK(a.x == b.x);
    CHECK(*a.h_true == *b.h_true);
    spec.seed = 6;
    CHECK_FALSE(gen_synthetic(spec).x == a.x);
}

TEST_CASE("synthetic spec validation") {
    SyntheticSpec bad;
    bad.spike_positions = {15, 85, 150};
    CHECK_THROWS_AS(gen_synthetic(bad), PreconditionError);
    SyntheticSpec width;
    width.gaussian_widths = {10.0, 0.0};
    CHECK_THROWS_AS(gen_synthetic(width), PreconditionError);
    // Without spikes and with column 3 a mix of the first two, W is rank 2.
    SyntheticSpec flat;
    flat.spike_heights = {0.0, 0.0, 0.0};
    CHECK_THROWS_AS(gen_synthetic(flat), PreconditionError);
}

TEST_CASE("remove_spikes leaves a rank-2 matrix and untouched Gaussian rows") {
    const SyntheticSpec spec;
    const DatasetBundle b = gen_synthetic(spec);
    const DenseMatrix wt = remove_spikes(*b.w_true, spec);
    CHECK(sigma_ratio(wt) < 1e-8);
    std::size_t changed = 0;
    for (std::size_t i = 0; i < wt.rows(); ++i)
        for (std::size_t c = 0; c < 3; ++c)
            if (wt(i, c) != (*b.w_true)(i, c)) {
                ++changed;
                CHECK(i == spec.spike_positions[c]);
            }
    CHECK(changed == 3);

    const DenseMatrix x_tilde = matmul(wt, *b.h_true);
    const double frac = frobenius_norm(x_tilde - b.x) / frobenius_norm(b.x);
    CHECK(frac > 0.05);
    CHECK(frac < 0.35);
    CHECK_THROWS_AS(remove_spikes(DenseMatrix(10, 3), spec), ShapeError);
}

TEST_CASE("clean synthetic factorization recovers the ground truth") {
    const DatasetBundle b = gen_synthetic(SyntheticSpec{});
    Rng rng(0);
    const FactorPair init = seed_factors(rng, 100, 200, 3);
    NmfConfig cfg;
    cfg.max_iterations = 10000;
    const NmfModel m = run_nmf(b.x, init.w, init.h, cfg);
    CHECK(fe_loss(balance(m.w, m.h), balance(*b.w_true, *b.h_true)).fe < 0.05);
}

TEST_CASE("toy bundle") {
    const DatasetBundle t = gen_toy(ToySpec{});
    CHECK(t.x.rows() == 10);
    CHECK(t.x.cols() == 12);
    CHECK(max_entry(t.x) == 1.0);
    CHECK(min_entry(t.x) > 0.0);
    CHECK((*t.w_true)(0, 0) == 0.0);
    CHECK((*t.h_true)(1, 2) == 0.0);
    const DenseMatrix noise = t.x - matmul(*t.w_true, *t.h_true);
    CHECK(min_entry(noise) >= -1e-15);
    CHECK(max_entry(noise) < 0.05 / t.normalization.scale + 1e-15);
    CHECK(gen_toy(ToySpec{}).x == t.x);
}

TEST_CASE("normalize_unit") {
    const DenseMatrix unit = DenseMatrix::from_rows({{0, 0.5}, {1, 0.25}});
    const NormalizedMatrix u = normalize_unit(unit);
    CHECK(u.x == unit);
    CHECK_FALSE(u.normalization.degenerate);

    const NormalizedMatrix c = normalize_unit(DenseMatrix(3, 3, 7.0));
    CHECK(c.normalization.degenerate);
    CHECK(max_abs(c.x) == 0.0);

    Rng rng(1);
    const DenseMatrix r = uniform_matrix(rng, 8, 9, -3.0, 5.0);
    const NormalizedMatrix n = normalize_unit(r);
    CHECK(min_entry(n.x) == 0.0);
    CHECK(max_entry(n.x) == 1.0);
    const DenseMatrix restored = n.normalization.scale * n.x + DenseMatrix(8, 9, n.normalization.offset);
    CHECK(oracle::max_abs_diff(restored, r) < 1e-14);
}

TEST_CASE("csv parsing") {
    CHECK(parse_csv_matrix("1,2\n3,4") == DenseMatrix::from_rows({{1, 2}, {3, 4}}));
    CHECK(parse_csv_matrix("a,b\n1,2\n3,4\n") == DenseMatrix::from_rows({{1, 2}, {3, 4}}));
    CHECK(parse_csv_matrix("1, 2\r\n3 ,4\r\n") == DenseMatrix::from_rows({{1, 2}, {3, 4}}));

    try {
        (void)parse_csv_matrix("1,2\n3,4,5\n");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_csv_matrix("1,2\n3,x\n"), ParseError);
    CHECK_THROWS_AS(parse_csv_matrix(""), ParseError);
    CHECK_THROWS_AS(parse_csv_matrix("1,-2\n"), ParseError);
    LoadOptions shift;
    shift.allow_shift = true;
    CHECK(parse_csv_matrix("1,-2\n", shift) == DenseMatrix::from_rows({{3, 0}}));
}

TEST_CASE("raw-f64 layout and round trips") {
    const DenseMatrix m = DenseMatrix::from_rows({{1.5, 0.0, 2.0}, {0.25, 3.0, 1e-300}});
    const auto bytes = to_raw_f64(m);
    REQUIRE(bytes.size() == 16 + 6 * 8);
    CHECK(bytes[0] == 2);
    for (int i = 1; i < 8; ++i) CHECK(bytes[i] == 0);
    CHECK(bytes[8] == 3);
    // 1.5 = 0x3FF8000000000000, little-endian.
    CHECK(bytes[16 + 7] == 0x3F);
    CHECK(bytes[16 + 6] == 0xF8);
    CHECK(parse_raw_f64(bytes) == m);

    auto truncated = bytes;
    truncated.pop_back();
    CHECK_THROWS_AS(parse_raw_f64(truncated), ParseError);
    CHECK_THROWS_AS(parse_raw_f64(std::vector<unsigned char>(10)), ParseError);

    Rng rng(2);
    const DenseMatrix r = uniform_matrix(rng, 13, 7, 0.0, 1.0);
    const fs::path f64 = temp_path("r.f64");
    save_matrix(f64, r, MatrixFormat::raw_f64);
    const DenseMatrix back = load_matrix(f64, MatrixFormat::raw_f64);
    CHECK(back == r);
    const fs::path again = temp_path("r2.f64");
    save_matrix(again, back, MatrixFormat::raw_f64);
    CHECK(read_bytes(again) == read_bytes(f64));

    const fs::path csv = temp_path("r.csv");
    save_matrix(csv, r, MatrixFormat::csv);
    CHECK(load_matrix(csv, MatrixFormat::csv) == r);
    CHECK(format_from_path(csv) == MatrixFormat::csv);
    CHECK(format_from_path(f64) == MatrixFormat::raw_f64);
    CHECK_THROWS_AS(load_matrix(temp_path("missing.csv"), MatrixFormat::csv), ParseError);
    CHECK(parse_matrix_format("raw-f64") == MatrixFormat::raw_f64);
    CHECK_FALSE(parse_matrix_format("png").has_value());
}

}  // TEST_SUITE

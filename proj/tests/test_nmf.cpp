#include <cmath>

#include "doctest.h"
#include "lafa/data_io.hpp"
#include "lafa/errors.hpp"
#include "lafa/feature_error.hpp"
#include "lafa/grad_implicit.hpp"
#include "lafa/nmf.hpp"
#include "oracles.hpp"

using namespace lafa;

namespace {

NmfModel run(const DenseMatrix& x, const FactorPair& init, std::size_t t,
             std::optional<double> tol = std::nullopt) {
    NmfConfig cfg;
    cfg.max_iterations = t;
    cfg.rel_change_tol = tol;
    return run_nmf(x, init.w, init.h, cfg);
}

}  // namespace

TEST_SUITE("nmf") {

TEST_CASE("kl_divergence") {
    Rng rng(1);
    const DenseMatrix w = uniform_matrix(rng, 5, 2, 0.1, 1.0);
    const DenseMatrix h = uniform_matrix(rng, 2, 6, 0.1, 1.0);
    CHECK(std::abs(kl_divergence(matmul(w, h), w, h)) < 1e-12);

    const double scalar = kl_divergence(DenseMatrix::from_rows({{2}}), DenseMatrix::from_rows({{1}}),
                                        DenseMatrix::from_rows({{1}}));
    CHECK(scalar == doctest::Approx(2.0 * std::log(2.0) - 1.0).epsilon(1e-14));

    DenseMatrix x = uniform_matrix(rng, 5, 6, 0.0, 1.0);
    x(0, 0) = 0.0;  // 0·log 0 = 0
    const double direct = oracle::kl_direct(x, oracle::naive_matmul(w, h));
    CHECK(std::abs(kl_divergence(x, w, h) - direct) < 1e-12);
    CHECK(kl_divergence(x, w, h) >= -1e-12);

    CHECK_THROWS_AS(kl_divergence(DenseMatrix(5, 5), w, h), ShapeError);
}

TEST_CASE("mu_step: fixed point, scalar case and descent") {
    Rng rng(2);
    const DenseMatrix w = uniform_matrix(rng, 4, 2, 0.1, 1.0);
    const DenseMatrix h = uniform_matrix(rng, 2, 5, 0.1, 1.0);
    const FactorPair same = mu_step(matmul(w, h), w, h);
    CHECK(oracle::max_abs_diff(same.w, w) < 1e-14);
    CHECK(oracle::max_abs_diff(same.h, h) < 1e-14);

    // w′ = 1·(4/2·2)/2 = 2, then h′ = 2·(2·4/(2·2))/2 = 2.
    const FactorPair s = mu_step(DenseMatrix::from_rows({{4}}), DenseMatrix::from_rows({{1}}),
                                 DenseMatrix::from_rows({{2}}));
    CHECK(s.w(0, 0) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(s.h(0, 0) == doctest::Approx(2.0).epsilon(1e-15));

    const DenseMatrix x = uniform_matrix(rng, 8, 10, 0.0, 1.0);
    FactorPair f = seed_factors(rng, 8, 10, 3);
    for (int t = 0; t < 50; ++t) {
        const FactorPair next = mu_step(x, f.w, f.h);
        CHECK(kl_divergence(x, next.w, next.h) <= kl_divergence(x, f.w, f.h) + 1e-10);
        f = next;
    }
}

TEST_CASE("run_nmf: base case, validation and recovery") {
    Rng rng(3);
    const DenseMatrix x = uniform_matrix(rng, 6, 7, 0.0, 1.0);
    const FactorPair init = seed_factors(rng, 6, 7, 2);
    const NmfModel one = run(x, init, 1);
    const FactorPair step = mu_step(x, init.w, init.h);
    CHECK(one.w == step.w);
    CHECK(one.h == step.h);
    CHECK(one.iterations_run == 1);
    CHECK(one.rank == 2);

    NmfConfig zero;
    zero.max_iterations = 0;
    CHECK_THROWS_AS(run_nmf(x, init.w, init.h, zero), PreconditionError);
    DenseMatrix bad = init.w;
    bad(0, 0) = 0.0;
    CHECK_THROWS_AS(run(x, FactorPair{bad, init.h}, 5), PreconditionError);
    DenseMatrix neg = x;
    neg(1, 1) = -0.5;
    CHECK_THROWS_AS(run(neg, init, 5), PreconditionError);

    const DenseMatrix u = uniform_matrix(rng, 9, 1, 0.1, 1.0);
    const DenseMatrix v = uniform_matrix(rng, 1, 11, 0.1, 1.0);
    const DenseMatrix r1 = matmul(u, v);
    const NmfModel m = run(r1, seed_factors(rng, 9, 11, 1), 2000);
    CHECK(reconstruction_error(r1, m).relative < 1e-6);
}

TEST_CASE("KL divergence never increases over 1000 updates") {
    Rng rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t m = 2 + rng.next_u64() % 29;
        const std::size_t n = 2 + rng.next_u64() % 29;
        const std::size_t k = 1 + rng.next_u64() % 5;
        const DenseMatrix x = uniform_matrix(rng, m, n, 0.0, 1.0);
        FactorPair f = seed_factors(rng, m, n, k);
        double prev = kl_divergence(x, f.w, f.h);
        bool monotone = true, non_negative = true;
        for (int t = 0; t < 1000; ++t) {
            f = mu_step(x, f.w, f.h);
            const double cur = kl_divergence(x, f.w, f.h);
            monotone = monotone && cur <= prev + 1e-10 * std::abs(prev);
            non_negative = non_negative && min_entry(f.w) >= 0.0 && min_entry(f.h) >= 0.0;
            prev = cur;
        }
        CHECK(monotone);
        CHECK(non_negative);
    }
}

TEST_CASE("divergence history is recorded and non-increasing") {
    Rng rng(5);
    const DenseMatrix x = uniform_matrix(rng, 10, 8, 0.0, 1.0);
    NmfConfig cfg;
    cfg.max_iterations = 95;
    cfg.record_every = 10;
    const FactorPair init = seed_factors(rng, 10, 8, 3);
    const NmfModel model = run_nmf(x, init.w, init.h, cfg);
    REQUIRE(model.divergence_history.size() == model.history_iterations.size());
    CHECK(model.history_iterations.front() == 0);
    CHECK(model.history_iterations.back() == 95);
    for (std::size_t i = 1; i < model.divergence_history.size(); ++i)
        CHECK(model.divergence_history[i] <=
              model.divergence_history[i - 1] * (1.0 + 1e-10));
}

TEST_CASE("early stop reaches a fixed point") {
    Rng rng(6);
    for (int trial = 0; trial < 3; ++trial) {
        const DenseMatrix x = uniform_matrix(rng, 8, 9, 0.0, 1.0);
        const NmfModel model = run(x, seed_factors(rng, 8, 9, 2), 1000000, 1e-10);
        CHECK(model.iterations_run < 1000000);
        CHECK(fixed_point_residual(x, model.w, model.h) < 1e-8);
    }
}

TEST_CASE("diagonal rescaling reconstructs identically") {
    Rng rng(7);
    const DenseMatrix w = uniform_matrix(rng, 6, 3, 0.1, 1.0);
    const DenseMatrix h = uniform_matrix(rng, 3, 7, 0.1, 1.0);
    DenseMatrix wd = w, dh = h;
    for (std::size_t p = 0; p < 3; ++p) {
        const double d = rng.uniform(0.1, 10.0);
        for (std::size_t i = 0; i < 6; ++i) wd(i, p) *= d;
        for (std::size_t j = 0; j < 7; ++j) dh(p, j) /= d;
    }
    CHECK(frobenius_norm(matmul(w, h) - matmul(wd, dh)) < 1e-10);
}

TEST_CASE("seed_factors") {
    Rng a(8), b(8);
    const FactorPair fa = seed_factors(a, 12, 15, 4);
    const FactorPair fb = seed_factors(b, 12, 15, 4);
    CHECK(fa.w == fb.w);
    CHECK(fa.h == fb.h);
    CHECK(fa.w.rows() == 12);
    CHECK(fa.h.cols() == 15);

    for (std::uint64_t s = 0; s < 100; ++s) {
        Rng r(s);
        const FactorPair f = seed_factors(r, 5, 6, 2);
        CHECK(min_entry(f.w) > 0.0);
        CHECK(min_entry(f.h) > 0.0);
        CHECK(max_entry(f.w) <= 1.0);
    }

    Rng c(9);
    const FactorPair fc = seed_factors(c, 12, 15, 4);
    std::size_t differ = 0;
    for (std::size_t i = 0; i < fa.w.size(); ++i) differ += fa.w.values()[i] != fc.w.values()[i];
    for (std::size_t i = 0; i < fa.h.size(); ++i) differ += fa.h.values()[i] != fc.h.values()[i];
    CHECK(differ >= 0.99 * static_cast<double>(fa.w.size() + fa.h.size()));
    CHECK_THROWS_AS(seed_factors(c, 3, 3, 0), PreconditionError);
}

TEST_CASE("reconstruction_error") {
    Rng rng(10);
    const DenseMatrix w = uniform_matrix(rng, 5, 2, 0.1, 1.0);
    const DenseMatrix h = uniform_matrix(rng, 2, 4, 0.1, 1.0);
    const DenseMatrix wh = oracle::naive_matmul(w, h);
    CHECK(reconstruction_error(wh, w, h).absolute < 1e-14);

    const DenseMatrix e = uniform_matrix(rng, 5, 4, 0.0, 0.1);
    const DenseMatrix x = wh + e;
    const ReconstructionError r = reconstruction_error(x, w, h);
    CHECK(r.absolute == doctest::Approx(std::sqrt(oracle::sum_squares(e))).epsilon(1e-12));
    CHECK(r.relative == doctest::Approx(r.absolute / std::sqrt(oracle::sum_squares(x))).epsilon(1e-12));
    CHECK(reconstruction_error(DenseMatrix(5, 4), DenseMatrix(5, 2), DenseMatrix(2, 4)).relative == 0.0);
}

TEST_CASE("synthetic data is recovered at T = 10000") {
    const DatasetBundle data = gen_synthetic(SyntheticSpec{});
    Rng rng(0);
    const NmfModel model = run(data.x, seed_factors(rng, 100, 200, 3), 10000);
    CHECK(reconstruction_error(data.x, model).relative < 0.05);
}

}  // TEST_SUITE

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "cmlp/mlp.hpp"
#include "oracles/oracles.hpp"

using namespace cmlp;

namespace {

Matrix random_matrix(Rng& rng, std::size_t n, std::size_t d) {
    Matrix m(n, d);
    for (double& v : m.values()) v = rng.normal();
    return m;
}

double max_relative_error(const std::vector<double>& a, const std::vector<double>& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        worst = std::max(worst, std::abs(a[i] - b[i]) / std::max(1.0, std::max(std::abs(a[i]), std::abs(b[i]))));
    return worst;
}

Dataset make_dataset(const Matrix& x, std::vector<double> y) {
    Dataset ds;
    ds.features = x;
    ds.targets = std::move(y);
    for (std::size_t j = 0; j < x.cols(); ++j) ds.feature_names.push_back("x" + std::to_string(j));
    for (std::size_t i = 0; i < x.rows(); ++i) ds.row_ids.push_back(std::to_string(i));
    return ds;
}

} // namespace

TEST(InitModel, ShapesBoundsAndDeterminism) {
    const NetworkSpec spec{18, 9};
    const auto m = init_model(spec, 4);
    EXPECT_EQ(m.w1.size(), 9u * 18u);
    EXPECT_EQ(m.w2.size(), 9u);
    EXPECT_EQ(m.b1, std::vector<double>(9, 0.0));
    EXPECT_EQ(m.b2, 0.0);
    const double bound = std::sqrt(6.0 / (18 + 9));
    for (double w : m.w1) EXPECT_LE(std::abs(w), bound);
    EXPECT_EQ(init_model(spec, 4), m);
    EXPECT_NE(init_model(spec, 5), m);
    EXPECT_EQ(spec.to_string(), "18:9:1");
}

TEST(Forward, ZeroWeightsReturnOutputBias) {
    MlpModel m = init_model({3, 4}, 1);
    std::fill(m.w1.begin(), m.w1.end(), 0.0);
    std::fill(m.w2.begin(), m.w2.end(), 0.0);
    m.b2 = -2.5;
    const double x[] = {1.0, -7.0, 100.0};
    EXPECT_EQ(forward(m, x), -2.5);
}

TEST(Forward, HandSizedNetwork) {
    MlpModel m = init_model({2, 2}, 1);
    std::fill(m.w1.begin(), m.w1.end(), 0.5);
    std::fill(m.w2.begin(), m.w2.end(), 0.5);
    const double x[] = {1.0, 1.0};
    // 0.5 * (tanh(1) + tanh(1)) = tanh(1)
    EXPECT_NEAR(forward(m, x), 0.7615941559557649, 1e-15);
}

TEST(Forward, ContinuousAndChecksWidth) {
    Rng rng(3);
    const auto m = init_model({4, 6}, 2);
    std::vector<double> x(4), xp(4);
    for (double& v : x) v = rng.normal();
    for (std::size_t j = 0; j < 4; ++j) xp[j] = x[j] + 1e-6;
    EXPECT_LT(std::abs(forward(m, x) - forward(m, xp)), 1e-4);
    const double short_x[] = {1.0};
    EXPECT_THROW(forward(m, short_x), DataError);
}

TEST(Params, FlattenRoundTrip) {
    const auto m = init_model({5, 3}, 9);
    MlpModel copy = init_model({5, 3}, 10);
    copy.unflatten(m.flatten());
    EXPECT_EQ(copy.flatten(), m.flatten());
    EXPECT_EQ(m.flatten().size(), m.spec.parameter_count());
    const std::vector<double> wrong(3);
    EXPECT_THROW(copy.unflatten(wrong), DataError);
}

TEST(LossGradient, PerfectFitHasZeroLossAndGradient) {
    Rng rng(4);
    const auto m = init_model({3, 4}, 7);
    const auto xs = random_matrix(rng, 6, 3);
    std::vector<double> ys;
    for (std::size_t i = 0; i < 6; ++i) ys.push_back(forward(m, xs.row(i)));
    std::vector<double> g;
    EXPECT_NEAR(loss_and_gradient(m, xs, ys, g), 0.0, 1e-30);
    for (double v : g) EXPECT_NEAR(v, 0.0, 1e-15);
}

TEST(LossGradient, MatchesCentralDifferences) {
    Rng rng(5);
    const NetworkSpec spec{3, 4};
    auto m = init_model(spec, 11);
    for (double& v : m.b1) v = rng.normal(0.0, 0.3);
    m.b2 = 0.2;
    const auto xs = random_matrix(rng, 5, 3);
    std::vector<double> ys(5);
    for (double& y : ys) y = rng.normal();
    std::vector<double> g;
    loss_and_gradient(m, xs, ys, g);
    const auto fd = oracle::central_difference(
        [&](const std::vector<double>& p) {
            std::vector<double> scratch(p.size());
            return loss_and_gradient(spec, p, xs, ys, scratch);
        },
        m.flatten(), 1e-6);
    EXPECT_LT(max_relative_error(g, fd), 1e-5);
}

TEST(LossGradient, RandomModelsAndBatches) {
    Rng rng(6);
    for (int trial = 0; trial < 50; ++trial) {
        const NetworkSpec spec{1 + rng.index(8), 1 + rng.index(8)};
        auto m = init_model(spec, rng.next());
        for (double& v : m.b1) v = rng.normal(0.0, 0.5);
        m.b2 = rng.normal();
        const std::size_t n = 1 + rng.index(16);
        const auto xs = random_matrix(rng, n, spec.input_width);
        std::vector<double> ys(n);
        for (double& y : ys) y = rng.normal();
        std::vector<double> g;
        loss_and_gradient(m, xs, ys, g);
        const auto fd = oracle::central_difference(
            [&](const std::vector<double>& p) {
                std::vector<double> scratch(p.size());
                return loss_and_gradient(spec, p, xs, ys, scratch);
            },
            m.flatten(), 1e-6);
        EXPECT_LT(max_relative_error(g, fd), 1e-5) << "trial " << trial;
    }
}

TEST(LossGradient, DuplicatedSamplesLeaveLossUnchanged) {
    Rng rng(7);
    const auto m = init_model({2, 3}, 1);
    const auto xs = random_matrix(rng, 4, 2);
    std::vector<double> ys = {0.1, -0.3, 0.7, 1.2};
    Matrix xx = xs;
    for (std::size_t i = 0; i < 4; ++i) xx.append_row(xs.row(i));
    std::vector<double> yy = ys;
    yy.insert(yy.end(), ys.begin(), ys.end());
    std::vector<double> g1, g2;
    const double l1 = loss_and_gradient(m, xs, ys, g1);
    const double l2 = loss_and_gradient(m, xx, yy, g2);
    EXPECT_NEAR(l1, l2, 1e-15);
    for (std::size_t i = 0; i < g1.size(); ++i) EXPECT_NEAR(g1[i], g2[i], 1e-15);
}

TEST(LossGradient, ShapeMismatch) {
    const auto m = init_model({2, 3}, 1);
    const Matrix xs(3, 4);
    std::vector<double> g;
    EXPECT_THROW(loss_and_gradient(m, xs, std::vector<double>(3), g), DataError);
}

// --- L-BFGS -----------------------------------------------------------------

namespace {

double rosenbrock(std::span<const double> x, std::span<double> g) {
    const double a = 1.0 - x[0];
    const double b = x[1] - x[0] * x[0];
    g[0] = -2.0 * a - 400.0 * x[0] * b;
    g[1] = 200.0 * b;
    return a * a + 100.0 * b * b;
}

} // namespace

TEST(Lbfgs, IdentityQuadratic) {
    auto f = [](std::span<const double> x, std::span<double> g) {
        g[0] = x[0];
        g[1] = x[1];
        return 0.5 * (x[0] * x[0] + x[1] * x[1]);
    };
    const auto r = lbfgs_minimize(f, {3.0, -4.0}, {.grad_tol = 1e-10});
    EXPECT_TRUE(r.converged);
    EXPECT_LE(r.iterations, 3u);
    EXPECT_NEAR(r.x[0], 0.0, 1e-8);
    EXPECT_NEAR(r.x[1], 0.0, 1e-8);
}

TEST(Lbfgs, Rosenbrock) {
    const auto r = lbfgs_minimize(rosenbrock, {-1.2, 1.0}, {.max_iter = 200, .grad_tol = 1e-6});
    EXPECT_TRUE(r.converged);
    EXPECT_NEAR(r.x[0], 1.0, 1e-6);
    EXPECT_NEAR(r.x[1], 1.0, 1e-6);
    for (std::size_t i = 1; i < r.value_history.size(); ++i) EXPECT_LE(r.value_history[i], r.value_history[i - 1]);
}

TEST(Lbfgs, StartingAtMinimumDoesNothing) {
    const auto r = lbfgs_minimize(rosenbrock, {1.0, 1.0}, {});
    EXPECT_TRUE(r.converged);
    EXPECT_EQ(r.iterations, 0u);
    EXPECT_EQ(r.x, (std::vector<double>{1.0, 1.0}));
}

TEST(Lbfgs, FullMemoryConvexQuadraticConvergesWithinDimensionPlusTwo) {
    for (std::size_t dim : {5u, 20u, 50u}) {
        Rng rng(dim);
        // A = Q diag(lambda) Q' with a random orthogonal Q (Gram-Schmidt).
        std::vector<std::vector<double>> q(dim, std::vector<double>(dim));
        for (std::size_t i = 0; i < dim; ++i) {
            for (double& v : q[i]) v = rng.normal();
            for (std::size_t p = 0; p < i; ++p) {
                const double proj = std::inner_product(q[i].begin(), q[i].end(), q[p].begin(), 0.0);
                for (std::size_t j = 0; j < dim; ++j) q[i][j] -= proj * q[p][j];
            }
            const double nrm = std::sqrt(std::inner_product(q[i].begin(), q[i].end(), q[i].begin(), 0.0));
            for (double& v : q[i]) v /= nrm;
        }
        std::vector<double> a(dim * dim, 0.0);
        for (std::size_t e = 0; e < dim; ++e) {
            const double lambda = 1.0 + 9.0 * static_cast<double>(e) / static_cast<double>(dim);
            for (std::size_t i = 0; i < dim; ++i)
                for (std::size_t j = 0; j < dim; ++j) a[i * dim + j] += lambda * q[e][i] * q[e][j];
        }
        std::vector<double> b(dim), x0(dim);
        for (double& v : b) v = rng.normal();
        for (double& v : x0) v = rng.normal();
        auto f = [&](std::span<const double> x, std::span<double> g) {
            double val = 0.0;
            for (std::size_t i = 0; i < dim; ++i) {
                double ax = 0.0;
                for (std::size_t j = 0; j < dim; ++j) ax += a[i * dim + j] * x[j];
                g[i] = ax - b[i];
                val += 0.5 * x[i] * ax - b[i] * x[i];
            }
            return val;
        };
        const double tol_inf = 1e-8 / std::sqrt(static_cast<double>(dim));
        const auto r = lbfgs_minimize(f, x0, {.memory = dim, .max_iter = dim + 2, .grad_tol = tol_inf});
        EXPECT_LE(r.iterations, dim + 2);
        std::vector<double> g(dim);
        f(r.x, g);
        EXPECT_LT(std::sqrt(std::inner_product(g.begin(), g.end(), g.begin(), 0.0)), 1e-8) << "dim " << dim;
    }
}

TEST(Lbfgs, NonFiniteObjectiveIsReported) {
    auto f = [](std::span<const double> x, std::span<double> g) {
        g[0] = 1.0;
        return x[0] < -0.5 ? std::numeric_limits<double>::quiet_NaN() : x[0];
    };
    try {
        lbfgs_minimize(f, {0.0}, {});
        FAIL() << "expected NumericalError";
    } catch (const NumericalError& e) {
        EXPECT_NE(std::string(e.what()).find("iteration"), std::string::npos);
    }
}

TEST(Lbfgs, RejectsBadWolfeConstants) {
    auto f = [](std::span<const double> x, std::span<double> g) {
        g[0] = x[0];
        return 0.5 * x[0] * x[0];
    };
    EXPECT_THROW(lbfgs_minimize(f, {1.0}, {.c1 = 0.9, .c2 = 0.5}), ConfigError);
}

// --- training ---------------------------------------------------------------

TEST(Train, LinearTargetsAreFitClosely) {
    Rng rng(12);
    const auto xs = random_matrix(rng, 200, 3);
    std::vector<double> ys;
    for (std::size_t i = 0; i < 200; ++i) ys.push_back(2.0 * xs(i, 0) - xs(i, 1) + 0.5 * xs(i, 2) + 3.0);
    const auto ds = make_dataset(xs, ys);
    const auto tm = train({3, 4}, ds, {});
    // final_loss is half the mean squared error in normalized target units
    EXPECT_LT(std::sqrt(2.0 * tm.report.final_loss), 0.02);
    EXPECT_LE(tm.report.final_loss, tm.report.initial_loss);
}

TEST(Train, SingleSampleIsInterpolated) {
    const double row[] = {4.0, -1.0};
    Matrix xs;
    xs.append_row(row);
    const auto ds = make_dataset(xs, {2.5});
    const auto tm = train({2, 3}, ds, {});
    EXPECT_LT(tm.report.final_loss, 1e-10);
    EXPECT_NEAR(predict(tm.model, ds)[0], 2.5, 1e-5);
}

TEST(Train, DeterministicAndKeepsBestRestart) {
    Rng rng(13);
    const auto xs = random_matrix(rng, 40, 2);
    std::vector<double> ys;
    for (std::size_t i = 0; i < 40; ++i) ys.push_back(std::sin(xs(i, 0)) * xs(i, 1));
    const auto ds = make_dataset(xs, ys);
    TrainConfig cfg{.max_iter = 200, .init_scale_seed = 3, .restarts = 3};
    const auto a = train({2, 5}, ds, cfg);
    const auto b = train({2, 5}, ds, cfg);
    EXPECT_EQ(a.model, b.model);
    for (std::size_t r = 0; r < 3; ++r) {
        TrainConfig single = cfg;
        single.restarts = 1;
        single.init_scale_seed = restart_seed(cfg.init_scale_seed, r);
        EXPECT_LE(a.report.final_loss, train({2, 5}, ds, single).report.final_loss);
    }
}

TEST(Train, LossNeverRisesAboveInitial) {
    Rng rng(14);
    for (int trial = 0; trial < 10; ++trial) {
        const auto xs = random_matrix(rng, 30, 3);
        std::vector<double> ys(30);
        for (double& y : ys) y = rng.normal();
        const auto tm = train({3, 1 + rng.index(6)}, make_dataset(xs, ys), {.max_iter = 50, .init_scale_seed = rng.next()});
        EXPECT_LE(tm.report.final_loss, tm.report.initial_loss);
    }
}

TEST(Predict, IdentityNormMatchesForwardAndIsRowWise) {
    Rng rng(15);
    const auto m = init_model({3, 4}, 8);
    const auto xs = random_matrix(rng, 10, 3);
    const auto ds = make_dataset(xs, std::vector<double>(10, 0.0));
    const auto p = predict(m, ds);
    for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(p[i], forward(m, xs.row(i)));

    std::vector<std::size_t> perm(10);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::reverse(perm.begin(), perm.end());
    const auto q = predict(m, ds.subset(perm));
    for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(q[i], p[perm[i]]);

    EXPECT_THROW(predict(m, make_dataset(Matrix(2, 2), {0.0, 0.0})), DataError);
}

// --- serialization ----------------------------------------------------------

TEST(ModelFile, RoundTripIsBitIdentical) {
    Rng rng(16);
    const auto xs = random_matrix(rng, 30, 3);
    std::vector<double> ys(30);
    for (double& y : ys) y = rng.normal(5.0, 2.0);
    const auto ds = make_dataset(xs, ys);
    const auto tm = train({3, 4}, ds, {.max_iter = 50});
    std::stringstream buf;
    save_model(buf, tm.model);
    const auto text = buf.str();
    const auto back = load_model(buf);
    EXPECT_EQ(back, tm.model);
    EXPECT_EQ(predict(back, ds), predict(tm.model, ds));
    std::stringstream again;
    save_model(again, back);
    EXPECT_EQ(again.str(), text);
}

TEST(ModelFile, RejectsMalformedInput) {
    std::stringstream bad_version("cmlp-model 2\n");
    EXPECT_THROW(load_model(bad_version), DataError);
    std::stringstream truncated("cmlp-model 1\nspec 2 1 1\nw1 0.5\n");
    EXPECT_THROW(load_model(truncated), DataError);
}

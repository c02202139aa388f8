#include <gtest/gtest.h>

#include <random>

#include <dstab/pipeline.hpp>

using namespace dstab;

namespace {

PipelineConfig load(const std::string& file, std::uint64_t seed = 1) {
    auto raw = io::read_json(std::string(DSTAB_CONFIGS) + "/" + file);
    raw["experiment"]["seed"] = seed;
    return PipelineConfig::from_json(raw);
}

struct Run {
    PipelineConfig cfg;
    DataMatrices data;
    SynthesisOutcome outcome;
};

Run solve(const std::string& file, std::uint64_t seed = 1) {
    Run r{load(file, seed), {}, {}};
    r.data = pipeline::collect(r.cfg).data;
    r.outcome = synthesis::synthesize(pipeline::make_problem(r.cfg, r.data));
    return r;
}

// First feasible seed in 1..10.
Run first_feasible(const std::string& file) {
    for (std::uint64_t s = 1; s <= 10; ++s) {
        auto r = solve(file, s);
        if (r.outcome.feasible()) return r;
    }
    throw std::runtime_error("no feasible seed for " + file);
}

Vec uniform_in(const Vec& lo, const Vec& hi, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Vec x(lo.size());
    for (Index j = 0; j < x.size(); ++j) x(j) = lo(j) + (hi(j) - lo(j)) * u(rng);
    return x;
}

Vec v2(double a, double b) {
    Vec x(2);
    x << a, b;
    return x;
}

} // namespace

TEST(Lyapunov, QuadraticFormExamples) {
    LyapunovFn V;
    V.P = {Mat::Identity(2, 2)};
    V.Pbar = V.P[0];
    EXPECT_EQ(lyap_eval(V, Vec(), v2(3, 4)), 25.0);
    EXPECT_EQ(lyap_eval(V, Vec(), v2(0, 0)), 0.0);

    const auto r = solve("ex2_poly.json");
    ASSERT_TRUE(r.outcome.feasible());
    const auto W = LyapunovFn::from_outcome(r.outcome);
    const auto& ann = r.cfg.annihilator;
    for (std::size_t i = 0; i < W.P.size(); ++i) {
        const Vec& v = ann.vertex_points[i];
        EXPECT_NEAR(lyap_eval(W, ann, v), v.dot(W.P[i] * v), 1e-10 * v.dot(W.P[i] * v));
        EXPECT_GE(linalg::min_eig(W.Pbar - W.P[i]), -1e-12);
    }
}

TEST(Bounds, NominalMatchesSimulatedStep) {
    for (const char* f : {"ex2_poly.json", "ex2_poly_uniform.json"}) {
        const auto r = solve(f);
        ASSERT_TRUE(r.outcome.feasible()) << f;
        const auto ctx = pipeline::bound_context(r.cfg, r.outcome, r.data);
        const auto V = LyapunovFn::from_outcome(r.outcome);
        const auto ctrl = analysis::make_controller(r.outcome, r.cfg.annihilator, r.cfg.basis);
        std::mt19937_64 rng(7);
        const auto& dom = r.cfg.annihilator.domain;
        for (int k = 0; k < 200; ++k) {
            const Vec x = uniform_in(dom.lo, dom.hi, rng);
            // noise-free data and a dictionary covering the plant: the data form is the plant step
            const Vec xp = r.cfg.plant.step(x, ctrl(x));
            const Mat Pp = V.at(V.uniform() ? Vec() : r.cfg.annihilator.alpha(xp));
            const Mat Px = V.at(V.uniform() ? Vec() : r.cfg.annihilator.alpha(x));
            const double want = xp.dot(Pp * xp) - x.dot(Px * x);
            EXPECT_NEAR(analysis::h_nominal(ctx, x), want, 1e-10 * std::max(1.0, std::abs(want))) << f;
        }
    }
}

TEST(Bounds, RobustBoundDominatesRealizations) {
    const auto r = first_feasible("ex3_robust.json");
    const auto ctx = pipeline::bound_context(r.cfg, r.outcome, r.data);
    const auto& V = ctx.V;
    const auto dom = r.cfg.roa_domain();
    const auto [lo, hi] = pipeline::sample_box(r.cfg);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int compared = 0;
    for (int k = 0; k < 200; ++k) {
        const Vec x = uniform_in(lo, hi, rng);
        const double hb = analysis::h_robust(ctx, x);
        const Vec gz = ctx.GZ(x);
        for (int d = 0; d < 20; ++d) {
            const Mat D = synthesis::sample_admissible_D(ctx.Delta, r.data.T, rng);
            Vec e(2);
            e << g(rng), g(rng);
            e *= ctx.epsbar * u(rng) / e.norm();
            const Vec xp = (ctx.X1 - D) * gz + e;
            if (!dom.contains(xp)) continue;
            ++compared;
            const double diff = xp.dot(V.at(r.cfg.annihilator.alpha(xp)) * xp) - ctx.V_at(x);
            EXPECT_GE(hb - diff, -1e-9);
        }
    }
    EXPECT_GT(compared, 1000);
}

TEST(Bounds, RobustWithoutUncertaintyUsesPbar) {
    const auto r = first_feasible("ex3_robust.json");
    auto ctx = pipeline::bound_context(r.cfg, r.outcome, r.data);
    ctx.epsbar = 0.0;
    ctx.Delta = Mat::Zero(2, 2);
    std::mt19937_64 rng(5);
    const auto [lo, hi] = pipeline::sample_box(r.cfg);
    for (int k = 0; k < 50; ++k) {
        const Vec x = uniform_in(lo, hi, rng);
        const Vec y = ctx.data_step(x);
        EXPECT_NEAR(analysis::h_robust(ctx, x), y.dot(ctx.V.Pbar * y) - ctx.V_at(x), 1e-12 * std::max(1.0, ctx.V_at(x)));
    }
    ctx.epsbar = 0.01;
    EXPECT_NEAR(analysis::h_robust(ctx, v2(0, 0)), 1e-4 * linalg::norm2(ctx.V.Pbar), 1e-15);
}

TEST(Bounds, InputAffineWithoutMismatch) {
    const auto r = solve("ex4_input_affine.json");
    ASSERT_TRUE(r.outcome.feasible());
    auto ctx = pipeline::bound_context(r.cfg, r.outcome, r.data);
    const Mat W = ctx.W_vertices.front();
    ctx.W_vertices.assign(ctx.W_vertices.size(), W);
    ctx.W0bar = W * ctx.U0;
    std::mt19937_64 rng(9);
    const auto [lo, hi] = pipeline::sample_box(r.cfg);
    for (int k = 0; k < 50; ++k) {
        const Vec x = uniform_in(lo, hi, rng);
        EXPECT_EQ(analysis::input_mismatch(ctx, x).cwiseAbs().maxCoeff(), 0.0);
        const Vec y = ctx.data_step(x);
        EXPECT_NEAR(analysis::h_input_affine(ctx, x), 2.0 * y.dot(ctx.V.Pbar * y) - ctx.V_at(x), 1e-12 * std::max(1.0, ctx.V_at(x)));
    }
}

TEST(Bounds, ExactlyZeroAtTheOrigin) {
    const Vec z = Vec::Zero(2);
    for (const char* f : {"ex2_poly.json", "ex3_robust.json", "ex4_input_affine.json"}) {
        const auto r = first_feasible(f);
        auto ctx = pipeline::bound_context(r.cfg, r.outcome, r.data);
        ctx.epsbar = 0.0;
        EXPECT_EQ(ctx.V_at(z), 0.0) << f;
        EXPECT_EQ(analysis::h_nominal(ctx, z), 0.0) << f;
        EXPECT_EQ(analysis::h_robust(ctx, z), 0.0) << f;
        if (r.cfg.mode == SynthMode::InputAffine) EXPECT_EQ(analysis::h_input_affine(ctx, z), 0.0);
        const Vec u = synthesis::gain_eval(r.outcome, r.cfg.annihilator, r.cfg.basis, z).u;
        EXPECT_EQ(u.cwiseAbs().maxCoeff(), 0.0) << f;
    }
}

TEST(Roa, SublevelMaskRespectsTheBound) {
    const auto r = solve("ex2_poly.json");
    ASSERT_TRUE(r.outcome.feasible());
    const auto ctx = pipeline::bound_context(r.cfg, r.outcome, r.data);
    const auto est = pipeline::roa(r.cfg, ctx, 4);
    ASSERT_FALSE(est.empty);
    EXPECT_GT(est.c_max, 0.0);
    EXPECT_GT(est.area, 0.0);
    EXPECT_DOUBLE_EQ(est.area, static_cast<double>(est.cells) * est.grid.cell_volume());
    std::size_t cells = 0;
    for (std::size_t i = 0; i < est.mask.size(); ++i) {
        if (!est.mask[i]) continue;
        ++cells;
        const Vec x = est.grid.point(i);
        EXPECT_LE(est.V[i], est.c_max);
        EXPECT_TRUE(est.inside[i]);
        EXPECT_FALSE(est.grid.on_boundary(i));
        EXPECT_TRUE(est.bound[i] < 0.0 || est.grid.is_origin_cell(x));
    }
    EXPECT_EQ(cells, est.cells);
    // same estimate regardless of thread count
    const auto one = pipeline::roa(r.cfg, ctx, 1);
    EXPECT_EQ(one.mask, est.mask);
    EXPECT_EQ(one.c_max, est.c_max);
}

TEST(Roa, OnlyTheDomainBindsForAContraction) {
    // hand-built context: V = |x|^2, G Z(x) = x / 2, so h = -3/4 |x|^2 < 0 off the origin
    SynthesisOutcome o;
    o.status = lmi::Status::Feasible;
    o.n = 2;
    o.S = 2;
    o.T = 2;
    o.N = 1;
    o.m = 1;
    o.Q = {Mat::Identity(2, 2)};
    o.G = {0.5 * Mat::Identity(2, 2)};
    DataMatrices d;
    d.X1 = Mat::Identity(2, 2);
    d.U0 = Mat::Zero(1, 2);
    const auto ann = embedding::constant_decomposition(2, Mat::Zero(0, 2), BoxDomain::symmetric(Vec::Constant(2, 1.0)));
    const BoundContext ctx(o, ann, basis::from_terms(2, {"x1", "x2"}), d);
    const analysis::Grid grid(Vec::Constant(2, -2.0), Vec::Constant(2, 2.0), {41, 41});
    const auto est = analysis::roa_sublevel(ctx, BoundKind::Nominal, grid, ann.domain);
    // smallest V outside the unit box on the grid: (1.1, 0) -> 1.21, less one quantum
    EXPECT_NEAR(est.binding_V, 1.21, 1e-12);
    EXPECT_NEAR(est.c_max, 1.21 - est.quantum, 1e-12);
    EXPECT_GT(est.quantum, 0.0);
    for (std::size_t i = 0; i < est.mask.size(); ++i)
        if (est.mask[i]) EXPECT_TRUE(ann.domain.contains(grid.point(i)));
}

TEST(MonteCarlo, DeadbeatPlantConvergesEverywhere) {
    const auto plant = systems::linear(Mat::Zero(2, 2), Mat::Zero(2, 1));
    const analysis::Controller zero = [](const Vec&) { return Vec::Zero(1); };
    analysis::McOptions opt;
    opt.samples = 400;
    const auto r = analysis::roa_monte_carlo(plant, zero, v2(-1, -2), v2(1, 2), opt);
    EXPECT_EQ(r.samples, 400);
    EXPECT_EQ(r.converged_count, 400u);
    EXPECT_DOUBLE_EQ(r.area, 8.0);
}

TEST(MonteCarlo, UnstablePlantNeverConverges) {
    const auto plant = systems::linear(2.0 * Mat::Identity(2, 2), Mat::Zero(2, 1));
    const analysis::Controller zero = [](const Vec&) { return Vec::Zero(1); };
    analysis::McOptions opt;
    opt.samples = 100;
    const auto r = analysis::roa_monte_carlo(plant, zero, v2(0.5, 0.5), v2(1, 1), opt);
    EXPECT_EQ(r.converged_count, 0u);
    EXPECT_EQ(r.area, 0.0);
    EXPECT_TRUE(r.empty());
}

TEST(MonteCarlo, RandomModeIsSeedReproducible) {
    const auto plant = systems::linear(0.5 * Mat::Identity(2, 2), Mat::Zero(2, 1));
    const analysis::Controller zero = [](const Vec&) { return Vec::Zero(1); };
    analysis::McOptions opt;
    opt.samples = 50;
    opt.mode = analysis::McRoaResult::Mode::Random;
    opt.seed = 42;
    const auto a = analysis::roa_monte_carlo(plant, zero, v2(-1, -1), v2(1, 1), opt);
    opt.threads = 4;
    const auto b = analysis::roa_monte_carlo(plant, zero, v2(-1, -1), v2(1, 1), opt);
    EXPECT_EQ(analysis::mc_csv(a), analysis::mc_csv(b));
    opt.seed = 43;
    const auto c = analysis::roa_monte_carlo(plant, zero, v2(-1, -1), v2(1, 1), opt);
    EXPECT_NE(analysis::mc_csv(a), analysis::mc_csv(c));
    EXPECT_DOUBLE_EQ(a.area, 4.0);
}

TEST(MonteCarlo, LooserThresholdConvergesMore) {
    const auto r = solve("ex2_poly.json");
    ASSERT_TRUE(r.outcome.feasible());
    const auto ctrl = analysis::make_controller(r.outcome, r.cfg.annihilator, r.cfg.basis);
    analysis::McOptions opt;
    opt.samples = 400;
    opt.horizon = 30;
    opt.threshold = 1e-6;
    const auto tight = analysis::roa_monte_carlo(r.cfg.plant, ctrl, v2(-3, -4), v2(3, 4), opt);
    opt.threshold = 1e-2;
    const auto loose = analysis::roa_monte_carlo(r.cfg.plant, ctrl, v2(-3, -4), v2(3, 4), opt);
    for (std::size_t i = 0; i < tight.converged.size(); ++i)
        if (tight.converged[i]) EXPECT_TRUE(loose.converged[i]);
    EXPECT_GE(loose.converged_count, tight.converged_count);
}

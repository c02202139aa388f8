#include <gtest/gtest.h>

#include <dstab/config.hpp>

using namespace dstab;

namespace {

io::json raw(const std::string& file) { return io::read_json(std::string(DSTAB_CONFIGS) + "/" + file); }

std::string error_of(const io::json& j) {
    try {
        PipelineConfig::from_json(j);
    } catch (const std::exception& e) {
        return e.what();
    }
    return "";
}

} // namespace

TEST(Config, ShippedConfigsParse) {
    for (const char* f : {"ex1_pendulum.json", "ex2_poly.json", "ex2_poly_uniform.json", "ex3_robust.json", "ex4_input_affine.json"}) {
        const auto c = PipelineConfig::from_json(raw(f));
        EXPECT_EQ(c.plant.n, 2) << f;
        EXPECT_EQ(c.annihilator.S, c.basis.S()) << f;
        EXPECT_EQ(c.hash.size(), 16u) << f;
    }
}

TEST(Config, ExampleSettings) {
    const auto e1 = PipelineConfig::from_json(raw("ex1_pendulum.json"));
    EXPECT_EQ(e1.T, 10);
    EXPECT_EQ(e1.delta, 0.5);
    EXPECT_EQ(e1.annihilator.N(), 2);
    EXPECT_TRUE(e1.annihilator.domain.is_global());

    const auto e2 = PipelineConfig::from_json(raw("ex2_poly.json"));
    EXPECT_EQ(e2.annihilator.N(), 4);
    EXPECT_EQ(e2.annihilator.domain.hi(1), 4.0);

    const auto e3 = PipelineConfig::from_json(raw("ex3_robust.json"));
    EXPECT_EQ(e3.mode, SynthMode::Robust);
    EXPECT_EQ(e3.bound, BoundKind::Robust);
    EXPECT_TRUE(e3.measured);
    EXPECT_EQ(e3.Delta, 1e-4 * Mat::Identity(2, 2));
    EXPECT_EQ(e3.annihilator.N(), 2);
    EXPECT_FALSE(e3.annihilator.domain.bounded(1));
    EXPECT_NEAR(e3.roa_domain().hi(0), 0.5, 0.0);

    const auto e4 = PipelineConfig::from_json(raw("ex4_input_affine.json"));
    EXPECT_EQ(e4.mode, SynthMode::InputAffine);
    EXPECT_EQ(e4.objective, lmi::Objective::MaxLogDet);
    EXPECT_EQ(e4.solve_options.phase2_margin, 0.1);
    EXPECT_EQ(e4.W_vertices().size(), 2u);
}

TEST(Config, HashIgnoresKeyOrderButNotValues) {
    const auto j = raw("ex2_poly.json");
    const auto reordered = io::json::parse(j.dump());
    EXPECT_EQ(PipelineConfig::from_json(j).hash, PipelineConfig::from_json(reordered).hash);
    auto k = j;
    k["experiment"]["seed"] = 2;
    EXPECT_NE(PipelineConfig::from_json(j).hash, PipelineConfig::from_json(k).hash);
}

TEST(Config, SeedFlowsIntoMonteCarlo) {
    auto j = raw("ex2_poly.json");
    j["experiment"]["seed"] = 17;
    EXPECT_EQ(PipelineConfig::from_json(j).mc.seed, 17u);
}

TEST(Config, DeltaGridDefault) {
    auto j = raw("ex2_poly.json");
    j["synthesis"]["delta_grid"] = "default";
    const auto c = PipelineConfig::from_json(j);
    ASSERT_TRUE(c.delta_grid.has_value());
    EXPECT_EQ(c.delta_grid->size(), 12u);
    EXPECT_EQ(c.delta_grid->back(), 0.0);
}

TEST(Config, AnnihilatorWidthMismatchNamesS) {
    auto j = raw("ex1_pendulum.json");
    j["annihilator"]["L0"] = {{0, 0, -1, 0}};
    j["annihilator"]["L1"] = {{1, 0, 0, 0}};
    const auto msg = error_of(j);
    EXPECT_EQ(msg.rfind("dimension mismatch: annihilator expects S=4", 0), 0u) << msg;
}

TEST(Config, RejectsBadInput) {
    auto j = raw("ex2_poly.json");
    j["synthesis"]["mode"] = "sideways";
    EXPECT_NE(error_of(j).find("unknown synthesis mode"), std::string::npos);

    j = raw("ex2_poly.json");
    j["synthesis"]["objective"] = "volume";
    EXPECT_THROW(PipelineConfig::from_json(j), ConfigError);

    j = raw("ex2_poly.json");
    j.erase("experiment");
    EXPECT_THROW(PipelineConfig::from_json(j), ConfigError);

    j = raw("ex2_poly.json");
    j["experiment"]["input_box"] = {{"lo", 1}, {"hi", -1}};
    EXPECT_THROW(PipelineConfig::from_json(j), ConfigError);

    j = raw("ex2_poly.json");
    j["plant"] = {{"builtin", "cartpole"}};
    EXPECT_THROW(PipelineConfig::from_json(j), std::invalid_argument);

    j = raw("ex4_input_affine.json");
    j.erase("input_basis");
    EXPECT_THROW(PipelineConfig::from_json(j), ConfigError);

    j = raw("ex2_poly.json");
    j["annihilator"]["domain"] = {{"lo", {-3, -4, -1}}, {"hi", {3, 4, 1}}};
    EXPECT_THROW(PipelineConfig::from_json(j), DimensionError);

    j = raw("ex2_poly.json");
    j["analysis"]["bound"] = "h-magic";
    EXPECT_THROW(PipelineConfig::from_json(j), ConfigError);
}

TEST(Config, ExpressionPlant) {
    auto j = raw("ex2_poly.json");
    j["plant"] = {{"expressions", {"0.8*x2 + 0.2*x1^3", "-0.6*x1 + x2^2 - u1"}}};
    const auto c = PipelineConfig::from_json(j);
    const auto ref = systems::poly2();
    Vec x(2), u(1);
    x << 0.3, -0.7;
    u << 0.25;
    EXPECT_NEAR((c.plant.step(x, u) - ref.step(x, u)).norm(), 0.0, 1e-15);
}

#include <gtest/gtest.h>

#include <dstab/dataset.hpp>

using namespace dstab;

namespace {
Trajectory run(std::uint64_t seed, std::optional<NoiseSpec> noise = std::nullopt) {
    const auto p = systems::pendulum();
    return dataset::excite(p, 20, Vec::Constant(1, -0.2), Vec::Constant(1, 0.2), Vec::Constant(2, -0.2),
                           Vec::Constant(2, 0.2), seed, noise);
}
} // namespace

TEST(Dataset, TrajectoryFollowsThePlant) {
    const auto tr = run(3);
    const auto p = systems::pendulum();
    for (int k = 0; k < tr.T(); ++k) EXPECT_EQ(tr.X.col(k + 1), p.step(tr.X.col(k), tr.U.col(k)));
    EXPECT_LE(tr.U.cwiseAbs().maxCoeff(), 0.2);
    EXPECT_LE(tr.X.col(0).cwiseAbs().maxCoeff(), 0.2);
}

TEST(Dataset, SeedReproducible) {
    EXPECT_EQ(run(5).X, run(5).X);
    EXPECT_NE(run(5).X, run(6).X);
}

TEST(Dataset, NoiseStaysInTheBall) {
    const auto tr = run(4, NoiseSpec{0.001});
    ASSERT_TRUE(tr.Y.has_value());
    for (int k = 0; k <= tr.T(); ++k) EXPECT_LE((*tr.Y - tr.X).col(k).norm(), 0.001 + 1e-15);
    // noise draws come after inputs: the noiseless part is unchanged
    EXPECT_EQ(tr.X, run(4).X);
}

TEST(Dataset, AssembleBlocks) {
    const auto tr = run(2, NoiseSpec{0.001});
    const auto b = basis::from_terms(2, {"x1", "x2", "x1^2", "x1^3"});
    const auto d = dataset::assemble(tr, b, nullptr, true);
    EXPECT_EQ(d.Z0.rows(), 4);
    EXPECT_EQ(d.Z0.cols(), 20);
    for (int k = 0; k < d.T; ++k) {
        EXPECT_EQ(d.Z0.col(k), eval_basis(b, tr.Y->col(k)));
        EXPECT_EQ(d.X1.col(k), tr.Y->col(k + 1));
    }
    EXPECT_TRUE(dataset::rank_check(d.Z0).full_row_rank);
}

TEST(Dataset, InputDictionaryBlock) {
    const auto p = systems::affine2();
    const auto tr = dataset::excite(p, 10, Vec::Constant(1, -0.3), Vec::Constant(1, 0.3), Vec::Constant(2, -0.3),
                                    Vec::Constant(2, 0.3), 1);
    const auto w = InputBasisSpec::from_expressions(2, {{"1"}, {"x2"}});
    const auto d = dataset::assemble(tr, basis::from_terms(2, {"x1", "x2", "x2^2", "x2^3"}), &w);
    ASSERT_TRUE(d.W0bar.has_value());
    for (int k = 0; k < d.T; ++k) {
        EXPECT_DOUBLE_EQ((*d.W0bar)(0, k), tr.U(0, k));
        EXPECT_DOUBLE_EQ((*d.W0bar)(1, k), tr.X(1, k) * tr.U(0, k));
    }
}

TEST(Dataset, RankDeficiencyDetected) {
    Mat Z(3, 5);
    Z << 1, 2, 3, 4, 5, 2, 4, 6, 8, 10, 0, 1, 0, 1, 0;
    const auto r = dataset::rank_check(Z);
    EXPECT_EQ(r.rank, 2);
    EXPECT_FALSE(r.full_row_rank);
}

TEST(Dataset, DivergenceRaised) {
    const auto p = systems::from_expressions({"1e7*x1 + u1"});
    EXPECT_THROW(dataset::excite(p, 10, Vec::Constant(1, 0.5), Vec::Constant(1, 1.0), Vec::Constant(1, 0.5),
                                 Vec::Constant(1, 1.0), 1),
                 DivergenceError);
}

TEST(Dataset, CsvRoundTrip) {
    const auto tr = run(8, NoiseSpec{0.001});
    const auto back = dataset::trajectory_from_csv(dataset::trajectory_csv(tr));
    EXPECT_EQ(back.U, tr.U);
    EXPECT_EQ(back.X, tr.X);
    EXPECT_EQ(*back.Y, *tr.Y);
}

TEST(Dataset, JsonRoundTripIsBitExact) {
    const auto tr = run(9);
    const auto d = dataset::assemble(tr, basis::from_terms(2, {"x1", "x2", "x1^2", "x1^3"}));
    const auto e = dataset::data_from_json(dataset::data_to_json(d));
    EXPECT_EQ(e.Z0, d.Z0);
    EXPECT_EQ(e.X1, d.X1);
    EXPECT_EQ(e.U0, d.U0);
}

TEST(Dataset, UncertaintyBudget) {
    const Mat D = dataset::uncertainty_budget(2, 0.001, 0.0, dataset::BudgetMode::ScaledIdentity, {}, 1e-4);
    EXPECT_EQ(D, 1e-4 * Mat::Identity(2, 2));
    Mat bad(2, 2);
    bad << 1, 0, 0, -1;
    EXPECT_THROW(dataset::uncertainty_budget(2, 0.0, 0.0, dataset::BudgetMode::Direct, bad), std::invalid_argument);
}

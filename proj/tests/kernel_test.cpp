#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <limits>
#include <random>

#include "hyperchol/harness.hpp"
#include "hyperchol/kernel.hpp"
#include "test_util.hpp"

namespace hc = hyperchol;
using hc::sigma;

namespace {

// Expected IEEE binary64 results for the 2x2 worked example
// L = [[3,2],[.,3]], v = (4,2), update. Frozen from an independent replay of
// the scalar recurrences; the real-arithmetic values are 2.8, -0.4, sqrt(9.16).
constexpr double kL12 = 0x1.6666666666665p+1;  // 2.7999999999999994
constexpr double kV2 = -0x1.9999999999988p-2;  // -0.399999999999999
constexpr double kL22 = 0x1.8365f6bf92de2p+1;  // sqrt(9.16), exact rounding
constexpr double kC2 = 0x1.0243f9d50c941p+0;
constexpr double kS2 = -0x1.1111111111105p-3;

template <class T>
bool same_bits(const hc::TriFactor<T>& a, const hc::TriFactor<T>& b) {
  if (a.n() != b.n()) return false;
  return std::memcmp(a.data().data(), b.data().data(), a.data().size_bytes()) == 0;
}

}  // namespace

TEST(RotCompute, ZeroUpdateVector) {
  const auto r = hc::rot_compute(1.0, 0.0, sigma::update);
  EXPECT_EQ(r.c, 1.0);
  EXPECT_EQ(r.s, 0.0);
  EXPECT_EQ(r.w, 1.0);
}

TEST(RotCompute, ThreeFourFiveUpdate) {
  const auto r = hc::rot_compute(3.0, 4.0, sigma::update);
  EXPECT_EQ(r.w, 5.0);
  EXPECT_EQ(r.c, 5.0 / 3.0);
  EXPECT_EQ(r.s, 4.0 / 3.0);
  const auto f = hc::rot_compute(3.0f, 4.0f, sigma::update);
  EXPECT_EQ(f.w, 5.0f);
  EXPECT_EQ(f.c, 5.0f / 3.0f);
  EXPECT_EQ(f.s, 4.0f / 3.0f);
}

TEST(RotCompute, ThreeFourFiveDowndate) {
  const auto r = hc::rot_compute(5.0, 4.0, sigma::downdate);
  EXPECT_EQ(r.w, 3.0);
  EXPECT_EQ(r.c, 3.0 / 5.0);
  EXPECT_EQ(r.s, 4.0 / 5.0);
}

TEST(RotCompute, Failures) {
  try {
    hc::rot_compute(1.0, 2.0, sigma::downdate, 7, 3);
    FAIL() << "expected indefinite_downdate";
  } catch (const hc::indefinite_downdate& e) {
    EXPECT_EQ(e.row(), 7u);
    EXPECT_EQ(e.column(), 3u);
  }
  // Threshold is exact: L_ii^2 - V_i^2 == 0 already fails.
  EXPECT_THROW(hc::rot_compute(1.0, 1.0, sigma::downdate), hc::indefinite_downdate);
  EXPECT_NO_THROW(hc::rot_compute(1.0, std::nextafter(1.0, 0.0), sigma::downdate));
  EXPECT_THROW(hc::rot_compute(0.0, 1.0, sigma::update), hc::non_positive_pivot);
  EXPECT_THROW(hc::rot_compute(-2.0, 1.0, sigma::update), hc::non_positive_pivot);
}

TEST(RotApply, IdentityRotation) {
  for (const sigma sg : {sigma::update, sigma::downdate}) {
    const auto r = hc::rot_apply(1.0, 0.0, 0.3, -1.7, sg);
    EXPECT_EQ(r.l, 0.3);
    EXPECT_EQ(r.v, -1.7);
  }
}

TEST(RotApply, WorkedExampleUsesUpdatedL) {
  const auto r = hc::rot_apply(5.0 / 3.0, 4.0 / 3.0, 2.0, 2.0, sigma::update);
  EXPECT_EQ(r.l, kL12);
  EXPECT_EQ(r.v, kV2);
  EXPECT_NEAR(r.l, 2.8, 1e-15);
  EXPECT_NEAR(r.v, -0.4, 1e-14);
  // The old-L reading would give c*2 - s*2 = 2/3, not the Givens residual.
  EXPECT_GT(std::fabs(r.v - (5.0 / 3.0 * 2.0 - 4.0 / 3.0 * 2.0)), 1.0);
}

TEST(RotApply, DowndateInvertsUpdate) {
  // Row 0 of the 2x2 example updated by (4, 2), then downdated by (4, 2).
  const auto down = hc::rot_compute(5.0, 4.0, sigma::downdate);
  const auto r = hc::rot_apply(down.c, down.s, kL12, 2.0, sigma::downdate);
  EXPECT_LE(hc::testing::ulp_distance(r.l, 2.0), 8u);
  EXPECT_NEAR(r.v, -0.4, 1e-14);
}

TEST(RotApply, RotationAnnihilatesItsDefiningElement) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> pos(0.1, 10.0);
  std::uniform_real_distribution<double> any(-10.0, 10.0);
  const double eps = std::numeric_limits<double>::epsilon();
  for (int t = 0; t < 2000; ++t) {
    const double l = pos(rng);
    const sigma sg = t % 2 ? sigma::update : sigma::downdate;
    const double v = sg == sigma::update ? any(rng) : l * any(rng) / 10.5;
    const auto rot = hc::rot_compute(l, v, sg);
    const auto out = hc::rot_apply(rot.c, rot.s, l, v, sg);
    // Downdates amplify rounding by 1/c.
    const double scale = (l + std::fabs(v)) / std::min(rot.c, 1.0);
    EXPECT_LE(std::fabs(out.l - rot.w), 8 * eps * scale);
    EXPECT_LE(std::fabs(out.v), 8 * eps * scale * std::max(rot.c, std::fabs(rot.s)));
  }
}

TEST(ModifyA, ZeroVectorLeavesFactor) {
  hc::TriFactor<double> L(2);
  std::vector<double> v = {0.0, 0.0};
  hc::OpCounts counts;
  const auto rc = hc::modify_a(L, std::span<double>(v), sigma::update, counts);
  EXPECT_EQ(L, hc::TriFactor<double>(2));
  EXPECT_EQ(rc.c, (std::vector<double>{1.0, 1.0}));
  EXPECT_EQ(rc.s, (std::vector<double>{0.0, 0.0}));
}

TEST(ModifyAB, WorkedExample2x2) {
  for (int variant = 0; variant < 2; ++variant) {
    hc::TriFactor<double> L(2, {3.0, 2.0, 3.0});
    std::vector<double> v = {4.0, 2.0};
    hc::OpCounts counts;
    const auto rc = variant == 0
                        ? hc::modify_a(L, std::span<double>(v), sigma::update, counts)
                        : hc::modify_b(L, std::span<double>(v), sigma::update, counts);
    EXPECT_EQ(L(0, 0), 5.0);
    EXPECT_EQ(L(0, 1), kL12);
    EXPECT_EQ(L(1, 1), kL22);
    EXPECT_EQ(L(1, 1), std::sqrt(9.16));
    EXPECT_EQ(rc.c[0], 5.0 / 3.0);
    EXPECT_EQ(rc.s[0], 4.0 / 3.0);
    EXPECT_EQ(rc.c[1], kC2);
    EXPECT_EQ(rc.s[1], kS2);

    // Oracle: factor A + v v^T = [[25,14],[14,17]] from scratch.
    const auto ref = hc::chol_factor(hc::DenseMat<double>(2, 2, {25, 14, 14, 17}));
    EXPECT_LE(hc::max_abs_diff(L, ref), 4e-15);
  }
}

TEST(ModifyAB, CountersAndAccessTallies) {
  std::mt19937_64 rng(1);
  auto La = hc::testing::random_factor<double>(10, rng);
  auto Lb = La;
  auto v = hc::testing::random_update<double>(10, 1, rng);
  auto w = v;
  hc::OpCounts a, b;
  hc::modify_a(La, v.column(0), sigma::update, a);
  hc::modify_b(Lb, w.column(0), sigma::update, b);
  EXPECT_EQ(b.computes, 10u);
  EXPECT_EQ(b.applies, 45u);
  EXPECT_EQ(a.computes, 10u);
  EXPECT_EQ(a.applies, 45u);
  // Column order: 3 reads + 1 write per Apply; row order: 2 + 2.
  EXPECT_EQ(a.elem_reads, 3 * 45u + 2 * 10u);
  EXPECT_EQ(a.elem_writes, 45u + 4 * 10u);
  EXPECT_EQ(b.elem_reads, 2 * 45u + 2 * 10u);
  EXPECT_EQ(b.elem_writes, 2 * 45u + 3 * 10u);
}

TEST(ModifyAB, OrderingsAreBitwiseIdentical) {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> dim(1, 64);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = dim(rng);
    const auto L0 = hc::testing::random_factor<double>(n, rng);
    auto v0 = hc::testing::random_update<double>(n, 1, rng);
    auto La = L0, Lb = L0;
    auto va = v0, vb = v0;
    hc::OpCounts ca, cb;
    const auto ra = hc::modify_a(La, va.column(0), sigma::update, ca);
    const auto rb = hc::modify_b(Lb, vb.column(0), sigma::update, cb);
    ASSERT_TRUE(same_bits(La, Lb)) << "update t=" << t;
    ASSERT_EQ(ra, rb);
    ASSERT_EQ(va, vb);

    // Downdate the updated factor by the original vector (feasible).
    auto Da = La, Db = Lb;
    auto da = v0, db = v0;
    hc::modify_a(Da, da.column(0), sigma::downdate, ca);
    hc::modify_b(Db, db.column(0), sigma::downdate, cb);
    ASSERT_TRUE(same_bits(Da, Db)) << "downdate t=" << t;
    ASSERT_EQ(da, db);
  }
}

TEST(ModifyB, RoundTripNormwise) {
  hc::ExperimentConfig cfg;
  cfg.n = 32;
  cfg.k = 1;
  cfg.seed = 11;
  const auto inst = hc::gen_instance<double>(cfg);
  auto L = inst.L;
  auto v = inst.V;
  hc::OpCounts counts;
  hc::modify_b(L, v.column(0), sigma::update, counts);
  v = inst.V;
  hc::modify_b(L, v.column(0), sigma::downdate, counts);
  // Small entries of a row lose relative accuracy, so measure against the
  // row's largest magnitude.
  for (std::size_t i = 0; i < 32; ++i) {
    double row_max = 0.0;
    for (std::size_t j = i; j < 32; ++j) row_max = std::max(row_max, std::fabs(inst.L(i, j)));
    for (std::size_t j = i; j < 32; ++j)
      EXPECT_LE(std::fabs(L(i, j) - inst.L(i, j)),
                8 * std::numeric_limits<double>::epsilon() * row_max);
  }
}

TEST(ModifyAB, CoefficientRanges) {
  std::mt19937_64 rng(9);
  for (int t = 0; t < 50; ++t) {
    auto L = hc::testing::random_factor<double>(20, rng);
    auto v = hc::testing::random_update<double>(20, 1, rng);
    const auto v0 = v;
    hc::OpCounts counts;
    const auto up = hc::modify_b(L, v.column(0), sigma::update, counts);
    for (const double c : up.c) EXPECT_GE(c, 1.0);
    v = v0;
    const auto down = hc::modify_b(L, v.column(0), sigma::downdate, counts);
    for (const double c : down.c) {
      EXPECT_GT(c, 0.0);
      EXPECT_LE(c, 1.0);
    }
  }
}

TEST(ModifyAB, IndefiniteDowndatePartialState) {
  std::mt19937_64 rng(4);
  const std::size_t n = 12, p = 5;
  const auto L0 = hc::testing::random_factor<double>(n, rng);
  hc::UpdateMat<double> v(n, 1);
  for (std::size_t j = p; j < n; ++j) v(j, 0) = 1.01 * L0(p, j);

  auto Lb = L0;
  auto vb = v;
  hc::OpCounts counts;
  try {
    hc::modify_b(Lb, vb.column(0), sigma::downdate, counts);
    FAIL() << "expected indefinite_downdate";
  } catch (const hc::indefinite_downdate& e) {
    EXPECT_EQ(e.row(), p);
  }
  // Rows before p saw identity rotations, rows from p on are untouched.
  EXPECT_EQ(Lb, L0);

  auto La = L0;
  auto va = v;
  try {
    hc::modify_a(La, va.column(0), sigma::downdate, counts);
    FAIL() << "expected indefinite_downdate";
  } catch (const hc::indefinite_downdate& e) {
    EXPECT_EQ(e.row(), p);
  }
  EXPECT_EQ(La, L0);
}

TEST(ModifyRankK, RankOneMatchesModifyB) {
  std::mt19937_64 rng(12);
  auto L = hc::testing::random_factor<double>(30, rng);
  auto V = hc::testing::random_update<double>(30, 1, rng);
  auto Lb = L;
  auto vb = V;
  hc::OpCounts c1, c2;
  const auto rk = hc::modify_rank_k(L, V, sigma::update, c1);
  const auto rb = hc::modify_b(Lb, vb.column(0), sigma::update, c2);
  EXPECT_TRUE(same_bits(L, Lb));
  EXPECT_EQ(rk, rb);
  EXPECT_EQ(c1, c2);
  EXPECT_EQ(V, vb);
}

TEST(ModifyRankK, SequentialColumnsAndCounters) {
  std::mt19937_64 rng(13);
  auto L = hc::testing::random_factor<float>(40, rng);
  auto V = hc::testing::random_update<float>(40, 5, rng);
  auto Ls = L;
  auto Vs = V;
  hc::OpCounts c1, c2;
  const auto rk = hc::modify_rank_k(L, V, sigma::update, c1);
  for (std::size_t e = 0; e < 5; ++e) {
    const auto rb = hc::modify_b(Ls, Vs.column(e), sigma::update, c2);
    for (std::size_t i = 0; i < 40; ++i) {
      EXPECT_EQ(rk.c_at(i, e), rb.c[i]);
      EXPECT_EQ(rk.s_at(i, e), rb.s[i]);
    }
  }
  EXPECT_TRUE(same_bits(L, Ls));
  EXPECT_EQ(c1.computes, 5u * 40);
  EXPECT_EQ(c1.applies, 5u * 40 * 39 / 2);
}

TEST(ModifyRankK, ReconstructionAgainstDenseOracle) {
  hc::ExperimentConfig cfg;
  cfg.n = 64;
  cfg.k = 16;
  cfg.seed = 99;
  const auto inst = hc::gen_instance<double>(cfg);
  auto L = inst.L;
  auto V = inst.V;
  hc::OpCounts counts;
  hc::modify_rank_k(L, V, sigma::update, counts);
  double amax = 0.0;
  for (const double a : inst.target.data()) amax = std::max(amax, std::fabs(a));
  const long double resid = hc::testing::modify_residual(inst.L, inst.V, +1, L);
  EXPECT_LE(static_cast<double>(resid),
            64 * std::numeric_limits<double>::epsilon() * amax);
  EXPECT_LE(hc::max_abs_diff(inst.target, hc::tri_transpose_mul(L)),
            64 * std::numeric_limits<double>::epsilon() * amax);
}

TEST(ModifyRankK, UpdateThenDowndateRoundTrip) {
  hc::ExperimentConfig cfg;
  cfg.n = 64;
  cfg.k = 4;
  cfg.seed = 5;
  const auto inst = hc::gen_instance<double>(cfg);
  auto L = inst.L;
  auto V = inst.V;
  hc::OpCounts counts;
  hc::modify_rank_k(L, V, sigma::update, counts);
  V = inst.V;
  hc::modify_rank_k(L, V, sigma::downdate, counts);
  for (std::size_t i = 0; i < L.data().size(); ++i) {
    const double ref = inst.L.data()[i];
    EXPECT_LE(std::fabs(L.data()[i] - ref), 1e-12 * std::fabs(ref)) << i;
  }
}

TEST(ModifyRankK, FailureReportsColumnAndRow) {
  std::mt19937_64 rng(6);
  const std::size_t n = 10;
  auto L = hc::testing::random_factor<double>(n, rng);
  hc::UpdateMat<double> V(n, 3);
  for (std::size_t j = 4; j < n; ++j) V(j, 2) = 1.01 * L(4, j);
  hc::OpCounts counts;
  try {
    hc::modify_rank_k(L, V, sigma::downdate, counts);
    FAIL();
  } catch (const hc::indefinite_downdate& e) {
    EXPECT_EQ(e.column(), 2u);
    EXPECT_EQ(e.row(), 4u);
  }
}

TEST(ModifyRankK, DimensionMismatch) {
  hc::TriFactor<double> L(3);
  hc::UpdateMat<double> V(4, 1);
  hc::OpCounts counts;
  EXPECT_THROW(hc::modify_rank_k(L, V, sigma::update, counts), hc::dimension_error);
  std::vector<double> v(2);
  EXPECT_THROW(hc::modify_a(L, std::span<double>(v), sigma::update, counts),
               hc::dimension_error);
}

TEST(CholFactor, IdentityAndHandExample) {
  EXPECT_EQ(hc::chol_factor(hc::DenseMat<double>::identity(5)), hc::TriFactor<double>(5));
  const auto L = hc::chol_factor(hc::DenseMat<double>(2, 2, {9, 6, 6, 13}));
  EXPECT_EQ(L, hc::TriFactor<double>(2, {3.0, 2.0, 3.0}));
}

TEST(CholFactor, SelfConsistencyOnRandomSpd) {
  hc::ExperimentConfig cfg;
  cfg.n = 128;
  cfg.k = 1;
  cfg.seed = 1;
  const auto inst = hc::gen_instance<double>(cfg);
  double amax = 0.0;
  for (const double a : inst.A.data()) amax = std::max(amax, std::fabs(a));
  const auto C = hc::tri_transpose_mul(inst.L);
  EXPECT_LE(hc::max_abs_diff(C, inst.A),
            128 * std::numeric_limits<double>::epsilon() * amax);
  // A >= I, so every pivot stays at least 1 up to rounding.
  for (std::size_t i = 0; i < 128; ++i)
    EXPECT_GT(inst.L(i, i), 1.0 - 128 * std::numeric_limits<double>::epsilon());
}

TEST(CholFactor, Errors) {
  EXPECT_THROW(hc::chol_factor(hc::DenseMat<double>(2, 2, {1, 0.5, 0.4, 1})),
               hc::asymmetric_input);
  try {
    hc::chol_factor(hc::DenseMat<double>(3, 3, {1, 0, 0, 0, 1, 2, 0, 2, 1}));
    FAIL();
  } catch (const hc::not_positive_definite& e) {
    EXPECT_EQ(e.pivot(), 2u);
  }
  EXPECT_THROW(hc::chol_factor(hc::DenseMat<double>(2, 3)), hc::dimension_error);
}

#include <gtest/gtest.h>

#include <random>

#include "hyperchol/matrix.hpp"
#include "test_util.hpp"

namespace hc = hyperchol;

TEST(PackedIndex, MatchesRowMajorEnumeration) {
  for (std::size_t n = 1; n <= 16; ++n) {
    std::size_t next = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i; j < n; ++j)
        ASSERT_EQ(hc::packed_offset(n, i, j), next++) << "n=" << n;
    EXPECT_EQ(next, hc::packed_size(n));
  }
}

TEST(TriFactor, IdentityConstructor) {
  hc::TriFactor<double> L(4);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = i; j < 4; ++j) EXPECT_EQ(L(i, j), i == j ? 1.0 : 0.0);
  EXPECT_EQ(L.row(1).size(), 3u);
}

TEST(TriFactor, RejectsBadBuffer) {
  EXPECT_THROW(hc::TriFactor<double>(3, std::vector<double>(5, 1.0)),
               hc::dimension_error);
  EXPECT_THROW(hc::TriFactor<float>(2, {1.0f, 0.5f, 0.0f}), hc::non_positive_pivot);
  EXPECT_THROW(hc::TriFactor<double>(2, {-1.0, 0.5, 1.0}), hc::non_positive_pivot);
}

TEST(UpdateMat, RequiresAtLeastOneColumn) {
  EXPECT_THROW(hc::UpdateMat<double>(4, 0), hc::dimension_error);
  EXPECT_THROW(hc::UpdateMat<double>(2, 2, {1.0, 2.0, 3.0}), hc::dimension_error);
  hc::UpdateMat<double> V(3, 2, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(V(0, 1), 4.0);
  EXPECT_EQ(V.column(1)[2], 6.0);
}

TEST(DenseMat, RejectsBadBuffer) {
  EXPECT_THROW(hc::DenseMat<double>(2, 3, std::vector<double>(5)), hc::dimension_error);
}

TEST(TriTransposeMul, IdentityGivesIdentity) {
  for (std::size_t n = 1; n <= 9; ++n)
    EXPECT_EQ(hc::tri_transpose_mul(hc::TriFactor<double>(n)),
              hc::DenseMat<double>::identity(n));
}

TEST(TriTransposeMul, HandExpansion2x2) {
  const hc::TriFactor<double> L(2, {3.0, 2.0, 3.0});
  const auto C = hc::tri_transpose_mul(L);
  EXPECT_EQ(C, hc::DenseMat<double>(2, 2, {9, 6, 6, 13}));
}

TEST(TriTransposeMul, BitwiseSymmetricAndMatchesNaiveProduct) {
  std::mt19937_64 rng(17);
  const auto L = hc::testing::random_factor<double>(17, rng);
  const auto C = hc::tri_transpose_mul(L);
  const auto ref = hc::testing::naive_ltl(L);
  for (std::size_t i = 0; i < 17; ++i) {
    for (std::size_t j = 0; j < 17; ++j) {
      EXPECT_EQ(std::bit_cast<std::uint64_t>(C(i, j)),
                std::bit_cast<std::uint64_t>(C(j, i)));
      EXPECT_NEAR(C(i, j), static_cast<double>(ref[i * 17 + j]), 1e-13);
    }
  }
}

TEST(MaxAbsDiff, ShapeMismatchThrows) {
  EXPECT_THROW(hc::max_abs_diff(hc::DenseMat<double>(2, 2), hc::DenseMat<double>(2, 3)),
               hc::dimension_error);
  EXPECT_EQ(hc::max_abs_diff(hc::TriFactor<float>(3), hc::TriFactor<float>(3)), 0.0);
}

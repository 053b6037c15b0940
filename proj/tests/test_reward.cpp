#include <gtest/gtest.h>

#include <random>

#include "infoctl/reward.hpp"

using namespace infoctl;

namespace {
const RewardConfig kCfg;
}

TEST(F1, Examples) {
  EXPECT_DOUBLE_EQ(f1("seven", "seven"), 1.0);
  EXPECT_DOUBLE_EQ(f1("red car", "blue boat"), 0.0);
  EXPECT_NEAR(f1("February 20", "February 20, 2017"), 0.8, 1e-15);
  EXPECT_DOUBLE_EQ(f1("", "x"), 0.0);
  EXPECT_DOUBLE_EQ(f1("the", "a"), 0.0);
  EXPECT_DOUBLE_EQ(f1("The Seven.", "seven"), 1.0);
}

TEST(F1, MultisetOverlap) {
  // pred has "a1" twice, gold once: overlap 1, precision 1/2, recall 1.
  EXPECT_NEAR(f1("a1 a1", "a1"), 2.0 / 3.0, 1e-15);
}

TEST(F1, Symmetric) {
  std::mt19937_64 rng(4);
  const std::vector<std::string> vocab{"x", "y", "z", "w", "the", "v"};
  for (int trial = 0; trial < 2000; ++trial) {
    std::string a, b;
    for (int i = 0, n = static_cast<int>(rng() % 5); i < n; ++i) a += vocab[rng() % vocab.size()] + " ";
    for (int i = 0, n = static_cast<int>(rng() % 5); i < n; ++i) b += vocab[rng() % vocab.size()] + " ";
    EXPECT_DOUBLE_EQ(f1(a, b), f1(b, a)) << a << "|" << b;
  }
}

TEST(Correctness, Examples) {
  EXPECT_DOUBLE_EQ(correctness_reward(std::nullopt, "x", kCfg), 0.0);
  EXPECT_DOUBLE_EQ(correctness_reward(std::string("nothing alike"), "x", kCfg), 0.1);
  // p 2/3, r 2/5 -> F1 1/2.
  EXPECT_NEAR(correctness_reward(std::string("x y c"), "x y d e z", kCfg), 0.5, 1e-15);
  EXPECT_DOUBLE_EQ(correctness_reward(std::string(""), "x", kCfg), kCfg.lambda_format);
}

TEST(Penalty, Examples) {
  EXPECT_DOUBLE_EQ(penalty_reward(0, kCfg), 0.0);
  EXPECT_FALSE(std::signbit(penalty_reward(0, kCfg)));
  EXPECT_DOUBLE_EQ(penalty_reward(1, kCfg), -0.2);
  EXPECT_DOUBLE_EQ(penalty_reward(3, kCfg), -0.4);
}

TEST(RetrievalBonus, Examples) {
  const std::vector<std::string> texts{"a long report", "the season taking place during 1951–52 was"};
  EXPECT_DOUBLE_EQ(retrieval_bonus(texts, "1951–52", kCfg), 0.1);
  EXPECT_DOUBLE_EQ(retrieval_bonus(texts, "1960", kCfg), 0.0);
  EXPECT_DOUBLE_EQ(retrieval_bonus({}, "1951–52", kCfg), 0.0);
  const std::vector<std::string> split{"The Bahá'í", "World Centre."};
  EXPECT_TRUE(retrieval_hit(split, "bahá'í world centre"));
}

TEST(TotalReward, Examples) {
  const auto a = compose_reward(1.0, true, 0, true, kCfg);
  EXPECT_DOUBLE_EQ(a.total, 1.0);
  EXPECT_FALSE(a.ceiling_applied);

  const auto b = compose_reward(0.95, true, 0, true, kCfg);
  EXPECT_DOUBLE_EQ(b.total, 0.9);
  EXPECT_TRUE(b.ceiling_applied);

  const auto c = compose_reward(0.6, true, 2, false, kCfg);
  EXPECT_NEAR(c.total, 0.2, 1e-15);
  EXPECT_DOUBLE_EQ(c.r_penalty, -0.4);

  const auto d = compose_reward(0.05, true, 0, false, kCfg);
  EXPECT_DOUBLE_EQ(d.r_correct, 0.1);
  EXPECT_DOUBLE_EQ(d.total, 0.1);
}

TEST(TotalReward, FromText) {
  const std::vector<std::string> texts{"it is seven"};
  const auto r = total_reward(std::string("Seven"), "seven", 0, texts, kCfg);
  EXPECT_DOUBLE_EQ(r.f1, 1.0);
  EXPECT_DOUBLE_EQ(r.r_ret, 0.1);
  EXPECT_DOUBLE_EQ(r.total, 1.0);

  const auto absent = total_reward(std::nullopt, "seven", 1, texts, kCfg);
  EXPECT_DOUBLE_EQ(absent.r_correct, 0.0);
  EXPECT_NEAR(absent.total, -0.1, 1e-15);

  const std::vector<std::string> golds{"eight", "seven"};
  EXPECT_DOUBLE_EQ(total_reward(std::string("seven"), golds, 0, texts, kCfg).total, 1.0);
  EXPECT_THROW(total_reward(std::string("x"), std::vector<std::string>{}, 0, texts, kCfg), Error);
}

TEST(TotalReward, GridBoundsCeilingMonotone) {
  for (int fi = 0; fi <= 10; ++fi) {
    const double f = fi / 10.0;
    for (std::size_t v = 0; v <= 5; ++v) {
      for (bool hit : {false, true}) {
        const auto r = compose_reward(f, true, v, hit, kCfg);
        EXPECT_GE(r.total, -kCfg.lambda_penalty_max);
        EXPECT_LE(r.total, 1.0);
        if (f < 1.0) {
          EXPECT_LE(r.total, kCfg.lambda_ceil);
        }
        EXPECT_GE(r.r_correct, kCfg.lambda_format);
        if (fi > 0) {
          EXPECT_GE(r.total, compose_reward((fi - 1) / 10.0, true, v, hit, kCfg).total);
        }
        if (v > 0) {
          EXPECT_LE(r.total, compose_reward(f, true, v - 1, hit, kCfg).total);
        }
      }
    }
  }
}

TEST(RewardConfigTest, Validation) {
  RewardConfig c;
  EXPECT_NO_THROW(c.validate());
  c.lambda_format = 0.95;
  EXPECT_THROW(c.validate(), Error);
  c = RewardConfig{};
  c.lambda_penalty = 0.5;
  EXPECT_THROW(c.validate(), Error);
}

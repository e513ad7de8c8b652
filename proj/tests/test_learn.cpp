#include <gtest/gtest.h>

#include "fixtures.hpp"

using namespace son;

TEST(QUpdate, ZeroLearningRateLeavesTheTableUnchanged) {
  QTable q(2, 2);
  q.set(0, 0, 3.0);
  q.set(1, 1, -2.0);
  const QTable before = q;
  q_update(q, {0.0, 0.9}, {0, 0, 50.0, 1});
  EXPECT_EQ(q, before);
}

TEST(QUpdate, FullRateNoDiscountStoresTheReward) {
  QTable q(2, 2);
  q.set(0, 0, 0.0);
  q.set(0, 1, 0.0);
  q.set(1, 0, 0.0);
  q.set(1, 1, 0.0);
  EXPECT_EQ(q_update(q, {1.0, 0.0}, {0, 1, 7.0, 1}), 7.0);
  EXPECT_EQ(*q.at(0, 1), 7.0);
}

TEST(QUpdate, HandEvaluatedCase) {
  QTable q(2, 2);
  q.set(0, 0, 5.0);
  q.set(1, 0, 2.0);
  q.set(1, 1, 1.0);
  // 5 + 0.5 (10 + 0.9 * 2 - 5) = 8.4
  EXPECT_NEAR(q_update(q, {0.5, 0.9}, {0, 0, 10.0, 1}), 8.4, 1e-12);
}

TEST(QUpdate, UnexploredEntriesStartAtZero) {
  QTable q(2, 3);
  EXPECT_EQ(q_update(q, {0.5, 0.9}, {0, 2, 4.0, 1}), 2.0);
  EXPECT_TRUE(q.explored(0, 2));
  EXPECT_FALSE(q.explored(1, 0));
}

TEST(QUpdate, RejectsBadInput) {
  QTable q(2, 2);
  EXPECT_THROW(q_update(q, {0.5, 0.0}, {2, 0, 1.0, 0}), Error);
  EXPECT_THROW(q_update(q, {0.5, 0.0}, {0, 0, std::nan(""), 0}), Error);
  EXPECT_THROW((QParams{1.5, 0.0}.validate()), Error);
  EXPECT_THROW((QParams{0.5, 1.0}.validate()), Error);
}

TEST(Greedy, ReferenceTable) {
  const QTable q = fixtures::reference_table();
  EXPECT_EQ(greedy(q, 0), 1u);
  EXPECT_EQ(greedy(q, 1), 0u);
  EXPECT_EQ(greedy(q, 2), 2u);
}

TEST(Greedy, TiesGoToTheLowestIndexAndUnexploredIsNeverPicked) {
  QTable q(2, 4);
  q.set(0, 1, 3.0);
  q.set(0, 3, 3.0);
  EXPECT_EQ(greedy(q, 0), 1u);
  q.set(1, 2, -50.0);
  EXPECT_EQ(greedy(q, 1), 2u);
}

TEST(Greedy, StateWithoutExploredActions) {
  QTable q(1, 3);
  try {
    greedy(q, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "NoExploredAction");
  }
}

TEST(LearningCoefficient, Examples) {
  EXPECT_EQ(learning_coefficient(5, 10), 0.5);
  EXPECT_EQ(learning_coefficient(12, 10), 1.0);
  EXPECT_EQ(learning_coefficient(0, 10), 0.0);
  EXPECT_EQ(learning_coefficient(3, 0), 1.0);
  EXPECT_THROW(learning_coefficient(-1, 10), Error);
}

TEST(LearningCoefficientProperty, AlwaysInUnitInterval) {
  Rng rng(mix_seed(41));
  for (int i = 0; i < 100'000; ++i) {
    const double achieved = uniform01(rng) < 0.05 ? 0.0 : uniform_real(rng, 0.0, 1e4);
    const double demanded = uniform01(rng) < 0.05 ? 0.0 : uniform_real(rng, 0.0, 1e4);
    const double L = learning_coefficient(achieved, demanded);
    ASSERT_GE(L, 0.0);
    ASSERT_LE(L, 1.0);
  }
}

TEST(EncodeState, Examples) {
  const StateCodec codec{{4, 4}};
  EXPECT_EQ(encode_state({{0.0, 0.0}}, codec), 0u);
  EXPECT_EQ(encode_state({{1.0, 1.0}}, codec), codec.state_count() - 1);
  EXPECT_EQ(encode_state({{0.3, 0.6}}, codec), 6u);
  EXPECT_THROW(encode_state({{0.3}}, codec), Error);
}

TEST(EncodeStateProperty, AlwaysInRange) {
  Rng rng(mix_seed(42));
  for (int i = 0; i < 10'000; ++i) {
    StateCodec codec;
    PerceptVector p;
    const std::size_t k = 1 + uniform_index(rng, 4);
    for (std::size_t j = 0; j < k; ++j) {
      codec.bins.push_back(1 + static_cast<int>(uniform_index(rng, 6)));
      p.values.push_back(uniform01(rng));
    }
    ASSERT_LT(encode_state(p, codec), codec.state_count());
  }
}

TEST(QUpdateProperty, TouchesExactlyOneEntry) {
  Rng rng(mix_seed(43));
  QTable q(6, 4);
  for (int i = 0; i < 5000; ++i) {
    const QTable before = q;
    const Transition tr{uniform_index(rng, 6), uniform_index(rng, 4), uniform_real(rng, -5, 5), uniform_index(rng, 6)};
    q_update(q, {uniform_real(rng, 0.01, 1.0), uniform_real(rng, 0.0, 0.99)}, tr);
    for (std::size_t s = 0; s < 6; ++s)
      for (std::size_t a = 0; a < 4; ++a)
        if (s != tr.s || a != tr.a) {
          ASSERT_EQ(q.at(s, a), before.at(s, a));
        }
  }
}

TEST(QTableText, DumpUsesDashForUnexplored) {
  const std::string text = dump_qtable(fixtures::reference_table());
  EXPECT_EQ(text,
            "state\ta_1\ta_2\ta_3\ta_4\n"
            "State 1\t-\t10\t5\t0.2\n"
            "State 2\t100\t7\t-\t1\n"
            "State 3\t2\t-\t30\t5\n");
}

TEST(QTableText, ParseInvertsDump) {
  QTable q(3, 2);
  q.set(0, 0, 0.1 + 0.2);
  q.set(2, 1, -1e-7);
  EXPECT_EQ(parse_qtable(dump_qtable(q)), q);
  EXPECT_EQ(parse_qtable(dump_qtable(fixtures::reference_table())), fixtures::reference_table());
  EXPECT_THROW(parse_qtable("state\ta_1\nState 1\tx\n"), Error);
  EXPECT_THROW(parse_qtable("bogus\n"), Error);
}

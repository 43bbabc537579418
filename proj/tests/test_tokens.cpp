#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "tproj/projection.hpp"
#include "tproj/tokens.hpp"

namespace tproj {
namespace {

const Pattern kArrive{"ARRIVE", {{"TRUCK14", false}}};

TEST(AddBasicEvent, PointEventFillsOneCell) {
  TokenStore store;
  const TimeGrid grid(0, 1, 10);
  const auto id = add_basic_event(store, kArrive, 5, 5, 1.0, grid);
  const auto& d = store.event(id).density;
  for (std::size_t k = 0; k < d.size(); ++k) EXPECT_EQ(d[k], k == 5 ? 1.0 : 0.0) << k;
  EXPECT_TRUE(store.event(id).user_supplied());
}

TEST(AddBasicEvent, PointEventScalesWithDelta) {
  TokenStore store;
  const auto id = add_basic_event(store, kArrive, 1.2, 1.2, 0.5, TimeGrid(0, 0.25, 16));
  EXPECT_DOUBLE_EQ(store.event(id).density[4], 2.0);
  EXPECT_DOUBLE_EQ(series_integral(store.event(id).density), 0.5);
}

TEST(AddBasicEvent, GaussianNormalizedAndSymmetric) {
  TokenStore store;
  const TimeGrid grid(0, 1, 20);
  const auto id = add_basic_event(store, kArrive, 0, 10, 1.0, grid);
  const auto& d = store.event(id).density;
  EXPECT_NEAR(series_integral(d, 0, 9), 1.0, 1e-9);
  for (std::size_t k = 0; k < 5; ++k) EXPECT_NEAR(d[k], d[9 - k], 1e-12) << k;
  for (std::size_t k = 10; k < 20; ++k) EXPECT_EQ(d[k], 0.0);
  EXPECT_GT(d[4], d[3]);
}

TEST(AddBasicEvent, KappaScalesIntegral) {
  TokenStore store;
  const auto id = add_basic_event(store, kArrive, 0, 10, 0.8, TimeGrid(0, 1, 20));
  EXPECT_NEAR(series_integral(store.event(id).density), 0.8, 1e-9);
}

TEST(AddBasicEvent, WindowBeyondHorizonLosesMass) {
  TokenStore store;
  const auto id = add_basic_event(store, kArrive, 5, 15, 1.0, TimeGrid(0, 1, 10));
  EXPECT_NEAR(series_integral(store.event(id).density), 0.5, 1e-9);
}

TEST(AddBasicEvent, RejectsBadInput) {
  TokenStore store;
  const TimeGrid grid(0, 1, 10);
  EXPECT_THROW(add_basic_event(store, kArrive, 0, 5, 1.5, grid), PreconditionError);
  EXPECT_THROW(add_basic_event(store, kArrive, 0, 5, -0.1, grid), PreconditionError);
  EXPECT_THROW(add_basic_event(store, kArrive, 6, 5, 1.0, grid), PreconditionError);
  EXPECT_THROW(add_basic_event(store, kArrive, 10, 12, 1.0, grid), PreconditionError);
  EXPECT_THROW(add_basic_event(store, kArrive, -5, -1, 1.0, grid), PreconditionError);
  EXPECT_THROW(add_basic_event(store, Pattern{"ARRIVE", {{"t", true}}}, 0, 5, 1.0, grid), PreconditionError);
  EXPECT_TRUE(store.empty());
}

TEST(AddBasicEvent, IntegralIsKappaTimesCoveredFraction) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const TimeGrid grid(0, 0.5, 40);
    const double est = u(rng) * 18.0;
    const double lst = est + u(rng) * 10.0;
    const double kappa = u(rng);
    TokenStore store;
    const auto id = add_basic_event(store, Pattern{"E", {}}, est, lst, kappa, grid);
    const double got = series_integral(store.event(id).density);
    EXPECT_LE(got, kappa + 1e-9);
    if (lst <= grid.end()) {
      EXPECT_NEAR(got, kappa, 1e-9);
    }
    for (std::size_t k = 0; k < grid.omega(); ++k) {
      if (grid.cell_end(k) <= est || grid.cell_start(k) > lst) {
        EXPECT_EQ(store.event(id).density[k], 0.0);
      }
    }
  }
}

TEST(BasicFactsFile, ParsesAndReportsLines) {
  const auto specs = parse_basic_facts("# arrivals\nevent ARRIVE(TRUCK14) est 0 lst 10 kappa 1.0\n\n"
                                       "event CALL(ACME, T2) est 3.5 lst 3.5 kappa 0.25\n");
  ASSERT_EQ(specs.size(), 2u);
  EXPECT_EQ(specs[0].event_type, kArrive);
  EXPECT_EQ(specs[1].lst, 3.5);
  EXPECT_EQ(specs[1].kappa, 0.25);
  EXPECT_EQ(parse_basic_facts(format_basic_facts(specs)), specs);

  try {
    parse_basic_facts("event A est 0 lst 1 kappa 1\nevent B est 5 lst 1 kappa 1\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(parse_basic_facts("event A(?x) est 0 lst 1 kappa 1"), ParseError);
  EXPECT_THROW(parse_basic_facts("event A est 0 lst 1 kappa 2"), ParseError);
  EXPECT_THROW(parse_basic_facts("event A est 0 lst 1"), ParseError);
}

TEST(InitVectors, ZeroesDerivedTokens) {
  const auto theory = parse_theory("project ALWAYS, ARRIVE(?t) => ATDOCK(?t) @ 1.0");
  const TimeGrid grid(0, 1, 30);
  TokenStore store;
  add_basic_event(store, kArrive, 0, 10, 1.0, grid);
  store = project(theory, std::move(store), grid);
  for (auto& f : store.facts()) f.mass.fill(0.7);
  init_vectors(store, grid);
  for (const auto& f : store.facts()) {
    for (double m : f.mass.values()) EXPECT_EQ(m, f.builtin() ? 1.0 : 0.0);
    EXPECT_EQ(f.mass.size(), grid.omega());
  }
  for (const auto& e : store.events()) {
    if (e.user_supplied()) {
      EXPECT_NEAR(series_integral(e.density), 1.0, 1e-9);
    } else {
      for (double d : e.density.values()) EXPECT_EQ(d, 0.0);
    }
  }
}

TEST(InitVectors, EmptyStoreIsNoOp) {
  TokenStore store;
  init_vectors(store, TimeGrid(0, 1, 5));
  EXPECT_TRUE(store.empty());
}

TEST(InitVectors, ResamplesOntoWorkingMesh) {
  TokenStore store;
  const auto id = add_basic_event(store, kArrive, 0, 10, 1.0, TimeGrid(0, 1, 20));
  const StepSeries coarse = store.event(id).density;
  init_vectors(store, TimeGrid(0, 0.25, 80));
  const auto& fine = store.event(id).density;
  ASSERT_EQ(fine.size(), 80u);
  EXPECT_EQ(fine[13], coarse[3]);
  EXPECT_NEAR(series_integral(fine), 1.0, 1e-9);
  EXPECT_THROW(init_vectors(store, TimeGrid(0, 0.3, 66)), ResampleMismatch);
}

TEST(TokenStore, PartitionAndIds) {
  const auto theory = parse_theory("project ALWAYS, ARRIVE(?t) => ATDOCK(?t) @ 1.0");
  const TimeGrid grid(0, 1, 30);
  TokenStore store;
  add_basic_event(store, kArrive, 0, 10, 1.0, grid);
  add_basic_event(store, Pattern{"ARRIVE", {{"TRUCK15", false}}}, 3, 4, 1.0, grid);
  store = project(theory, std::move(store), grid);
  EXPECT_EQ(store.size(), store.events().size() + store.facts().size());
  for (std::size_t i = 0; i < store.size(); ++i) {
    const TokenId id{i};
    if (store.kind(id) == TokenKind::event) {
      EXPECT_EQ(store.event(id).id, id);
      EXPECT_THROW(store.fact(id), PreconditionError);
    } else {
      EXPECT_EQ(store.fact(id).id, id);
      EXPECT_THROW(store.event(id), PreconditionError);
    }
  }
  EXPECT_EQ(store.with_type("ATDOCK(TRUCK15)").size(), 2u);  // onset event and fact
  EXPECT_THROW(store.kind(TokenId{store.size()}), PreconditionError);
}

}  // namespace
}  // namespace tproj

#include <gtest/gtest.h>

#include <cmath>

#include "recsim/synthgen.hpp"

using namespace recsim;

TEST(Homophily, Probability) {
  const std::vector<double> a{0.2, -0.3};
  EXPECT_EQ(homophily_probability(a, a, 9.0, HomophilyKernel::distance), 1.0);
  EXPECT_EQ(homophily_probability(a, a, 9.0, HomophilyKernel::squared_distance), 1.0);
  const std::vector<double> o{0.0, 0.0}, p{0.5, 0.5};  // squared distance 0.5
  EXPECT_NEAR(homophily_probability(o, p, 9.0, HomophilyKernel::squared_distance), std::exp(-4.5), 1e-15);
  EXPECT_NEAR(homophily_probability(o, p, 9.0, HomophilyKernel::squared_distance), 0.0111, 1e-4);
  EXPECT_NEAR(homophily_probability(o, p, 9.0, HomophilyKernel::distance), std::exp(-9.0 * std::sqrt(0.5)), 1e-15);
  EXPECT_EQ(parse_homophily_kernel("squared_distance"), HomophilyKernel::squared_distance);
  EXPECT_THROW(parse_homophily_kernel("gaussian"), std::invalid_argument);
}

TEST(Homophily, IdenticalOpinionsGiveCompleteGraph) {
  const RowMatrix same(6, 2, 0.3);
  Rng rng(0);
  const auto g = generate_homophily_graph(same, 9.0, rng);
  EXPECT_EQ(g.n_edges(), 30u);
  EXPECT_THROW(generate_homophily_graph(same, 0.0, rng), std::invalid_argument);
}

TEST(Homophily, EdgeFrequencyMatchesProbability) {
  const auto ops = RowMatrix::from_rows({{0.0, 0.0}, {0.3, 0.1}});
  const double p = homophily_probability(ops.row(0), ops.row(1), 2.0, HomophilyKernel::distance);
  Rng rng(1);
  std::size_t hits = 0;
  const std::size_t trials = 20000;
  for (std::size_t t = 0; t < trials; ++t) hits += generate_homophily_graph(ops, 2.0, rng).has_edge(1, 0);
  EXPECT_NEAR(static_cast<double>(hits) / trials, p, 0.01);
}

TEST(Homophily, LargerDeltaGivesFewerEdges) {
  double deg6 = 0.0, deg9 = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    const RowMatrix u = init_opinions_uniform(300, 2, rng);
    Rng g6(seed + 100), g9(seed + 100);
    deg6 += average_in_degree(generate_homophily_graph(u, 6.0, g6));
    deg9 += average_in_degree(generate_homophily_graph(u, 9.0, g9));
  }
  EXPECT_GT(deg6, deg9);
}

TEST(InitOpinions, UniformCube) {
  Rng rng(3);
  const RowMatrix m = init_opinions_uniform(100000, 2, rng);
  double s0 = 0.0, s1 = 0.0;
  for (Index i = 0; i < m.rows(); ++i) {
    s0 += m(i, 0);
    s1 += m(i, 1);
  }
  EXPECT_NEAR(s0 / 1e5, 0.0, 0.01);
  EXPECT_NEAR(s1 / 1e5, 0.0, 0.01);
  EXPECT_LE(bound_excess(m), 0.0);
  Rng a(42), b(42);
  EXPECT_EQ(init_opinions_uniform(10, 3, a), init_opinions_uniform(10, 3, b));
}

TEST(SampleParams, IsolatedUserResidual) {
  SocialGraph g(50);
  Rng rng(4);
  const auto p = sample_params(g, 3, ParameterBounds::synthetic(), rng);
  for (Index i = 0; i < 50; ++i) {
    EXPECT_NEAR(p.recommender_influence[i], 1.0 - g.self_weight(i), 1e-15);
    EXPECT_GE(p.recommender_influence[i], 0.2 - 1e-15);
    EXPECT_LE(p.recommender_influence[i], 0.5 + 1e-15);
    EXPECT_GE(p.user_stubbornness[i], 0.0);
    EXPECT_LE(p.user_stubbornness[i], 0.5);
  }
  for (Index j = 0; j < 3; ++j) {
    EXPECT_DOUBLE_EQ(p.creator_self_influence[j] + p.audience_influence[j], 1.0);
    EXPECT_GE(p.creator_self_influence[j], 0.5);
    EXPECT_LE(p.creator_self_influence[j], 0.8);
    EXPECT_LE(p.creator_stubbornness[j], 0.5);
  }
}

// Dense in-degree forces the rescale branch for most users.
TEST(SampleParams, RowsValidAndBInRange) {
  for (ParameterBounds bounds : {ParameterBounds::synthetic(), ParameterBounds::real_network()}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const std::size_t n = 2000;
      SocialGraph g(n);
      Rng rng(seed);
      for (Index i = 0; i < n; ++i)
        for (std::size_t e = 1; e <= 11; ++e) g.add_edge((i + e) % n, i);
      const auto p = sample_params(g, 50, bounds, rng);
      EXPECT_TRUE(validate_rows(g, p.recommender_influence).ok());
      for (Index i = 0; i < n; ++i) {
        EXPECT_GE(p.recommender_influence[i], 0.2 - 1e-12);
        EXPECT_LE(p.recommender_influence[i], 0.8 + 1e-12);
        EXPECT_GE(g.self_weight(i), 0.5);
        EXPECT_LE(g.self_weight(i), 0.8);
      }
    }
  }
}

TEST(SampleParams, TotalMassSplitsEvenly) {
  SocialGraph g(5);
  for (Index j = 1; j < 5; ++j) g.add_edge(j, 0);
  Rng rng(6);
  ParameterBounds b = ParameterBounds::real_network();
  b.self_influence = {0.5, 0.5};
  sample_params(g, 1, b, rng);
  const auto in = g.in_edges(0);
  for (const auto& e : in) EXPECT_DOUBLE_EQ(e.weight, in[0].weight);
  EXPECT_GE(g.in_weight_sum(0), 0.25 - 1e-15);
  EXPECT_LE(g.in_weight_sum(0), 0.5 + 1e-15);
}

TEST(SampleParams, RejectsInfeasibleBounds) {
  SocialGraph g(2);
  Rng rng(0);
  ParameterBounds b;
  b.self_influence = {0.9, 0.95};
  EXPECT_THROW(sample_params(g, 1, b, rng), std::invalid_argument);
  ParameterBounds t = ParameterBounds::real_network();
  t.self_influence = {0.8, 0.8};
  t.neighbor_influence = {0.3, 0.5};
  t.recommender_influence = {0.0, 0.2};
  EXPECT_THROW(sample_params(g, 1, t, rng), std::invalid_argument);
  ParameterBounds r;
  r.user_stubbornness = {0.6, 0.4};
  EXPECT_THROW(r.validate(), std::invalid_argument);
}

TEST(SampleParams, SeededRepeat) {
  const auto run = [](std::uint64_t seed) {
    Rng rng(seed);
    const RowMatrix u = init_opinions_uniform(60, 2, rng);
    SocialGraph g = generate_homophily_graph(u, 6.0, rng);
    const auto p = sample_params(g, 5, ParameterBounds::synthetic(), rng);
    return std::pair{g.edges().size(), p.recommender_influence};
  };
  EXPECT_EQ(run(10), run(10));
}

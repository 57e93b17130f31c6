#pragma once

#include <vector>

#include "recsim/dynamics.hpp"
#include "recsim/graph.hpp"
#include "recsim/matrix.hpp"
#include "recsim/simulation.hpp"

namespace recsim::testing {

inline UserPopulation users_at(RowMatrix opinions, std::vector<double> stubbornness, std::vector<double> b) {
  UserPopulation u;
  u.prejudices = opinions;
  u.opinions = std::move(opinions);
  u.stubbornness = std::move(stubbornness);
  u.recommender_influence = std::move(b);
  return u;
}

inline CreatorPopulation creators_at(RowMatrix opinions, std::vector<double> stubbornness, std::vector<double> e) {
  CreatorPopulation c;
  c.prejudices = opinions;
  c.opinions = std::move(opinions);
  c.stubbornness = std::move(stubbornness);
  c.audience_influence.resize(e.size());
  for (std::size_t j = 0; j < e.size(); ++j) c.audience_influence[j] = 1.0 - e[j];
  c.self_influence = std::move(e);
  return c;
}

inline double max_abs_diff(const RowMatrix& a, const RowMatrix& b) {
  double worst = 0.0;
  for (std::size_t k = 0; k < a.values().size(); ++k) worst = std::max(worst, std::abs(a.values()[k] - b.values()[k]));
  return worst;
}

}  // namespace recsim::testing

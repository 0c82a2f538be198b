#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <set>
#include <vector>

#include "yieldnet/autodiff.hpp"
#include "yieldnet/data.hpp"
#include "yieldnet/rng.hpp"
#include "yieldnet/synthetic.hpp"

namespace testing {

inline yieldnet::ad::Tensor random_tensor(yieldnet::ad::Shape shape, std::uint64_t seed, double lo = -1.0,
                                          double hi = 1.0) {
  yieldnet::Rng rng(seed);
  std::vector<double> values(yieldnet::ad::element_count(shape));
  for (double& v : values) v = rng.uniform(lo, hi);
  return yieldnet::ad::Tensor(std::move(shape), std::move(values));
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

// Small generator fixture for tests that need full records.
inline yieldnet::SyntheticSpec small_spec(std::uint64_t seed = 7) {
  yieldnet::SyntheticSpec spec;
  spec.counties = 12;
  spec.states = 3;
  spec.start_year = 1980;
  spec.end_year = 1989;
  spec.seed = seed;
  return spec;
}

// Train-phase samples for every target year that has a full window.
inline std::vector<yieldnet::SequenceSample> fixture_samples(const yieldnet::SyntheticDataset& data,
                                                             std::size_t k = 5) {
  auto avg = yieldnet::compute_avg_yields(data.records, data.spec.crop);
  std::set<int> targets;
  for (int y = data.spec.start_year + static_cast<int>(k); y <= data.spec.end_year; ++y) targets.insert(y);
  return yieldnet::assemble_sequences(data.records, data.spec.crop, k, targets, yieldnet::Phase::train, avg)
      .samples;
}

}  // namespace testing

#pragma once

#include <cmath>
#include <vector>

#include "elugcn/nn.hpp"

namespace elugcn {

struct GeneralizationGap {
  std::vector<double> series;  // |val loss - train loss| per epoch
  double summary = 0.0;        // mean over the last 20% of epochs
};

inline GeneralizationGap generalization_gap(const std::vector<EpochRecord>& history) {
  GeneralizationGap g;
  g.series.reserve(history.size());
  for (const auto& r : history) g.series.push_back(std::abs(r.val_loss - r.train_loss));
  if (g.series.empty()) return g;
  const std::size_t tail =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(0.2 * static_cast<double>(g.series.size()))));
  CompensatedSum s;
  for (std::size_t i = g.series.size() - tail; i < g.series.size(); ++i) s.add(g.series[i]);
  g.summary = s.value() / static_cast<double>(tail);
  return g;
}

}  // namespace elugcn

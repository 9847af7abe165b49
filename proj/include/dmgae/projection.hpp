#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "dmgae/graph.hpp"

namespace dmgae {

struct Projection {
  Matrix coords;        // n x 2
  Matrix axes;          // d x 2 principal directions
  Vector variances;     // eigenvalues of the two retained axes
};

// Centers the rows and projects them onto the two leading principal axes of
// the sample covariance. Each axis is signed so that its largest-magnitude
// component is positive.
Projection pca_2d(const Matrix& x);

// Mean distance between class centroids divided by the mean distance of
// points to their own class centroid.
double separation_ratio(const Matrix& coords, std::span<const int> labels);

void write_scatter_csv(const std::filesystem::path& path, const Matrix& coords,
                       const std::optional<std::vector<int>>& labels);
void write_scatter_svg(const std::filesystem::path& path, const Matrix& coords,
                       const std::optional<std::vector<int>>& labels);

}  // namespace dmgae

#include "dmgae/projection.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace dmgae {

Projection pca_2d(const Matrix& x) {
  if (x.rows() < 1 || x.cols() < 1) throw std::invalid_argument("pca_2d needs a non-empty matrix");
  const Matrix centered = x.rowwise() - x.colwise().mean();
  const double denom = std::max<double>(1.0, static_cast<double>(x.rows() - 1));
  const Matrix cov = centered.transpose() * centered / denom;
  Eigen::SelfAdjointEigenSolver<Matrix> solver(cov);
  // Eigenvalues come back in increasing order.
  const Eigen::Index d = x.cols();
  Projection out;
  out.axes = Matrix::Zero(d, 2);
  out.variances = Vector::Zero(2);
  for (Eigen::Index k = 0; k < std::min<Eigen::Index>(2, d); ++k) {
    Vector axis = solver.eigenvectors().col(d - 1 - k);
    Eigen::Index arg = 0;
    axis.cwiseAbs().maxCoeff(&arg);
    if (axis[arg] < 0.0) axis = -axis;
    out.axes.col(k) = axis;
    out.variances[k] = solver.eigenvalues()[d - 1 - k];
  }
  out.coords = centered * out.axes;
  return out;
}

double separation_ratio(const Matrix& coords, std::span<const int> labels) {
  if (static_cast<std::size_t>(coords.rows()) != labels.size()) {
    throw std::invalid_argument("separation_ratio: label count mismatch");
  }
  std::map<int, std::pair<Eigen::RowVectorXd, int>> groups;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto [it, inserted] = groups.try_emplace(labels[i], Eigen::RowVectorXd::Zero(coords.cols()), 0);
    it->second.first += coords.row(static_cast<Eigen::Index>(i));
    ++it->second.second;
  }
  if (groups.size() < 2) throw std::invalid_argument("separation_ratio needs two classes");
  std::map<int, Eigen::RowVectorXd> centroid;
  for (auto& [label, acc] : groups) centroid[label] = acc.first / acc.second;

  double spread = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    spread += (coords.row(static_cast<Eigen::Index>(i)) - centroid[labels[i]]).norm();
  }
  spread /= static_cast<double>(labels.size());

  double between = 0.0;
  int pairs = 0;
  for (auto a = centroid.begin(); a != centroid.end(); ++a) {
    for (auto b = std::next(a); b != centroid.end(); ++b) {
      between += (a->second - b->second).norm();
      ++pairs;
    }
  }
  between /= pairs;
  return spread > 0.0 ? between / spread : std::numeric_limits<double>::infinity();
}

void write_scatter_csv(const std::filesystem::path& path, const Matrix& coords,
                       const std::optional<std::vector<int>>& labels) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "x,y,label\n";
  char buf[96];
  for (Eigen::Index i = 0; i < coords.rows(); ++i) {
    const int label = labels ? (*labels)[static_cast<std::size_t>(i)] : -1;
    std::snprintf(buf, sizeof(buf), "%.8g,%.8g,%d\n", coords(i, 0), coords(i, 1), label);
    out << buf;
  }
}

void write_scatter_svg(const std::filesystem::path& path, const Matrix& coords,
                       const std::optional<std::vector<int>>& labels) {
  static constexpr std::array<const char*, 10> kPalette = {
      "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
      "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  constexpr double kSize = 600.0;
  constexpr double kMargin = 20.0;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kSize << "\" height=\"" << kSize
      << "\" viewBox=\"0 0 " << kSize << ' ' << kSize << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (coords.rows() == 0) {
    out << "</svg>\n";
    return;
  }
  const double min_x = coords.col(0).minCoeff();
  const double min_y = coords.col(1).minCoeff();
  const double span = std::max({coords.col(0).maxCoeff() - min_x, coords.col(1).maxCoeff() - min_y,
                                1e-12});
  const double scale = (kSize - 2.0 * kMargin) / span;
  char buf[160];
  for (Eigen::Index i = 0; i < coords.rows(); ++i) {
    const int label = labels ? (*labels)[static_cast<std::size_t>(i)] : 0;
    const char* color = kPalette[static_cast<std::size_t>(std::abs(label)) % kPalette.size()];
    const double px = kMargin + (coords(i, 0) - min_x) * scale;
    const double py = kSize - kMargin - (coords(i, 1) - min_y) * scale;
    std::snprintf(buf, sizeof(buf), "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"2.5\" fill=\"%s\"/>\n", px,
                  py, color);
    out << buf;
  }
  out << "</svg>\n";
}

}  // namespace dmgae

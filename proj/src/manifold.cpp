#include "geossl/manifold.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "geossl/error.hpp"
#include "geossl/rng.hpp"

namespace geossl::manifold {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double angle_of(double x, double y) {
  double theta = std::atan2(y, x);
  if (theta < 0.0) theta += kTwoPi;
  return theta;
}

// (l - m)! / (l + m)! without overflowing for moderate degrees.
double factorial_ratio(int l, int m) {
  double r = 1.0;
  for (int i = l - m + 1; i <= l + m; ++i) r /= static_cast<double>(i);
  return r;
}

}  // namespace

std::string_view to_string(ManifoldKind kind) {
  switch (kind) {
    case ManifoldKind::circle: return "circle";
    case ManifoldKind::sphere: return "sphere";
  }
  return "unknown";
}

ManifoldKind parse_manifold_kind(std::string_view name) {
  if (name == "circle") return ManifoldKind::circle;
  if (name == "sphere") return ManifoldKind::sphere;
  throw ParameterError("unsupported manifold kind '" + std::string(name) + "'");
}

int intrinsic_dim(ManifoldKind kind) {
  switch (kind) {
    case ManifoldKind::circle: return 1;
    case ManifoldKind::sphere: return 2;
  }
  throw ParameterError("unsupported manifold kind");
}

PointCloud sample_manifold(ManifoldKind kind, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw ParameterError("sample_manifold: empty sample requested (n = 0)");
  PointCloud cloud;
  cloud.kind = kind;
  cloud.intrinsic_dim = intrinsic_dim(kind);
  cloud.seed = seed;
  Rng rng(seed);
  const auto rows = static_cast<Eigen::Index>(n);
  if (kind == ManifoldKind::circle) {
    cloud.points.resize(rows, 2);
    for (Eigen::Index i = 0; i < rows; ++i) {
      const double theta = kTwoPi * rng.uniform();
      cloud.points(i, 0) = std::cos(theta);
      cloud.points(i, 1) = std::sin(theta);
    }
  } else {
    cloud.points.resize(rows, 3);
    for (Eigen::Index i = 0; i < rows; ++i) {
      Eigen::Vector3d g;
      double norm = 0.0;
      do {
        g << rng.normal(), rng.normal(), rng.normal();
        norm = g.norm();
      } while (norm < 1e-300);
      cloud.points.row(i) = (g / norm).transpose();
    }
  }
  return cloud;
}

std::size_t circle_cosine_index(std::size_t k) { return 2 * k; }

std::size_t sphere_index(int degree, int order) {
  if (degree < 0 || order < -degree || order > degree) throw ParameterError("sphere_index: |m| > l");
  return static_cast<std::size_t>(degree * degree + degree + order);
}

double real_spherical_harmonic(int l, int m, double x, double y, double z) {
  const int am = std::abs(m);
  const double ct = std::clamp(z, -1.0, 1.0);
  const double phi = std::atan2(y, x);
  // std::assoc_legendre omits the Condon-Shortley phase; the real basis below
  // is orthonormal either way.
  const double p = std::assoc_legendre(static_cast<unsigned>(l), static_cast<unsigned>(am), ct);
  const double norm = std::sqrt((2.0 * l + 1.0) / (4.0 * std::numbers::pi) * factorial_ratio(l, am));
  if (m == 0) return norm * p;
  if (m > 0) return std::numbers::sqrt2 * norm * p * std::cos(am * phi);
  return std::numbers::sqrt2 * norm * p * std::sin(am * phi);
}

AnalyticEigenpair analytic_eigenpair(ManifoldKind kind, std::size_t index) {
  AnalyticEigenpair pair;
  pair.index = index;
  switch (kind) {
    case ManifoldKind::circle: {
      const auto k = static_cast<double>((index + 1) / 2);
      pair.eigenvalue = k * k;
      if (index == 0) {
        pair.eigenfunction = [](std::span<const double>) { return 1.0; };
      } else if (index % 2 == 0) {
        pair.eigenfunction = [k](std::span<const double> u) { return std::cos(k * angle_of(u[0], u[1])); };
      } else {
        pair.eigenfunction = [k](std::span<const double> u) { return std::sin(k * angle_of(u[0], u[1])); };
      }
      return pair;
    }
    case ManifoldKind::sphere: {
      int l = static_cast<int>(std::sqrt(static_cast<double>(index)));
      while (static_cast<std::size_t>((l + 1) * (l + 1)) <= index) ++l;
      while (static_cast<std::size_t>(l * l) > index) --l;
      const int m = static_cast<int>(index) - l * l - l;
      pair.eigenvalue = static_cast<double>(l) * (l + 1);
      pair.eigenfunction = [l, m](std::span<const double> u) {
        return real_spherical_harmonic(l, m, u[0], u[1], u[2]);
      };
      return pair;
    }
  }
  throw ParameterError("analytic_eigenpair: unsupported manifold kind");
}

std::vector<int> synthetic_labels(const PointCloud& cloud, const LabelRule& rule) {
  std::vector<int> labels(cloud.size());
  const Eigen::Index last = cloud.points.cols() - 1;
  switch (rule.kind) {
    case LabelRule::Kind::hemisphere:
      for (std::size_t i = 0; i < labels.size(); ++i) {
        labels[i] = cloud.points(static_cast<Eigen::Index>(i), last) >= 0.0 ? 1 : 2;
      }
      return labels;
    case LabelRule::Kind::angular_sector: {
      if (cloud.kind != ManifoldKind::circle) {
        throw ParameterError("angular_sector labels are only defined on the circle");
      }
      if (rule.classes < 1) throw ParameterError("angular_sector needs at least one class");
      const double arc = kTwoPi / rule.classes;
      for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        const double theta = angle_of(cloud.points(r, 0), cloud.points(r, 1));
        const int sector = std::min(static_cast<int>(theta / arc), rule.classes - 1);
        labels[i] = sector + 1;
      }
      return labels;
    }
  }
  throw ParameterError("synthetic_labels: unknown rule");
}

}  // namespace geossl::manifold

#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace geossl::manifold {

enum class ManifoldKind { circle, sphere };

std::string_view to_string(ManifoldKind kind);
ManifoldKind parse_manifold_kind(std::string_view name);

// Intrinsic dimension d; the ambient dimension is d + 1.
int intrinsic_dim(ManifoldKind kind);

// Points sampled uniformly from the unit circle in R^2 or unit sphere in R^3.
struct PointCloud {
  Eigen::MatrixXd points;  // n x (d + 1), every row has unit norm
  ManifoldKind kind = ManifoldKind::circle;
  int intrinsic_dim = 1;
  std::uint64_t seed = 0;

  std::size_t size() const { return static_cast<std::size_t>(points.rows()); }
};

// i.i.d. uniform samples w.r.t. surface measure, deterministic in seed.
// Circle: theta ~ U[0, 2pi). Sphere: normalized standard Gaussian triples.
PointCloud sample_manifold(ManifoldKind kind, std::size_t n, std::uint64_t seed);

// Laplace-Beltrami eigenpair in a fixed enumeration.
//
// Circle: index 0 is the constant; index 2k holds cos(k theta) and index
// 2k - 1 holds sin(k theta), both with eigenvalue k^2.
// Sphere: degree-major real spherical harmonics, index = l^2 + l + m with
// m in [-l, l], eigenvalue l (l + 1), orthonormal in L2(S^2).
struct AnalyticEigenpair {
  std::size_t index = 0;
  double eigenvalue = 0.0;
  std::function<double(std::span<const double>)> eigenfunction;

  double operator()(std::span<const double> point) const { return eigenfunction(point); }
};

AnalyticEigenpair analytic_eigenpair(ManifoldKind kind, std::size_t index);

// Slot of cos(k theta) (or the m = 0 harmonic of degree l on the sphere).
std::size_t circle_cosine_index(std::size_t k);
std::size_t sphere_index(int degree, int order);

// Real spherical harmonic Y_lm evaluated at a unit vector.
double real_spherical_harmonic(int degree, int order, double x, double y, double z);

struct LabelRule {
  enum class Kind { hemisphere, angular_sector };
  Kind kind = Kind::hemisphere;
  int classes = 2;  // sector count for angular_sector

  static LabelRule hemisphere() { return {Kind::hemisphere, 2}; }
  static LabelRule angular_sector(int classes) { return {Kind::angular_sector, classes}; }
};

// Labels in {1..C}. hemisphere: last coordinate >= 0 -> 1, else 2.
// angular_sector(C): circle split into C equal arcs starting at theta = 0.
std::vector<int> synthetic_labels(const PointCloud& cloud, const LabelRule& rule);

}  // namespace geossl::manifold

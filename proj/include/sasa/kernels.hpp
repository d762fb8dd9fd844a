#pragma once

// Mixture component kernels p(y | u) and the finite candidate grids that
// supports are drawn from.

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace sasa {

enum class KernelFamily { PoissonRate, GaussianLocation, GaussianLocationScale };

std::string_view to_string(KernelFamily family);
/// Accepts the CLI names "poisson", "gauss-loc" and "gauss-locscale".
KernelFamily parse_kernel_family(std::string_view name);

/// A resolved candidate parameter. `location` is the Poisson rate or the
/// Gaussian mean; `variance` is used by location-scale kernels only.
struct SupportPoint {
  std::size_t index = 0;
  double location = 0.0;
  double variance = 0.0;

  friend bool operator==(const SupportPoint&, const SupportPoint&) = default;
};

class KernelSpec {
 public:
  static KernelSpec poisson();
  static KernelSpec gaussian_location(double sigma);
  static KernelSpec gaussian_location_scale();

  KernelFamily family() const { return family_; }
  /// Fixed standard deviation of a GaussianLocation kernel, 0 otherwise.
  double sigma() const { return sigma_; }
  /// Number of grid axes the kernel's parameter lives on.
  int parameter_dims() const { return family_ == KernelFamily::GaussianLocationScale ? 2 : 1; }
  bool is_count() const { return family_ == KernelFamily::PoissonRate; }

  /// Throws InvalidInput unless y lies in the kernel's domain.
  void check_observation(double y) const;
  void check_support_point(const SupportPoint& u) const;

  /// log p(y | u). May be -inf (Poisson rate 0 at y > 0), never NaN.
  double log_density(double y, const SupportPoint& u) const;
  double density(double y, const SupportPoint& u) const;

  /// Mean and variance of the kernel distribution at u.
  double mean(const SupportPoint& u) const;
  double variance(const SupportPoint& u) const;

 private:
  KernelSpec(KernelFamily family, double sigma) : family_(family), sigma_(sigma) {}

  KernelFamily family_;
  double sigma_;
};

/// Finite candidate set. One-dimensional grids hold rates or locations;
/// two-dimensional grids are the lattice axis1 x axis2 where axis2 holds
/// standard deviations. Lattice index = location_index * S2 + scale_index.
class Grid {
 public:
  static Grid one_d(std::vector<double> axis1);
  static Grid two_d(std::vector<double> axis1, std::vector<double> scales);
  /// `count` equispaced values from lo to hi inclusive.
  static std::vector<double> equispaced(double lo, double hi, std::size_t count);

  int dims() const { return axis2_.empty() ? 1 : 2; }
  std::size_t size() const { return axis1_.size() * (axis2_.empty() ? 1 : axis2_.size()); }
  std::size_t size1() const { return axis1_.size(); }
  /// Number of scales; 1 for one-dimensional grids.
  std::size_t size2() const { return axis2_.empty() ? 1 : axis2_.size(); }
  const std::vector<double>& axis1() const { return axis1_; }
  const std::vector<double>& axis2() const { return axis2_; }

  std::size_t lattice_index(std::size_t location, std::size_t scale) const;
  std::pair<std::size_t, std::size_t> coordinates(std::size_t index) const;
  SupportPoint resolve(std::size_t index) const;
  std::vector<SupportPoint> resolve(std::span<const std::size_t> indices) const;

  /// Throws InvalidInput if the grid parameters are outside the kernel's
  /// parameter space or the dimensions do not match.
  void check_compatible(const KernelSpec& kernel) const;

 private:
  Grid(std::vector<double> axis1, std::vector<double> axis2);

  std::vector<double> axis1_;
  std::vector<double> axis2_;
};

/// Sum over the support of p(y | u) f(u). Returns 0 for an empty support.
double mixture_density(const KernelSpec& kernel, std::span<const SupportPoint> support,
                       std::span<const double> weights, double y);

/// log of mixture_density, computed by log-sum-exp. -inf for an empty support.
double log_mixture_density(const KernelSpec& kernel, std::span<const SupportPoint> support,
                           std::span<const double> weights, double y);

double log_sum_exp(std::span<const double> values);

}  // namespace sasa

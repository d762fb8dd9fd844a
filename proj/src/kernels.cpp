#include "sasa/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "sasa/error.hpp"

namespace sasa {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
const double kLogSqrtTwoPi = 0.5 * std::log(2.0 * std::numbers::pi);

double gaussian_log_density(double y, double mean, double variance) {
  const double z = y - mean;
  return -0.5 * z * z / variance - 0.5 * std::log(variance) - kLogSqrtTwoPi;
}

void check_increasing(const std::vector<double>& axis, const char* name) {
  if (axis.empty()) {
    throw InvalidInput(std::string("grid ") + name + " is empty");
  }
  for (std::size_t i = 0; i < axis.size(); ++i) {
    if (!std::isfinite(axis[i])) {
      throw InvalidInput(std::string("grid ") + name + " has a non-finite value");
    }
    if (i > 0 && !(axis[i] > axis[i - 1])) {
      std::ostringstream msg;
      msg << "grid " << name << " must be strictly increasing (position " << i << ")";
      throw InvalidInput(msg.str());
    }
  }
}

}  // namespace

std::string_view to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::PoissonRate: return "poisson";
    case KernelFamily::GaussianLocation: return "gauss-loc";
    case KernelFamily::GaussianLocationScale: return "gauss-locscale";
  }
  return "unknown";
}

KernelFamily parse_kernel_family(std::string_view name) {
  if (name == "poisson") return KernelFamily::PoissonRate;
  if (name == "gauss-loc") return KernelFamily::GaussianLocation;
  if (name == "gauss-locscale") return KernelFamily::GaussianLocationScale;
  throw InvalidInput("unknown kernel family '" + std::string(name) + "'");
}

KernelSpec KernelSpec::poisson() { return KernelSpec(KernelFamily::PoissonRate, 0.0); }

KernelSpec KernelSpec::gaussian_location(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw InvalidInput("gaussian location kernel needs a finite scale > 0");
  }
  return KernelSpec(KernelFamily::GaussianLocation, sigma);
}

KernelSpec KernelSpec::gaussian_location_scale() {
  return KernelSpec(KernelFamily::GaussianLocationScale, 0.0);
}

void KernelSpec::check_observation(double y) const {
  if (!std::isfinite(y)) {
    throw InvalidInput("observation is not finite");
  }
  if (family_ == KernelFamily::PoissonRate && (y < 0.0 || std::floor(y) != y)) {
    std::ostringstream msg;
    msg << "poisson kernel needs nonnegative integer counts, got " << y;
    throw InvalidInput(msg.str());
  }
}

void KernelSpec::check_support_point(const SupportPoint& u) const {
  if (!std::isfinite(u.location)) {
    throw InvalidInput("support point location is not finite");
  }
  switch (family_) {
    case KernelFamily::PoissonRate:
      if (u.location < 0.0) throw InvalidInput("poisson rate must be >= 0");
      break;
    case KernelFamily::GaussianLocation:
      break;
    case KernelFamily::GaussianLocationScale:
      if (!(u.variance > 0.0) || !std::isfinite(u.variance)) {
        throw InvalidInput("location-scale support point needs variance > 0");
      }
      break;
  }
}

double KernelSpec::log_density(double y, const SupportPoint& u) const {
  switch (family_) {
    case KernelFamily::PoissonRate: {
      if (u.location == 0.0) return y == 0.0 ? 0.0 : kNegInf;
      return y * std::log(u.location) - u.location - std::lgamma(y + 1.0);
    }
    case KernelFamily::GaussianLocation:
      return gaussian_log_density(y, u.location, sigma_ * sigma_);
    case KernelFamily::GaussianLocationScale:
      return gaussian_log_density(y, u.location, u.variance);
  }
  return kNegInf;
}

double KernelSpec::density(double y, const SupportPoint& u) const {
  check_observation(y);
  return std::exp(log_density(y, u));
}

double KernelSpec::mean(const SupportPoint& u) const { return u.location; }

double KernelSpec::variance(const SupportPoint& u) const {
  switch (family_) {
    case KernelFamily::PoissonRate: return u.location;
    case KernelFamily::GaussianLocation: return sigma_ * sigma_;
    case KernelFamily::GaussianLocationScale: return u.variance;
  }
  return 0.0;
}

Grid::Grid(std::vector<double> axis1, std::vector<double> axis2)
    : axis1_(std::move(axis1)), axis2_(std::move(axis2)) {}

Grid Grid::one_d(std::vector<double> axis1) {
  check_increasing(axis1, "axis1");
  return Grid(std::move(axis1), {});
}

Grid Grid::two_d(std::vector<double> axis1, std::vector<double> scales) {
  check_increasing(axis1, "axis1");
  check_increasing(scales, "axis2");
  if (!(scales.front() > 0.0)) {
    throw InvalidInput("grid axis2 (scales) must be strictly positive");
  }
  return Grid(std::move(axis1), std::move(scales));
}

std::vector<double> Grid::equispaced(double lo, double hi, std::size_t count) {
  if (count == 0) throw InvalidInput("equispaced grid needs count >= 1");
  if (count == 1) return {lo};
  if (!(hi > lo)) throw InvalidInput("equispaced grid needs hi > lo");
  std::vector<double> values(count);
  const double step = (hi - lo) / static_cast<double>(count - 1);
  for (std::size_t i = 0; i < count; ++i) {
    values[i] = lo + step * static_cast<double>(i);
  }
  values.back() = hi;
  return values;
}

std::size_t Grid::lattice_index(std::size_t location, std::size_t scale) const {
  if (location >= size1() || scale >= size2()) {
    throw InvalidInput("lattice coordinates out of range");
  }
  return location * size2() + scale;
}

std::pair<std::size_t, std::size_t> Grid::coordinates(std::size_t index) const {
  if (index >= size()) throw InvalidInput("grid index out of range");
  return {index / size2(), index % size2()};
}

SupportPoint Grid::resolve(std::size_t index) const {
  const auto [loc, scale] = coordinates(index);
  SupportPoint point{index, axis1_[loc], 0.0};
  if (dims() == 2) point.variance = axis2_[scale] * axis2_[scale];
  return point;
}

std::vector<SupportPoint> Grid::resolve(std::span<const std::size_t> indices) const {
  std::vector<SupportPoint> points;
  points.reserve(indices.size());
  for (std::size_t index : indices) points.push_back(resolve(index));
  return points;
}

void Grid::check_compatible(const KernelSpec& kernel) const {
  if (kernel.parameter_dims() != dims()) {
    std::ostringstream msg;
    msg << "kernel " << to_string(kernel.family()) << " needs a " << kernel.parameter_dims()
        << "-d grid, got " << dims() << "-d";
    throw InvalidInput(msg.str());
  }
  if (kernel.is_count() && axis1_.front() < 0.0) {
    throw InvalidInput("poisson grid rates must be >= 0");
  }
}

double log_sum_exp(std::span<const double> values) {
  if (values.empty()) return kNegInf;
  const double top = *std::max_element(values.begin(), values.end());
  if (top == kNegInf) return kNegInf;
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - top);
  return top + std::log(sum);
}

double mixture_density(const KernelSpec& kernel, std::span<const SupportPoint> support,
                       std::span<const double> weights, double y) {
  if (support.size() != weights.size()) {
    throw InvalidInput("mixture weights and support differ in length");
  }
  kernel.check_observation(y);
  double total = 0.0;
  for (std::size_t j = 0; j < support.size(); ++j) {
    total += std::exp(kernel.log_density(y, support[j])) * weights[j];
  }
  return total;
}

double log_mixture_density(const KernelSpec& kernel, std::span<const SupportPoint> support,
                           std::span<const double> weights, double y) {
  if (support.size() != weights.size()) {
    throw InvalidInput("mixture weights and support differ in length");
  }
  kernel.check_observation(y);
  std::vector<double> terms(support.size());
  for (std::size_t j = 0; j < support.size(); ++j) {
    terms[j] = kernel.log_density(y, support[j]) + std::log(weights[j]);
  }
  return log_sum_exp(terms);
}

}  // namespace sasa

#pragma once

// Bayesian marginal likelihood of a fixed support under a finite Dirichlet
// prior on the mixing weights. Used to check the recursion-based
// approximation on small problems.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "sasa/kernels.hpp"
#include "sasa/recursion.hpp"

namespace sasa {

struct DirichletSpec {
  double alpha0 = 1.0;
  MixingWeights f0;

  void validate(std::size_t support_size) const;
  /// alpha0 = 1/w_1 - 1 = 2^gamma - 1 with a uniform base measure, the prior
  /// whose one-step posterior mean coincides with the first recursion step.
  static DirichletSpec matching_recursion(std::size_t support_size, double gamma);
};

inline constexpr std::size_t kExactMaxObservations = 10;
inline constexpr std::size_t kExactMaxSupport = 4;

/// log L(U) by summing over every allocation of the observations to support
/// points. Refuses (SizeLimitExceeded) when n > 10 or |U| > 4.
double exact_log_marginal(std::span<const SupportPoint> support, std::span<const double> data,
                          const DirichletSpec& spec, const KernelSpec& kernel);

struct ImputationEstimate {
  double log_estimate = 0.0;
  /// Jackknife standard error of log_estimate.
  double standard_error = 0.0;
  std::size_t paths = 0;
};

/// Sequential imputation: each path allocates the observations in turn from
/// the Polya-urn predictive and carries the product of predictive
/// normalizers as its weight. The weight average is unbiased for L(U).
/// Path j draws from substream j of `seed`.
ImputationEstimate sequential_imputation_marginal(std::span<const SupportPoint> support,
                                                  std::span<const double> data,
                                                  const DirichletSpec& spec,
                                                  const KernelSpec& kernel, std::size_t n_paths,
                                                  std::uint64_t seed);

/// Posterior mean of the weights after one observation.
MixingWeights polya_one_step(std::span<const SupportPoint> support, double y,
                             const DirichletSpec& spec, const KernelSpec& kernel);

/// Exact posterior means E(f | Y_1..Y_i) for i = 0..n by enumeration (same
/// size guard as exact_log_marginal).
std::vector<MixingWeights> exact_posterior_means(std::span<const SupportPoint> support,
                                                 std::span<const double> data,
                                                 const DirichletSpec& spec,
                                                 const KernelSpec& kernel);

/// L1 distance between the recursion iterate f_i (started at spec.f0) and
/// the exact posterior mean after i observations, for i = 1..n.
std::vector<double> filter_discrepancy(std::span<const SupportPoint> support,
                                       std::span<const double> data, const DirichletSpec& spec,
                                       double gamma, const KernelSpec& kernel);

}  // namespace sasa

#pragma once

// Predictive recursion over a fixed finite support, the permutation-averaged
// log marginal likelihood it induces, and the normalized KL diagnostic.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "sasa/kernels.hpp"

namespace sasa {

/// Probability vector over the active support points, strictly positive.
class MixingWeights {
 public:
  MixingWeights() = default;
  /// Validates positivity and that the entries sum to 1 within 1e-10.
  explicit MixingWeights(std::vector<double> values);
  static MixingWeights uniform(std::size_t k);
  /// Skips validation; for values produced by the recursion itself.
  static MixingWeights trusted(std::vector<double> values);

  std::span<const double> values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }
  double operator[](std::size_t i) const { return values_[i]; }
  auto begin() const { return values_.begin(); }
  auto end() const { return values_.end(); }

 private:
  std::vector<double> values_;
};

struct PRConfig {
  double gamma = 0.67;
  std::size_t n_permutations = 100;
  std::uint64_t permutation_seed = 0;
  /// Empty means uniform over the active support. Otherwise either one
  /// weight per active support point, or one weight per grid point that is
  /// restricted to the active support and renormalized.
  std::vector<double> f0;

  void validate() const;
  MixingWeights initial_weights(std::size_t support_size) const;
  MixingWeights initial_weights(std::span<const std::size_t> grid_indices,
                                std::size_t grid_size) const;
};

/// w_i = (i + 1)^(-gamma) for the i-th processed observation, i >= 1.
double pr_weight(std::size_t i, double gamma);

struct PrStep {
  MixingWeights weights;
  double predictive = 0.0;      // m_{i-1}(y); may underflow to 0
  double log_predictive = 0.0;  // log m_{i-1}(y), always finite
};

/// One step of the recursion. w may be anywhere in [0, 1].
PrStep pr_update(const MixingWeights& f, std::span<const SupportPoint> support, double y,
                 double w, const KernelSpec& kernel);

/// Fixed random orderings of {0, ..., n-1}, generated once per search run.
class PermutationSet {
 public:
  PermutationSet(std::size_t n, std::size_t count, std::uint64_t seed);
  /// Validates that every entry is a permutation of {0, ..., n-1}.
  explicit PermutationSet(std::vector<std::vector<std::size_t>> orders);

  std::size_t count() const { return orders_.size(); }
  std::size_t length() const { return n_; }
  std::span<const std::size_t> order(std::size_t p) const { return orders_[p]; }
  const std::vector<std::vector<std::size_t>>& orders() const { return orders_; }

 private:
  std::size_t n_ = 0;
  std::vector<std::vector<std::size_t>> orders_;
};

struct OrderResult {
  double log_marginal = 0.0;
  MixingWeights final_weights;
};

/// Runs the recursion through `data` in the given order (identity if
/// `order` is empty), accumulating sum_i log m_{i-1}(Y_i).
OrderResult run_recursion(std::span<const SupportPoint> support, std::span<const double> data,
                          std::span<const std::size_t> order, const PRConfig& cfg,
                          const KernelSpec& kernel);

double log_marginal_one_order(std::span<const SupportPoint> support,
                              std::span<const double> data, const PRConfig& cfg,
                              const KernelSpec& kernel);

double log_marginal_averaged(std::span<const SupportPoint> support,
                             std::span<const double> data, const PermutationSet& perms,
                             const PRConfig& cfg, const KernelSpec& kernel);

/// (sum_i log m(Y_i) - l_n(U)) / n with the permutation-averaged l_n.
double kn_diagnostic(std::span<const SupportPoint> support, std::span<const double> data,
                     const PermutationSet& perms, const PRConfig& cfg, const KernelSpec& kernel,
                     const std::function<double(double)>& true_density);

/// Mean of `values` that does not depend on their order: the values are
/// sorted before compensated summation.
double order_free_mean(std::span<const double> values);

/// Evaluates the averaged log marginal likelihood of many supports drawn
/// from one grid. Kernel values are tabulated once in log space; each row is
/// rescaled by its maximum over the grid so the recursion runs on plain
/// products, falling back to log-space steps for rows where the rescaled
/// predictive underflows.
class MarginalEvaluator {
 public:
  MarginalEvaluator(const KernelSpec& kernel, const Grid& grid, std::vector<double> data,
                    PermutationSet perms, PRConfig cfg);

  struct Evaluation {
    double mean = 0.0;
    double stddev = 0.0;
    std::vector<double> per_permutation;
    /// Average over permutations of the final weights f_n.
    MixingWeights weights;
  };

  /// Averaged l_n for the support given by sorted grid indices. Throws
  /// NumericalDegeneracy if some predictive is exactly zero.
  double log_marginal(std::span<const std::size_t> active) const;
  Evaluation evaluate(std::span<const std::size_t> active) const;

  std::size_t sample_size() const { return data_.size(); }
  std::size_t grid_size() const { return grid_size_; }
  const PermutationSet& permutations() const { return perms_; }
  const PRConfig& config() const { return cfg_; }

 private:
  double run_order(std::span<const std::size_t> active, std::span<const double> compact,
                   std::span<const std::size_t> order, std::vector<double>& f) const;

  std::vector<double> data_;
  PermutationSet perms_;
  PRConfig cfg_;
  std::size_t grid_size_;
  std::vector<double> log_kernel_;     // n x S, row-major
  std::vector<double> scaled_kernel_;  // exp(log_kernel - row_offset)
  std::vector<double> row_offset_;
  std::vector<double> step_weights_;   // w_1, ..., w_n
};

}  // namespace sasa

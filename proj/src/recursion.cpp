#include "sasa/recursion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "sasa/error.hpp"
#include "sasa/rng.hpp"

namespace sasa {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
// Below this the rescaled predictive is recomputed in log space.
constexpr double kRescaledFloor = 1e-250;

void check_weight_vector(std::span<const double> values, const char* what) {
  double total = 0.0;
  for (double v : values) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw InvalidInput(std::string(what) + " must be strictly positive");
    }
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-10) {
    std::ostringstream msg;
    msg << what << " must sum to 1 (sum is " << total << ")";
    throw InvalidInput(msg.str());
  }
}

[[noreturn]] void throw_degenerate(double y) {
  std::ostringstream msg;
  msg << "predictive density is zero at observation y = " << y
      << " (every support kernel vanishes)";
  throw NumericalDegeneracy(msg.str());
}

}  // namespace

MixingWeights::MixingWeights(std::vector<double> values) : values_(std::move(values)) {
  check_weight_vector(values_, "mixing weights");
}

MixingWeights MixingWeights::uniform(std::size_t k) {
  if (k == 0) throw InvalidInput("uniform weights need a nonempty support");
  return trusted(std::vector<double>(k, 1.0 / static_cast<double>(k)));
}

MixingWeights MixingWeights::trusted(std::vector<double> values) {
  MixingWeights w;
  w.values_ = std::move(values);
  return w;
}

void PRConfig::validate() const {
  if (!(gamma > 0.5 && gamma < 1.0)) {
    throw InvalidInput("predictive recursion gamma must lie strictly inside (0.5, 1)");
  }
  if (n_permutations < 1) throw InvalidInput("n_permutations must be >= 1");
  if (!f0.empty()) check_weight_vector(f0, "explicit f0");
}

MixingWeights PRConfig::initial_weights(std::size_t support_size) const {
  if (f0.empty()) return MixingWeights::uniform(support_size);
  if (f0.size() != support_size) {
    throw InvalidInput("explicit f0 length does not match the support size");
  }
  return MixingWeights(f0);
}

MixingWeights PRConfig::initial_weights(std::span<const std::size_t> grid_indices,
                                        std::size_t grid_size) const {
  if (f0.empty() || f0.size() == grid_indices.size()) {
    return initial_weights(grid_indices.size());
  }
  if (f0.size() != grid_size) {
    throw InvalidInput("explicit f0 must have one weight per support point or per grid point");
  }
  std::vector<double> restricted;
  restricted.reserve(grid_indices.size());
  double total = 0.0;
  for (std::size_t s : grid_indices) {
    restricted.push_back(f0.at(s));
    total += f0[s];
  }
  for (double& v : restricted) v /= total;
  return MixingWeights::trusted(std::move(restricted));
}

double pr_weight(std::size_t i, double gamma) {
  if (i < 1) throw InvalidInput("recursion weights are indexed from 1");
  return std::pow(static_cast<double>(i) + 1.0, -gamma);
}

PrStep pr_update(const MixingWeights& f, std::span<const SupportPoint> support, double y,
                 double w, const KernelSpec& kernel) {
  if (support.empty()) throw InvalidInput("pr_update needs a nonempty support");
  if (f.size() != support.size()) {
    throw InvalidInput("mixing weights and support differ in length");
  }
  if (!(w >= 0.0 && w <= 1.0)) throw InvalidInput("recursion weight must lie in [0, 1]");
  kernel.check_observation(y);

  std::vector<double> log_terms(support.size());
  for (std::size_t j = 0; j < support.size(); ++j) {
    log_terms[j] = kernel.log_density(y, support[j]) + std::log(f[j]);
  }
  const double log_m = log_sum_exp(log_terms);
  if (log_m == kNegInf) throw_degenerate(y);

  std::vector<double> next(support.size());
  for (std::size_t j = 0; j < support.size(); ++j) {
    next[j] = (1.0 - w) * f[j] + w * std::exp(log_terms[j] - log_m);
  }
  return {MixingWeights::trusted(std::move(next)), std::exp(log_m), log_m};
}

PermutationSet::PermutationSet(std::size_t n, std::size_t count, std::uint64_t seed) : n_(n) {
  if (count < 1) throw InvalidInput("a permutation set needs at least one permutation");
  orders_.reserve(count);
  for (std::size_t p = 0; p < count; ++p) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng = make_rng(seed, p);
    for (std::size_t i = n; i > 1; --i) {
      std::swap(order[i - 1], order[uniform_index(rng, i)]);
    }
    orders_.push_back(std::move(order));
  }
}

PermutationSet::PermutationSet(std::vector<std::vector<std::size_t>> orders)
    : orders_(std::move(orders)) {
  if (orders_.empty()) throw InvalidInput("a permutation set needs at least one permutation");
  n_ = orders_.front().size();
  for (const auto& order : orders_) {
    if (order.size() != n_) throw InvalidInput("permutations differ in length");
    std::vector<bool> seen(n_, false);
    for (std::size_t i : order) {
      if (i >= n_ || seen[i]) throw InvalidInput("entry is not a permutation");
      seen[i] = true;
    }
  }
}

OrderResult run_recursion(std::span<const SupportPoint> support, std::span<const double> data,
                          std::span<const std::size_t> order, const PRConfig& cfg,
                          const KernelSpec& kernel) {
  if (support.empty()) throw InvalidInput("log marginal needs a nonempty support");
  if (!order.empty() && order.size() != data.size()) {
    throw InvalidInput("data order length does not match the data");
  }
  cfg.validate();
  MixingWeights f = cfg.initial_weights(support.size());
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double y = data[order.empty() ? i : order[i]];
    PrStep step = pr_update(f, support, y, pr_weight(i + 1, cfg.gamma), kernel);
    total += step.log_predictive;
    f = std::move(step.weights);
  }
  return {total, std::move(f)};
}

double log_marginal_one_order(std::span<const SupportPoint> support,
                              std::span<const double> data, const PRConfig& cfg,
                              const KernelSpec& kernel) {
  return run_recursion(support, data, {}, cfg, kernel).log_marginal;
}

double order_free_mean(std::span<const double> values) {
  if (values.empty()) throw InvalidInput("mean of an empty list");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  // Neumaier summation.
  double sum = 0.0;
  double carry = 0.0;
  for (double v : sorted) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v)) {
      carry += (sum - t) + v;
    } else {
      carry += (v - t) + sum;
    }
    sum = t;
  }
  return (sum + carry) / static_cast<double>(sorted.size());
}

double log_marginal_averaged(std::span<const SupportPoint> support,
                             std::span<const double> data, const PermutationSet& perms,
                             const PRConfig& cfg, const KernelSpec& kernel) {
  if (perms.length() != data.size()) {
    throw InvalidInput("permutation length does not match the data");
  }
  std::vector<double> values;
  values.reserve(perms.count());
  for (std::size_t p = 0; p < perms.count(); ++p) {
    values.push_back(run_recursion(support, data, perms.order(p), cfg, kernel).log_marginal);
  }
  return order_free_mean(values);
}

double kn_diagnostic(std::span<const SupportPoint> support, std::span<const double> data,
                     const PermutationSet& perms, const PRConfig& cfg, const KernelSpec& kernel,
                     const std::function<double(double)>& true_density) {
  if (data.empty()) throw InvalidInput("K_n needs at least one observation");
  double truth = 0.0;
  for (double y : data) {
    const double m = true_density(y);
    if (!(m > 0.0)) throw InvalidInput("true density must be positive at every observation");
    truth += std::log(m);
  }
  const double ln = log_marginal_averaged(support, data, perms, cfg, kernel);
  const double n = static_cast<double>(data.size());
  return truth / n - ln / n;
}

MarginalEvaluator::MarginalEvaluator(const KernelSpec& kernel, const Grid& grid,
                                     std::vector<double> data, PermutationSet perms,
                                     PRConfig cfg)
    : data_(std::move(data)),
      perms_(std::move(perms)),
      cfg_(std::move(cfg)),
      grid_size_(grid.size()) {
  cfg_.validate();
  grid.check_compatible(kernel);
  if (perms_.length() != data_.size()) {
    throw InvalidInput("permutation length does not match the data");
  }
  const std::size_t n = data_.size();
  const std::size_t S = grid_size_;
  log_kernel_.resize(n * S);
  scaled_kernel_.resize(n * S);
  row_offset_.resize(n);
  std::vector<SupportPoint> points;
  points.reserve(S);
  for (std::size_t s = 0; s < S; ++s) points.push_back(grid.resolve(s));
  for (std::size_t i = 0; i < n; ++i) {
    kernel.check_observation(data_[i]);
    double top = kNegInf;
    for (std::size_t s = 0; s < S; ++s) {
      const double lp = kernel.log_density(data_[i], points[s]);
      log_kernel_[i * S + s] = lp;
      top = std::max(top, lp);
    }
    row_offset_[i] = top == kNegInf ? 0.0 : top;
    for (std::size_t s = 0; s < S; ++s) {
      scaled_kernel_[i * S + s] = std::exp(log_kernel_[i * S + s] - row_offset_[i]);
    }
  }
  step_weights_.resize(n);
  for (std::size_t i = 0; i < n; ++i) step_weights_[i] = pr_weight(i + 1, cfg_.gamma);
}

double MarginalEvaluator::run_order(std::span<const std::size_t> active,
                                    std::span<const double> compact,
                                    std::span<const std::size_t> order,
                                    std::vector<double>& f) const {
  const std::size_t k = active.size();
  const std::size_t S = grid_size_;
  double total = 0.0;
  std::vector<double> log_terms;
  for (std::size_t j = 0; j < order.size(); ++j) {
    const std::size_t i = order[j];
    const double w = step_weights_[j];
    const double* row = compact.data() + i * k;
    double m = 0.0;
    for (std::size_t u = 0; u < k; ++u) m += row[u] * f[u];
    if (m >= kRescaledFloor) {
      total += std::log(m) + row_offset_[i];
      const double keep = 1.0 - w;
      const double gain = w / m;
      for (std::size_t u = 0; u < k; ++u) f[u] *= keep + gain * row[u];
      continue;
    }
    log_terms.resize(k);
    for (std::size_t u = 0; u < k; ++u) {
      log_terms[u] = log_kernel_[i * S + active[u]] + std::log(f[u]);
    }
    const double log_m = log_sum_exp(log_terms);
    if (log_m == kNegInf) throw_degenerate(data_[i]);
    total += log_m;
    for (std::size_t u = 0; u < k; ++u) {
      f[u] = (1.0 - w) * f[u] + w * std::exp(log_terms[u] - log_m);
    }
  }
  return total;
}

double MarginalEvaluator::log_marginal(std::span<const std::size_t> active) const {
  return evaluate(active).mean;
}

MarginalEvaluator::Evaluation MarginalEvaluator::evaluate(
    std::span<const std::size_t> active) const {
  if (active.empty()) throw InvalidInput("log marginal needs a nonempty support");
  const std::size_t n = data_.size();
  const std::size_t k = active.size();
  for (std::size_t idx : active) {
    if (idx >= grid_size_) throw InvalidInput("support index outside the grid");
  }
  std::vector<double> compact(n * k);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t u = 0; u < k; ++u) {
      compact[i * k + u] = scaled_kernel_[i * grid_size_ + active[u]];
    }
  }
  const MixingWeights start = cfg_.initial_weights(active, grid_size_);
  Evaluation out;
  out.per_permutation.reserve(perms_.count());
  std::vector<double> weight_sum(k, 0.0);
  std::vector<double> f;
  for (std::size_t p = 0; p < perms_.count(); ++p) {
    f.assign(start.begin(), start.end());
    out.per_permutation.push_back(run_order(active, compact, perms_.order(p), f));
    for (std::size_t u = 0; u < k; ++u) weight_sum[u] += f[u];
  }
  out.mean = order_free_mean(out.per_permutation);
  double ss = 0.0;
  for (double v : out.per_permutation) ss += (v - out.mean) * (v - out.mean);
  out.stddev = out.per_permutation.size() > 1
                   ? std::sqrt(ss / static_cast<double>(out.per_permutation.size() - 1))
                   : 0.0;
  for (double& v : weight_sum) v /= static_cast<double>(perms_.count());
  out.weights = MixingWeights::trusted(std::move(weight_sum));
  return out;
}

}  // namespace sasa

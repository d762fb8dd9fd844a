#include "sasa/dirichlet_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "sasa/error.hpp"
#include "sasa/rng.hpp"

namespace sasa {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct RunningLogSum {
  double top = kNegInf;
  double sum = 0.0;

  void add(double v) {
    if (v == kNegInf) return;
    if (v > top) {
      sum = sum * std::exp(top - v) + 1.0;
      top = v;
    } else {
      sum += std::exp(v - top);
    }
  }
  double value() const { return top == kNegInf ? kNegInf : top + std::log(sum); }
};

void check_enumerable(std::size_t k, std::size_t n) {
  if (n > kExactMaxObservations || k > kExactMaxSupport) {
    std::ostringstream msg;
    msg << "exact enumeration limited to n <= " << kExactMaxObservations << " and |U| <= "
        << kExactMaxSupport << " (got n = " << n << ", |U| = " << k << ")";
    throw SizeLimitExceeded(msg.str());
  }
}

std::vector<double> log_kernel_table(std::span<const SupportPoint> support,
                                     std::span<const double> data, const KernelSpec& kernel) {
  std::vector<double> table(data.size() * support.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    kernel.check_observation(data[i]);
    for (std::size_t u = 0; u < support.size(); ++u) {
      table[i * support.size() + u] = kernel.log_density(data[i], support[u]);
    }
  }
  return table;
}

// Calls visit(log joint weight, counts) for every allocation of the first n
// observations: log prod_i p(Y_i | z_i) + log prod_u (alpha0 f0(u))^(c_u).
// Allocations run in mixed-radix order with incremental updates.
template <typename Visit>
void enumerate_allocations(std::span<const double> log_kernel, std::size_t n, std::size_t k,
                           const DirichletSpec& spec, Visit&& visit) {
  std::vector<std::vector<double>> log_rising(k, std::vector<double>(n + 1, 0.0));
  for (std::size_t u = 0; u < k; ++u) {
    const double a = spec.alpha0 * spec.f0[u];
    for (std::size_t c = 1; c <= n; ++c) {
      log_rising[u][c] = log_rising[u][c - 1] + std::log(a + static_cast<double>(c - 1));
    }
  }
  std::vector<std::size_t> z(n, 0);
  std::vector<std::size_t> counts(k, 0);
  counts[0] = n;
  double log_like = 0.0;
  for (std::size_t i = 0; i < n; ++i) log_like += log_kernel[i * k];
  while (true) {
    double log_prior = 0.0;
    for (std::size_t u = 0; u < k; ++u) log_prior += log_rising[u][counts[u]];
    visit(log_like + log_prior, std::span<const std::size_t>(counts));
    std::size_t pos = 0;
    while (pos < n) {
      const std::size_t old = z[pos];
      const std::size_t next = old + 1 == k ? 0 : old + 1;
      z[pos] = next;
      --counts[old];
      ++counts[next];
      const double delta = log_kernel[pos * k + next] - log_kernel[pos * k + old];
      // -inf kernels make the difference undefined; recompute the row then.
      if (std::isfinite(delta)) {
        log_like += delta;
      } else {
        log_like = 0.0;
        for (std::size_t i = 0; i < n; ++i) log_like += log_kernel[i * k + z[i]];
      }
      if (next != 0) break;
      ++pos;
    }
    if (pos == n) return;
  }
}

double log_rising_factorial(double a, std::size_t m) {
  double total = 0.0;
  for (std::size_t c = 0; c < m; ++c) total += std::log(a + static_cast<double>(c));
  return total;
}

}  // namespace

void DirichletSpec::validate(std::size_t support_size) const {
  if (!(alpha0 > 0.0) || !std::isfinite(alpha0)) {
    throw InvalidInput("Dirichlet precision alpha0 must be finite and > 0");
  }
  if (f0.size() != support_size) {
    throw InvalidInput("Dirichlet base measure length does not match the support");
  }
  MixingWeights check(std::vector<double>(f0.begin(), f0.end()));
}

DirichletSpec DirichletSpec::matching_recursion(std::size_t support_size, double gamma) {
  return {1.0 / pr_weight(1, gamma) - 1.0, MixingWeights::uniform(support_size)};
}

double exact_log_marginal(std::span<const SupportPoint> support, std::span<const double> data,
                          const DirichletSpec& spec, const KernelSpec& kernel) {
  if (support.empty()) throw InvalidInput("marginal needs a nonempty support");
  const std::size_t k = support.size();
  const std::size_t n = data.size();
  check_enumerable(k, n);
  spec.validate(k);
  const std::vector<double> table = log_kernel_table(support, data, kernel);
  RunningLogSum total;
  enumerate_allocations(table, n, k, spec,
                        [&](double log_joint, std::span<const std::size_t>) { total.add(log_joint); });
  return total.value() - log_rising_factorial(spec.alpha0, n);
}

ImputationEstimate sequential_imputation_marginal(std::span<const SupportPoint> support,
                                                  std::span<const double> data,
                                                  const DirichletSpec& spec,
                                                  const KernelSpec& kernel, std::size_t n_paths,
                                                  std::uint64_t seed) {
  if (support.empty()) throw InvalidInput("marginal needs a nonempty support");
  if (n_paths < 1) throw InvalidInput("sequential imputation needs n_paths >= 1");
  const std::size_t k = support.size();
  const std::size_t n = data.size();
  spec.validate(k);
  const std::vector<double> table = log_kernel_table(support, data, kernel);
  std::vector<double> base(k);
  for (std::size_t u = 0; u < k; ++u) base[u] = spec.alpha0 * spec.f0[u];

  std::vector<double> log_weights(n_paths);
  std::vector<double> log_q(k);
  std::vector<double> counts(k);
  for (std::size_t path = 0; path < n_paths; ++path) {
    Rng rng = make_rng(seed, path);
    std::fill(counts.begin(), counts.end(), 0.0);
    double log_w = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double log_norm = std::log(spec.alpha0 + static_cast<double>(i));
      for (std::size_t u = 0; u < k; ++u) {
        log_q[u] = table[i * k + u] + std::log(base[u] + counts[u]) - log_norm;
      }
      const double log_pred = log_sum_exp(log_q);
      if (log_pred == kNegInf) {
        std::ostringstream msg;
        msg << "predictive density is zero at observation y = " << data[i];
        throw NumericalDegeneracy(msg.str());
      }
      log_w += log_pred;
      const double target = uniform01(rng);
      double running = 0.0;
      std::size_t pick = k - 1;
      for (std::size_t u = 0; u < k; ++u) {
        running += std::exp(log_q[u] - log_pred);
        if (target < running) {
          pick = u;
          break;
        }
      }
      counts[pick] += 1.0;
    }
    log_weights[path] = log_w;
  }

  ImputationEstimate out;
  out.paths = n_paths;
  const double top = *std::max_element(log_weights.begin(), log_weights.end());
  std::vector<double> shifted(n_paths);
  for (std::size_t j = 0; j < n_paths; ++j) shifted[j] = std::exp(log_weights[j] - top);
  double total = 0.0;
  for (double w : shifted) total += w;
  out.log_estimate = top + std::log(total / static_cast<double>(n_paths));
  if (n_paths == 1) return out;

  // Leave-one-out sums from prefix and suffix sums, avoiding total - w_j.
  std::vector<double> prefix(n_paths + 1, 0.0);
  std::vector<double> suffix(n_paths + 1, 0.0);
  for (std::size_t j = 0; j < n_paths; ++j) prefix[j + 1] = prefix[j] + shifted[j];
  for (std::size_t j = n_paths; j-- > 0;) suffix[j] = suffix[j + 1] + shifted[j];
  const double m = static_cast<double>(n_paths);
  std::vector<double> loo(n_paths);
  double loo_mean = 0.0;
  for (std::size_t j = 0; j < n_paths; ++j) {
    loo[j] = std::log((prefix[j] + suffix[j + 1]) / (m - 1.0));
    loo_mean += loo[j];
  }
  loo_mean /= m;
  double ss = 0.0;
  for (double v : loo) ss += (v - loo_mean) * (v - loo_mean);
  out.standard_error = std::sqrt((m - 1.0) / m * ss);
  return out;
}

MixingWeights polya_one_step(std::span<const SupportPoint> support, double y,
                             const DirichletSpec& spec, const KernelSpec& kernel) {
  if (support.empty()) throw InvalidInput("posterior mean needs a nonempty support");
  spec.validate(support.size());
  kernel.check_observation(y);
  std::vector<double> log_post(support.size());
  for (std::size_t u = 0; u < support.size(); ++u) {
    log_post[u] = kernel.log_density(y, support[u]) + std::log(spec.f0[u]);
  }
  const double log_m = log_sum_exp(log_post);
  if (log_m == kNegInf) throw NumericalDegeneracy("prior predictive is zero");
  const double prior_share = spec.alpha0 / (spec.alpha0 + 1.0);
  const double data_share = 1.0 / (spec.alpha0 + 1.0);
  std::vector<double> out(support.size());
  for (std::size_t u = 0; u < support.size(); ++u) {
    out[u] = prior_share * spec.f0[u] + data_share * std::exp(log_post[u] - log_m);
  }
  return MixingWeights::trusted(std::move(out));
}

std::vector<MixingWeights> exact_posterior_means(std::span<const SupportPoint> support,
                                                 std::span<const double> data,
                                                 const DirichletSpec& spec,
                                                 const KernelSpec& kernel) {
  if (support.empty()) throw InvalidInput("posterior mean needs a nonempty support");
  const std::size_t k = support.size();
  check_enumerable(k, data.size());
  spec.validate(k);
  const std::vector<double> table = log_kernel_table(support, data, kernel);
  std::vector<MixingWeights> means;
  means.push_back(spec.f0);
  for (std::size_t i = 1; i <= data.size(); ++i) {
    RunningLogSum evidence;
    std::vector<RunningLogSum> numer(k);
    const double denom = spec.alpha0 + static_cast<double>(i);
    enumerate_allocations(std::span<const double>(table).first(i * k), i, k, spec,
                          [&](double log_joint, std::span<const std::size_t> counts) {
                            evidence.add(log_joint);
                            for (std::size_t u = 0; u < k; ++u) {
                              const double share =
                                  (spec.alpha0 * spec.f0[u] + static_cast<double>(counts[u])) / denom;
                              numer[u].add(log_joint + std::log(share));
                            }
                          });
    std::vector<double> mean(k);
    for (std::size_t u = 0; u < k; ++u) mean[u] = std::exp(numer[u].value() - evidence.value());
    means.push_back(MixingWeights::trusted(std::move(mean)));
  }
  return means;
}

std::vector<double> filter_discrepancy(std::span<const SupportPoint> support,
                                       std::span<const double> data, const DirichletSpec& spec,
                                       double gamma, const KernelSpec& kernel) {
  const std::vector<MixingWeights> bayes = exact_posterior_means(support, data, spec, kernel);
  std::vector<double> out;
  MixingWeights f = spec.f0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    f = pr_update(f, support, data[i], pr_weight(i + 1, gamma), kernel).weights;
    double l1 = 0.0;
    for (std::size_t u = 0; u < f.size(); ++u) l1 += std::abs(f[u] - bayes[i + 1][u]);
    out.push_back(l1);
  }
  return out;
}

}  // namespace sasa

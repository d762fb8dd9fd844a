#pragma once

// Support encodings, the two annealing proposal schemes, the binomial prior
// penalty on the support, and the annealing loop.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "sasa/kernels.hpp"
#include "sasa/recursion.hpp"
#include "sasa/rng.hpp"

namespace sasa {

enum class Encoding { Binary, Level };

/// Indicator vector H of a candidate support.
///
/// Binary: one entry per grid point, H_s in {0, 1}.
/// Level: one entry per location, H_s in {0, ..., S2}; H_s = h > 0 puts the
/// pair (location s, scale h) in the support, so each location carries at
/// most one scale.
class SupportMask {
 public:
  SupportMask() = default;
  static SupportMask binary(std::vector<std::uint8_t> bits);
  static SupportMask level(std::vector<std::uint16_t> levels, std::size_t max_level);
  static SupportMask all_ones(std::size_t S);
  static SupportMask uniform_level(std::size_t S1, std::size_t max_level, std::size_t level);

  /// Encodes a set of lattice indices of `grid`. Level encoding rejects sets
  /// with two scales at one location.
  static SupportMask encode(std::span<const std::size_t> lattice_indices, const Grid& grid,
                            Encoding encoding);
  /// Sorted lattice indices of the support.
  std::vector<std::size_t> decode(const Grid& grid) const;

  Encoding encoding() const { return encoding_; }
  std::size_t length() const { return entries_.size(); }
  std::size_t max_level() const { return max_level_; }
  std::size_t active_count() const;
  bool empty() const { return active_count() == 0; }
  std::uint16_t operator[](std::size_t s) const { return entries_[s]; }
  std::span<const std::uint16_t> entries() const { return entries_; }
  void set(std::size_t s, std::uint16_t value);

  std::string key() const;
  friend bool operator==(const SupportMask&, const SupportMask&) = default;

 private:
  SupportMask(Encoding encoding, std::vector<std::uint16_t> entries, std::size_t max_level)
      : encoding_(encoding), entries_(std::move(entries)), max_level_(max_level) {}

  Encoding encoding_ = Encoding::Binary;
  std::vector<std::uint16_t> entries_;
  std::size_t max_level_ = 1;
};

struct AnnealConfig {
  std::size_t iterations = 5000;   // T
  double temp_scale = 1.0;         // a
  std::size_t flip_distance = 1;   // k
  double sharpness = 1.0;          // r
  std::optional<double> rho;       // inclusion probability; no penalty if unset
  std::uint64_t chain_seed = 0;
  /// Clamp the location-scale removal probability to [1/S1, 1 - 1/S1] so an
  /// all-active state is not absorbing. Selection weights are unaffected.
  bool removal_floor = true;
  /// Starting level for location-scale searches; 0 means ceil(S2 / 2).
  std::size_t initial_level = 0;
  /// Independent restarts from the same initial state. Chain 0 uses chain_seed
  /// itself; chain c > 0 uses derive_seed(chain_seed, c). The best objective
  /// wins, lowest chain index on ties.
  std::size_t chains = 1;

  /// S is the mask length (grid points for binary, locations for level).
  void validate(std::size_t S) const;
};

/// log of the Binomial(S, rho) size prior times the uniform prior on
/// subsets of a given size: |U| log rho + (S - |U|) log(1 - rho).
double penalty(const SupportMask& mask, std::size_t S, double rho);

/// Unnormalized selection weights 1 + (S / sum H)^r H_s.
std::vector<double> binary_selection_weights(const SupportMask& mask, double r);
/// Flips exactly k positions drawn without replacement by the selection weights.
SupportMask propose_binary(const SupportMask& mask, std::size_t k, double r, Rng& rng);

/// Proportion of zero entries in a level mask.
double zero_fraction(const SupportMask& mask);
/// Unnormalized selection weights 1 + (1 - beta)^(-r) I{H_s > 0}.
std::vector<double> locscale_selection_weights(const SupportMask& mask, double r);
/// Probability that a selected active entry is proposed for removal.
double removal_probability(const SupportMask& mask, bool floor);
/// Changes exactly one location of a level mask.
SupportMask propose_locscale(const SupportMask& mask, double r, Rng& rng,
                             bool removal_floor = true);

/// a / log(1 + t), t >= 1.
double temperature(std::size_t t, double a);
/// min(1, exp((new - cur) / tau)); 0 when obj_new is -inf.
double acceptance_prob(double obj_new, double obj_cur, double tau);

struct TraceEntry {
  std::size_t iteration = 0;
  double objective = 0.0;  // current state after the step
  std::size_t support_size = 0;
  bool accepted = false;
};

struct AnnealOutcome {
  SupportMask best_mask;
  double best_objective = 0.0;
  std::size_t best_iteration = 0;
  std::size_t accepted_moves = 0;
  /// Entry 0 is the initial state; entry t is the state after iteration t.
  std::vector<TraceEntry> trace;
};

using Objective = std::function<double(const SupportMask&)>;
using Proposal = std::function<SupportMask(const SupportMask&, Rng&)>;

/// Simulated annealing maximizer. Returns the best visited mask, keeping the
/// earliest one on ties. Deterministic given cfg.chain_seed.
AnnealOutcome anneal(const Objective& objective, const SupportMask& initial,
                     const AnnealConfig& cfg, const Proposal& proposal);

/// Proposal bound to the configuration: binary flips for Binary masks,
/// the location-scale move for Level masks.
Proposal make_proposal(const AnnealConfig& cfg);

/// Penalized, permutation-averaged log marginal likelihood of a mask. The
/// empty support and supports with a vanishing predictive score -inf.
/// Results are memoized by mask, which is exact because the objective is a
/// pure function of the mask.
class SupportObjective {
 public:
  SupportObjective(const MarginalEvaluator& evaluator, const Grid& grid, std::optional<double> rho);

  double operator()(const SupportMask& mask) const;
  double unpenalized(const SupportMask& mask) const;
  std::size_t evaluations() const { return evaluations_; }

 private:
  const MarginalEvaluator& evaluator_;
  const Grid& grid_;
  std::optional<double> rho_;
  mutable std::unordered_map<std::string, double> cache_;
  mutable std::size_t evaluations_ = 0;
};

struct FitResult {
  SupportMask best_mask;
  std::vector<SupportPoint> best_support;
  MixingWeights best_weights;
  double best_objective = 0.0;
  /// Averaged l_n of the best support without the penalty.
  double best_log_marginal = 0.0;
  /// Across-permutation standard deviation of l_n at the best support.
  double permutation_stddev = 0.0;
  std::vector<TraceEntry> trace;
  std::size_t accepted_moves = 0;  // of the winning chain
  std::size_t best_chain = 0;
  std::size_t objective_evaluations = 0;  // distinct supports, all chains
  double seconds = 0.0;
};

/// Writes iteration,objective,support_size,accepted rows.
void write_trace_csv(const std::string& path, std::span<const TraceEntry> trace);

}  // namespace sasa

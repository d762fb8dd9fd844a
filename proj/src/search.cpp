#include "sasa/search.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "sasa/error.hpp"

namespace sasa {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::size_t sample_weighted(std::span<const double> weights, double total, Rng& rng) {
  const double target = uniform01(rng) * total;
  double running = 0.0;
  std::size_t last_positive = weights.size();
  for (std::size_t s = 0; s < weights.size(); ++s) {
    if (weights[s] <= 0.0) continue;
    running += weights[s];
    last_positive = s;
    if (target < running) return s;
  }
  // Rounding left target at the top of the range.
  return last_positive;
}

}  // namespace

SupportMask SupportMask::binary(std::vector<std::uint8_t> bits) {
  std::vector<std::uint16_t> entries(bits.size());
  for (std::size_t s = 0; s < bits.size(); ++s) {
    if (bits[s] > 1) throw InvalidInput("binary mask entries must be 0 or 1");
    entries[s] = bits[s];
  }
  return SupportMask(Encoding::Binary, std::move(entries), 1);
}

SupportMask SupportMask::level(std::vector<std::uint16_t> levels, std::size_t max_level) {
  if (max_level < 1) throw InvalidInput("level mask needs at least one scale");
  for (auto h : levels) {
    if (h > max_level) throw InvalidInput("level mask entry exceeds the number of scales");
  }
  return SupportMask(Encoding::Level, std::move(levels), max_level);
}

SupportMask SupportMask::all_ones(std::size_t S) {
  return SupportMask(Encoding::Binary, std::vector<std::uint16_t>(S, 1), 1);
}

SupportMask SupportMask::uniform_level(std::size_t S1, std::size_t max_level,
                                       std::size_t level) {
  if (level < 1 || level > max_level) throw InvalidInput("initial level out of range");
  return SupportMask::level(std::vector<std::uint16_t>(S1, static_cast<std::uint16_t>(level)),
                            max_level);
}

SupportMask SupportMask::encode(std::span<const std::size_t> lattice_indices, const Grid& grid,
                                Encoding encoding) {
  if (encoding == Encoding::Binary) {
    std::vector<std::uint16_t> entries(grid.size(), 0);
    for (std::size_t idx : lattice_indices) {
      if (idx >= grid.size()) throw InvalidInput("support index outside the grid");
      entries[idx] = 1;
    }
    return SupportMask(Encoding::Binary, std::move(entries), 1);
  }
  std::vector<std::uint16_t> entries(grid.size1(), 0);
  for (std::size_t idx : lattice_indices) {
    const auto [loc, scale] = grid.coordinates(idx);
    const auto level = static_cast<std::uint16_t>(scale + 1);
    if (entries[loc] != 0 && entries[loc] != level) {
      throw InvalidInput("support has two scales at one location; not admissible");
    }
    entries[loc] = level;
  }
  return SupportMask(Encoding::Level, std::move(entries), grid.size2());
}

std::vector<std::size_t> SupportMask::decode(const Grid& grid) const {
  std::vector<std::size_t> indices;
  if (encoding_ == Encoding::Binary) {
    if (entries_.size() != grid.size()) throw InvalidInput("mask length does not match grid");
    for (std::size_t s = 0; s < entries_.size(); ++s) {
      if (entries_[s]) indices.push_back(s);
    }
    return indices;
  }
  if (entries_.size() != grid.size1() || max_level_ != grid.size2()) {
    throw InvalidInput("level mask shape does not match grid");
  }
  for (std::size_t s = 0; s < entries_.size(); ++s) {
    if (entries_[s]) indices.push_back(grid.lattice_index(s, entries_[s] - 1u));
  }
  return indices;
}

std::size_t SupportMask::active_count() const {
  return static_cast<std::size_t>(
      std::count_if(entries_.begin(), entries_.end(), [](auto h) { return h != 0; }));
}

void SupportMask::set(std::size_t s, std::uint16_t value) {
  if (s >= entries_.size()) throw InvalidInput("mask position out of range");
  if (value > max_level_) throw InvalidInput("mask value out of range");
  entries_[s] = value;
}

std::string SupportMask::key() const {
  std::string out(entries_.size() * 2, '\0');
  for (std::size_t s = 0; s < entries_.size(); ++s) {
    out[2 * s] = static_cast<char>(entries_[s] & 0xff);
    out[2 * s + 1] = static_cast<char>(entries_[s] >> 8);
  }
  return out;
}

void AnnealConfig::validate(std::size_t S) const {
  if (iterations < 1) throw InvalidInput("annealing needs at least one iteration");
  if (chains < 1) throw InvalidInput("annealing needs at least one chain");
  if (!(temp_scale > 0.0)) throw InvalidInput("temperature scale a must be > 0");
  if (flip_distance < 1 || flip_distance > S) {
    throw InvalidInput("flip distance k must satisfy 1 <= k <= S");
  }
  if (!(sharpness >= 1.0)) throw InvalidInput("proposal sharpness r must be >= 1");
  if (rho && !(*rho > 0.0 && *rho < 1.0)) {
    throw InvalidInput("inclusion probability rho must lie in (0, 1)");
  }
}

double penalty(const SupportMask& mask, std::size_t S, double rho) {
  if (!(rho > 0.0 && rho < 1.0)) throw InvalidInput("rho must lie in (0, 1)");
  const auto size = static_cast<double>(mask.active_count());
  return size * std::log(rho) + (static_cast<double>(S) - size) * std::log1p(-rho);
}

std::vector<double> binary_selection_weights(const SupportMask& mask, double r) {
  const std::size_t S = mask.length();
  const std::size_t active = mask.active_count();
  if (active == 0) throw InvalidInput("selection weights need a nonempty support");
  const double boost = std::pow(static_cast<double>(S) / static_cast<double>(active), r);
  std::vector<double> weights(S);
  for (std::size_t s = 0; s < S; ++s) weights[s] = 1.0 + boost * (mask[s] ? 1.0 : 0.0);
  return weights;
}

SupportMask propose_binary(const SupportMask& mask, std::size_t k, double r, Rng& rng) {
  if (mask.encoding() != Encoding::Binary) throw InvalidInput("binary proposal needs a binary mask");
  if (k < 1 || k > mask.length()) throw InvalidInput("flip distance out of range");
  std::vector<double> weights = binary_selection_weights(mask, r);
  double total = 0.0;
  for (double w : weights) total += w;
  SupportMask out = mask;
  for (std::size_t draw = 0; draw < k; ++draw) {
    const std::size_t s = sample_weighted(weights, total, rng);
    out.set(s, out[s] ? 0 : 1);
    total -= weights[s];
    weights[s] = 0.0;
  }
  return out;
}

double zero_fraction(const SupportMask& mask) {
  if (mask.length() == 0) throw InvalidInput("empty mask");
  return static_cast<double>(mask.length() - mask.active_count()) /
         static_cast<double>(mask.length());
}

std::vector<double> locscale_selection_weights(const SupportMask& mask, double r) {
  if (mask.active_count() == 0) throw InvalidInput("selection weights need a nonempty support");
  const double boost = std::pow(1.0 - zero_fraction(mask), -r);
  std::vector<double> weights(mask.length());
  for (std::size_t s = 0; s < mask.length(); ++s) {
    weights[s] = 1.0 + boost * (mask[s] > 0 ? 1.0 : 0.0);
  }
  return weights;
}

double removal_probability(const SupportMask& mask, bool floor) {
  const double beta = zero_fraction(mask);
  const std::size_t S1 = mask.length();
  if (!floor || S1 < 2) return beta;
  const double lo = 1.0 / static_cast<double>(S1);
  return std::clamp(beta, lo, 1.0 - lo);
}

SupportMask propose_locscale(const SupportMask& mask, double r, Rng& rng, bool removal_floor) {
  if (mask.encoding() != Encoding::Level) {
    throw InvalidInput("location-scale proposal needs a level mask");
  }
  const std::vector<double> weights = locscale_selection_weights(mask, r);
  double total = 0.0;
  for (double w : weights) total += w;
  const std::size_t s = sample_weighted(weights, total, rng);
  const auto top = static_cast<std::uint16_t>(mask.max_level());
  const std::uint16_t current = mask[s];

  SupportMask out = mask;
  if (current == 0) {
    out.set(s, static_cast<std::uint16_t>(1 + uniform_index(rng, top)));
    return out;
  }
  const bool remove = uniform01(rng) < removal_probability(mask, removal_floor);
  if (remove || top == 1) {
    out.set(s, 0);
  } else if (current == 1) {
    out.set(s, 2);
  } else if (current == top) {
    out.set(s, static_cast<std::uint16_t>(top - 1));
  } else {
    out.set(s, static_cast<std::uint16_t>(uniform_index(rng, 2) == 0 ? current - 1 : current + 1));
  }
  return out;
}

double temperature(std::size_t t, double a) {
  if (t < 1) throw InvalidInput("temperature schedule starts at t = 1");
  if (!(a > 0.0)) throw InvalidInput("temperature scale a must be > 0");
  return a / std::log1p(static_cast<double>(t));
}

double acceptance_prob(double obj_new, double obj_cur, double tau) {
  if (!(tau > 0.0)) throw InvalidInput("temperature must be > 0");
  if (obj_new == kNegInf) return 0.0;
  if (obj_new >= obj_cur) return 1.0;
  return std::exp((obj_new - obj_cur) / tau);
}

AnnealOutcome anneal(const Objective& objective, const SupportMask& initial,
                     const AnnealConfig& cfg, const Proposal& proposal) {
  cfg.validate(initial.length());
  const double start = initial.empty() ? kNegInf : objective(initial);
  if (!(start > kNegInf)) {
    throw InvalidInput("initial support must have a finite objective");
  }
  AnnealOutcome out;
  out.best_mask = initial;
  out.best_objective = start;
  out.trace.reserve(cfg.iterations + 1);
  out.trace.push_back({0, start, initial.active_count(), false});

  SupportMask current = initial;
  double current_obj = start;
  Rng rng = make_rng(cfg.chain_seed, 0);
  for (std::size_t t = 1; t <= cfg.iterations; ++t) {
    double candidate_obj = kNegInf;
    SupportMask candidate;
    try {
      candidate = proposal(current, rng);
      if (!candidate.empty()) candidate_obj = objective(candidate);
    } catch (const std::exception& e) {
      std::ostringstream msg;
      msg << "objective evaluation failed at iteration " << t << ": " << e.what();
      throw std::runtime_error(msg.str());
    }
    if (std::isnan(candidate_obj)) {
      std::ostringstream msg;
      msg << "objective evaluated to NaN at iteration " << t;
      throw std::runtime_error(msg.str());
    }
    const double alpha = acceptance_prob(candidate_obj, current_obj, temperature(t, cfg.temp_scale));
    const bool accepted = uniform01(rng) < alpha;
    if (accepted) {
      current = std::move(candidate);
      current_obj = candidate_obj;
      ++out.accepted_moves;
      if (current_obj > out.best_objective) {
        out.best_objective = current_obj;
        out.best_mask = current;
        out.best_iteration = t;
      }
    }
    out.trace.push_back({t, current_obj, current.active_count(), accepted});
  }
  return out;
}

Proposal make_proposal(const AnnealConfig& cfg) {
  return [cfg](const SupportMask& mask, Rng& rng) {
    if (mask.encoding() == Encoding::Binary) {
      return propose_binary(mask, cfg.flip_distance, cfg.sharpness, rng);
    }
    return propose_locscale(mask, cfg.sharpness, rng, cfg.removal_floor);
  };
}

SupportObjective::SupportObjective(const MarginalEvaluator& evaluator, const Grid& grid,
                                   std::optional<double> rho)
    : evaluator_(evaluator), grid_(grid), rho_(rho) {
  if (rho_ && !(*rho_ > 0.0 && *rho_ < 1.0)) {
    throw InvalidInput("inclusion probability rho must lie in (0, 1)");
  }
}

double SupportObjective::unpenalized(const SupportMask& mask) const {
  const std::string key = mask.key();
  if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  double value = kNegInf;
  const std::vector<std::size_t> indices = mask.decode(grid_);
  if (!indices.empty()) {
    try {
      value = evaluator_.log_marginal(indices);
      ++evaluations_;
    } catch (const NumericalDegeneracy&) {
      value = kNegInf;
    }
  }
  cache_.emplace(key, value);
  return value;
}

double SupportObjective::operator()(const SupportMask& mask) const {
  const double value = unpenalized(mask);
  if (!rho_ || value == kNegInf) return value;
  return value + penalty(mask, mask.length(), *rho_);
}

void write_trace_csv(const std::string& path, std::span<const TraceEntry> trace) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot open trace file '" + path + "'");
  out << "iteration,objective,support_size,accepted\n";
  out << std::setprecision(17);
  for (const auto& e : trace) {
    out << e.iteration << ',' << e.objective << ',' << e.support_size << ','
        << (e.accepted ? 1 : 0) << '\n';
  }
}

}  // namespace sasa

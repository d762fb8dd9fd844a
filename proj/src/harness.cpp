#include "sasa/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>
#include <thread>

#include "sasa/error.hpp"
#include "sasa/rng.hpp"

namespace sasa {
namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::optional<double> parse_number(const std::string& text) {
  double value = 0.0;
  const char* begin = text.data();
  const char* end = text.data() + text.size();
  if (begin != end && *begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return value;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

void MixtureModelSpec::validate() const {
  if (components.empty()) throw InvalidInput("mixture model needs at least one component");
  double total = 0.0;
  for (std::size_t j = 0; j < components.size(); ++j) {
    if (!(components[j].weight > 0.0)) throw InvalidInput("mixture weights must be positive");
    kernel.check_support_point(point(j));
    total += components[j].weight;
  }
  if (std::abs(total - 1.0) > 1e-9) throw InvalidInput("mixture weights must sum to 1");
}

SupportPoint MixtureModelSpec::point(std::size_t j) const {
  const auto& c = components.at(j);
  SupportPoint p{j, c.location, 0.0};
  if (kernel.family() == KernelFamily::GaussianLocationScale) p.variance = c.variance;
  return p;
}

double MixtureModelSpec::density(double y) const {
  double total = 0.0;
  for (std::size_t j = 0; j < components.size(); ++j) {
    total += components[j].weight * std::exp(kernel.log_density(y, point(j)));
  }
  return total;
}

double MixtureModelSpec::mean() const {
  double total = 0.0;
  for (std::size_t j = 0; j < components.size(); ++j) {
    total += components[j].weight * kernel.mean(point(j));
  }
  return total;
}

double MixtureModelSpec::variance() const {
  const double mu = mean();
  double total = 0.0;
  for (std::size_t j = 0; j < components.size(); ++j) {
    const double d = kernel.mean(point(j)) - mu;
    total += components[j].weight * (kernel.variance(point(j)) + d * d);
  }
  return total;
}

std::vector<double> simulate(const MixtureModelSpec& model, std::size_t n, std::uint64_t seed) {
  model.validate();
  Rng rng = make_rng(seed, 0);
  std::vector<double> cumulative;
  double running = 0.0;
  for (const auto& c : model.components) cumulative.push_back(running += c.weight);
  std::vector<double> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double pick = uniform01(rng) * running;
    std::size_t j = 0;
    while (j + 1 < cumulative.size() && pick >= cumulative[j]) ++j;
    const SupportPoint u = model.point(j);
    switch (model.kernel.family()) {
      case KernelFamily::PoissonRate: {
        if (u.location == 0.0) {
          out.push_back(0.0);
        } else {
          std::poisson_distribution<long long> draw(u.location);
          out.push_back(static_cast<double>(draw(rng)));
        }
        break;
      }
      case KernelFamily::GaussianLocation:
      case KernelFamily::GaussianLocationScale: {
        std::normal_distribution<double> draw(u.location, std::sqrt(model.kernel.variance(u)));
        out.push_back(draw(rng));
        break;
      }
    }
  }
  return out;
}

std::vector<double> parse_observations(std::istream& in, const std::string& source) {
  std::vector<double> out;
  std::string line;
  std::size_t line_no = 0;
  bool seen_content = false;
  while (std::getline(in, line)) {
    ++line_no;
    std::string field = trim(line);
    if (field.empty() || field.front() == '#') continue;
    if (auto comma = field.find(','); comma != std::string::npos) field = trim(field.substr(0, comma));
    const auto value = parse_number(field);
    if (!value) {
      if (!seen_content) {
        seen_content = true;  // header
        continue;
      }
      std::ostringstream msg;
      msg << source << ":" << line_no << ": cannot parse '" << field << "' as a number";
      throw InvalidInput(msg.str());
    }
    if (!std::isfinite(*value)) {
      std::ostringstream msg;
      msg << source << ":" << line_no << ": value is not finite";
      throw InvalidInput(msg.str());
    }
    seen_content = true;
    out.push_back(*value);
  }
  if (out.empty()) throw InvalidInput(source + ": no observations found");
  return out;
}

std::vector<double> load_observations(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open data file '" + path + "'");
  return parse_observations(in, path);
}

void check_observations(std::span<const double> data, const KernelSpec& kernel) {
  for (std::size_t i = 0; i < data.size(); ++i) {
    try {
      kernel.check_observation(data[i]);
    } catch (const InvalidInput& e) {
      std::ostringstream msg;
      msg << "observation " << i + 1 << ": " << e.what();
      throw InvalidInput(msg.str());
    }
  }
}

SupportMask initial_mask(const Grid& grid, const AnnealConfig& cfg) {
  if (grid.dims() == 1) return SupportMask::all_ones(grid.size());
  const std::size_t level = cfg.initial_level ? cfg.initial_level : (grid.size2() + 1) / 2;
  return SupportMask::uniform_level(grid.size1(), grid.size2(), level);
}

FitResult run_fit(std::span<const double> data, const Grid& grid, const KernelSpec& kernel,
                  const PRConfig& pr, const AnnealConfig& anneal_cfg) {
  const auto start = std::chrono::steady_clock::now();
  if (data.empty()) throw InvalidInput("cannot fit a mixture to zero observations");
  grid.check_compatible(kernel);
  check_observations(data, kernel);
  pr.validate();

  PermutationSet perms(data.size(), pr.n_permutations, pr.permutation_seed);
  const MarginalEvaluator evaluator(kernel, grid, std::vector<double>(data.begin(), data.end()),
                                    std::move(perms), pr);
  const SupportObjective objective(evaluator, grid, anneal_cfg.rho);
  const SupportMask initial = initial_mask(grid, anneal_cfg);
  anneal_cfg.validate(initial.length());
  AnnealOutcome outcome;
  std::size_t winner = 0;
  for (std::size_t c = 0; c < anneal_cfg.chains; ++c) {
    AnnealConfig chain_cfg = anneal_cfg;
    if (c > 0) chain_cfg.chain_seed = derive_seed(anneal_cfg.chain_seed, c);
    AnnealOutcome run = anneal([&](const SupportMask& m) { return objective(m); }, initial,
                               chain_cfg, make_proposal(chain_cfg));
    if (c == 0 || run.best_objective > outcome.best_objective) {
      outcome = std::move(run);
      winner = c;
    }
  }

  FitResult fit;
  const std::vector<std::size_t> indices = outcome.best_mask.decode(grid);
  const MarginalEvaluator::Evaluation best = evaluator.evaluate(indices);
  fit.best_support = grid.resolve(indices);
  fit.best_weights = best.weights;
  fit.best_log_marginal = best.mean;
  fit.permutation_stddev = best.stddev;
  fit.best_mask = std::move(outcome.best_mask);
  fit.best_objective = outcome.best_objective;
  fit.trace = std::move(outcome.trace);
  fit.accepted_moves = outcome.accepted_moves;
  fit.best_chain = winner;
  fit.objective_evaluations = objective.evaluations();
  fit.seconds = seconds_since(start);
  return fit;
}

std::vector<DensityPoint> density_curve(const FitResult& fit, const KernelSpec& kernel,
                                        std::span<const double> data, std::size_t points) {
  if (data.empty() || fit.best_support.empty()) {
    throw InvalidInput("density curve needs data and a fitted support");
  }
  const auto [lo_it, hi_it] = std::minmax_element(data.begin(), data.end());
  double max_sd = 0.0;
  for (const auto& u : fit.best_support) max_sd = std::max(max_sd, std::sqrt(kernel.variance(u)));
  const double lo = *lo_it - 3.0 * max_sd;
  const double hi = *hi_it + 3.0 * max_sd;
  std::vector<double> ys;
  if (kernel.is_count()) {
    for (double y = std::max(0.0, std::floor(lo)); y <= std::ceil(hi); y += 1.0) ys.push_back(y);
  } else {
    ys = points > 1 ? Grid::equispaced(lo, hi, points) : std::vector<double>{lo};
  }
  std::vector<DensityPoint> curve;
  curve.reserve(ys.size());
  for (double y : ys) {
    curve.push_back({y, mixture_density(kernel, fit.best_support, fit.best_weights.values(), y)});
  }
  return curve;
}

void write_density_csv(const std::string& path, std::span<const DensityPoint> curve) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot open density file '" + path + "'");
  out << "y,density\n" << std::setprecision(12);
  for (const auto& p : curve) out << p.y << ',' << p.density << '\n';
}

std::size_t count_modes(std::span<const DensityPoint> curve) {
  std::size_t modes = 0;
  std::size_t i = 0;
  const std::size_t n = curve.size();
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && curve[j + 1].density == curve[i].density) ++j;
    const bool left = i == 0 || curve[i - 1].density < curve[i].density;
    const bool right = j + 1 == n || curve[j + 1].density < curve[j].density;
    if (left && right) ++modes;
    i = j + 1;
  }
  return modes;
}

nlohmann::json fit_to_json(const FitResult& fit, const KernelSpec& kernel, const Grid& grid,
                           const PRConfig& pr, const AnnealConfig& anneal_cfg,
                           std::size_t sample_size) {
  using nlohmann::json;
  json support = json::array();
  for (const auto& u : fit.best_support) {
    json point = {{"index", u.index}, {"location", u.location}};
    if (kernel.family() == KernelFamily::GaussianLocationScale) {
      point["scale"] = std::sqrt(u.variance);
      point["variance"] = u.variance;
    }
    support.push_back(point);
  }
  json grid_echo = {{"axis1", grid.axis1()}};
  if (grid.dims() == 2) grid_echo["axis2"] = grid.axis2();
  json config = {
      {"kernel", to_string(kernel.family())},
      {"n", sample_size},
      {"grid", grid_echo},
      {"recursion",
       {{"gamma", pr.gamma},
        {"permutations", pr.n_permutations},
        {"permutation_seed", pr.permutation_seed},
        {"f0", pr.f0.empty() ? json("uniform") : json(pr.f0)}}},
      {"anneal",
       {{"iterations", anneal_cfg.iterations},
        {"temp_scale", anneal_cfg.temp_scale},
        {"flip_distance", anneal_cfg.flip_distance},
        {"sharpness", anneal_cfg.sharpness},
        {"rho", anneal_cfg.rho ? json(*anneal_cfg.rho) : json(nullptr)},
        {"chain_seed", anneal_cfg.chain_seed},
        {"removal_floor", anneal_cfg.removal_floor},
        {"initial_level", anneal_cfg.initial_level},
        {"chains", anneal_cfg.chains}}}};
  if (kernel.family() == KernelFamily::GaussianLocation) config["sigma"] = kernel.sigma();
  return {{"status", "ok"},
          {"support", support},
          {"weights", std::vector<double>(fit.best_weights.begin(), fit.best_weights.end())},
          {"objective", fit.best_objective},
          {"log_marginal", fit.best_log_marginal},
          {"permutation_stddev", fit.permutation_stddev},
          {"size", fit.best_support.size()},
          {"accepted_moves", fit.accepted_moves},
          {"best_chain", fit.best_chain},
          {"objective_evaluations", fit.objective_evaluations},
          {"seconds", fit.seconds},
          {"config", config}};
}

void ExperimentSpec::validate() const {
  model.validate();
  if (n < 1) throw InvalidInput("experiment sample size must be >= 1");
  if (replications < 1) throw InvalidInput("experiment needs at least one replication");
  grid.check_compatible(model.kernel);
  pr.validate();
  anneal.validate(grid.dims() == 1 ? grid.size() : grid.size1());
}

ReplicationSeeds replication_seeds(std::uint64_t master_seed, std::size_t replication) {
  const std::uint64_t base = derive_seed(master_seed, replication);
  return {derive_seed(base, 0), derive_seed(base, 1), derive_seed(base, 2)};
}

std::size_t ComplexityTable::successes() const {
  std::size_t total = 0;
  for (const auto& [size, count] : counts) total += count;
  return total;
}

double ComplexityTable::proportion(std::size_t size) const {
  const std::size_t total = successes();
  if (total == 0) return 0.0;
  const auto it = counts.find(size);
  return it == counts.end() ? 0.0 : static_cast<double>(it->second) / static_cast<double>(total);
}

std::size_t ComplexityTable::modal_size() const {
  std::size_t best = 0;
  std::size_t best_count = 0;
  for (const auto& [size, count] : counts) {
    if (count > best_count) {
      best = size;
      best_count = count;
    }
  }
  return best;
}

std::string ComplexityTable::to_csv() const {
  std::ostringstream out;
  out << "size,proportion,count\n" << std::setprecision(12);
  for (const auto& [size, count] : counts) {
    out << size << ',' << proportion(size) << ',' << count << '\n';
  }
  return out.str();
}

std::string ComplexityTable::to_text() const {
  std::ostringstream out;
  out << label << ": " << successes() << " replications";
  if (failures) out << " (" << failures << " failed, excluded)";
  out << '\n';
  out << "  |U|  proportion  count\n";
  for (const auto& [size, count] : counts) {
    out << "  " << std::setw(3) << size << "  " << std::fixed << std::setprecision(3)
        << std::setw(10) << proportion(size) << "  " << std::setw(5) << count << '\n';
  }
  for (const auto& msg : failure_messages) out << "  failure: " << msg << '\n';
  return out.str();
}

ComplexityTable ComplexityTable::from_records(std::string label,
                                              std::span<const ReplicationRecord> records) {
  ComplexityTable table;
  table.label = std::move(label);
  for (const auto& r : records) {
    if (r.ok) {
      ++table.counts[r.size];
    } else {
      ++table.failures;
      table.failure_messages.push_back("replication " + std::to_string(r.index) + ": " + r.error);
    }
  }
  return table;
}

ComplexityTable run_experiment(const ExperimentSpec& spec, std::size_t threads,
                               std::vector<ReplicationRecord>* records) {
  spec.validate();
  std::vector<ReplicationRecord> results(spec.replications);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t r = next++; r < spec.replications; r = next++) {
      ReplicationRecord& rec = results[r];
      rec.index = r;
      const auto start = std::chrono::steady_clock::now();
      try {
        const ReplicationSeeds seeds = replication_seeds(spec.master_seed, r);
        const std::vector<double> data = simulate(spec.model, spec.n, seeds.data);
        PRConfig pr = spec.pr;
        pr.permutation_seed = seeds.permutations;
        AnnealConfig anneal_cfg = spec.anneal;
        anneal_cfg.chain_seed = seeds.chain;
        const FitResult fit = run_fit(data, spec.grid, spec.model.kernel, pr, anneal_cfg);
        rec.ok = true;
        rec.size = fit.best_support.size();
        rec.objective = fit.best_objective;
      } catch (const std::exception& e) {
        rec.ok = false;
        rec.error = e.what();
      }
      rec.seconds = seconds_since(start);
    }
  };
  const std::size_t pool = std::max<std::size_t>(1, std::min(threads, spec.replications));
  if (pool == 1) {
    worker();
  } else {
    std::vector<std::jthread> workers;
    for (std::size_t t = 0; t < pool; ++t) workers.emplace_back(worker);
  }
  ComplexityTable table = ComplexityTable::from_records(spec.name, results);
  if (records) *records = std::move(results);
  return table;
}

}  // namespace sasa

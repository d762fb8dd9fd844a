#pragma once

// Data simulation and ingestion, the end-to-end fit, replicated experiments
// and their reports.

#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "sasa/kernels.hpp"
#include "sasa/recursion.hpp"
#include "sasa/search.hpp"

namespace sasa {

/// One mixture component. `variance` is only read for location-scale
/// kernels; Gaussian location kernels take their scale from the KernelSpec.
struct MixtureComponent {
  double location = 0.0;
  double variance = 0.0;
  double weight = 0.0;
};

struct MixtureModelSpec {
  KernelSpec kernel = KernelSpec::poisson();
  std::vector<MixtureComponent> components;

  void validate() const;
  SupportPoint point(std::size_t j) const;
  double density(double y) const;
  double mean() const;
  double variance() const;
};

/// n iid draws: pick a component by weight, then draw from its kernel.
std::vector<double> simulate(const MixtureModelSpec& model, std::size_t n, std::uint64_t seed);

/// One value per line; a single non-numeric first line is taken as a
/// header. Blank lines and lines starting with '#' are skipped. For
/// single-column CSV the first field of each line is used.
std::vector<double> parse_observations(std::istream& in, const std::string& source);
std::vector<double> load_observations(const std::string& path);
/// Throws InvalidInput naming the first observation outside the kernel domain.
void check_observations(std::span<const double> data, const KernelSpec& kernel);

FitResult run_fit(std::span<const double> data, const Grid& grid, const KernelSpec& kernel,
                  const PRConfig& pr, const AnnealConfig& anneal);

/// Starting mask: all grid points for 1-d grids; every location at
/// cfg.initial_level (default ceil(S2 / 2)) for 2-d grids.
SupportMask initial_mask(const Grid& grid, const AnnealConfig& cfg);

struct DensityPoint {
  double y = 0.0;
  double density = 0.0;
};

/// Fitted mixture density on 512 equispaced points spanning the data range
/// widened by three of the largest component standard deviations. Count
/// kernels are evaluated at every integer of that range instead.
std::vector<DensityPoint> density_curve(const FitResult& fit, const KernelSpec& kernel,
                                        std::span<const double> data,
                                        std::size_t points = 512);
void write_density_csv(const std::string& path, std::span<const DensityPoint> curve);

/// Number of local maxima of a sampled curve (plateaus count once).
std::size_t count_modes(std::span<const DensityPoint> curve);

nlohmann::json fit_to_json(const FitResult& fit, const KernelSpec& kernel, const Grid& grid,
                           const PRConfig& pr, const AnnealConfig& anneal,
                           std::size_t sample_size);

struct ExperimentSpec {
  std::string name = "experiment";
  MixtureModelSpec model;
  std::size_t n = 100;
  std::size_t replications = 1;
  Grid grid = Grid::one_d({0.0});
  PRConfig pr;
  AnnealConfig anneal;
  std::uint64_t master_seed = 0;

  void validate() const;
};

struct ReplicationSeeds {
  std::uint64_t data = 0;
  std::uint64_t permutations = 0;
  std::uint64_t chain = 0;
};
/// Seeds of replication r depend only on (master_seed, r).
ReplicationSeeds replication_seeds(std::uint64_t master_seed, std::size_t replication);

struct ReplicationRecord {
  std::size_t index = 0;
  bool ok = false;
  std::size_t size = 0;
  double objective = 0.0;
  double seconds = 0.0;
  std::string error;
};

/// Distribution of the estimated support size over replications.
struct ComplexityTable {
  std::string label;
  std::map<std::size_t, std::size_t> counts;
  std::size_t failures = 0;
  std::vector<std::string> failure_messages;

  std::size_t successes() const;
  double proportion(std::size_t size) const;
  /// Most frequent size; the smallest one on ties.
  std::size_t modal_size() const;
  /// Columns size,proportion,count.
  std::string to_csv() const;
  std::string to_text() const;

  static ComplexityTable from_records(std::string label, std::span<const ReplicationRecord> records);
};

/// Replications run on up to `threads` worker threads; the table does not
/// depend on the thread count.
ComplexityTable run_experiment(const ExperimentSpec& spec, std::size_t threads = 1,
                               std::vector<ReplicationRecord>* records = nullptr);

}  // namespace sasa

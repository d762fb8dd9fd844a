// Command-line front end: fit, simulate, experiment, oracle.

#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "sasa/config.hpp"
#include "sasa/dirichlet_oracle.hpp"
#include "sasa/error.hpp"
#include "sasa/harness.hpp"

namespace {

using nlohmann::json;

sasa::KernelSpec make_kernel(const std::string& name, std::optional<double> sigma) {
  switch (sasa::parse_kernel_family(name)) {
    case sasa::KernelFamily::PoissonRate: return sasa::KernelSpec::poisson();
    case sasa::KernelFamily::GaussianLocation:
      if (!sigma) throw sasa::InvalidInput("--kernel gauss-loc needs --sigma");
      return sasa::KernelSpec::gaussian_location(*sigma);
    case sasa::KernelFamily::GaussianLocationScale:
      return sasa::KernelSpec::gaussian_location_scale();
  }
  throw sasa::InvalidInput("unknown kernel");
}

void emit(const json& doc, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << doc.dump(2) << '\n';
    return;
  }
  std::ofstream out(path);
  if (!out) throw sasa::InvalidInput("cannot open output file '" + path + "'");
  out << doc.dump(2) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Finite mixture estimation by annealed search over predictive-recursion "
               "marginal likelihoods"};
  app.require_subcommand(1);

  // fit
  auto* fit_cmd = app.add_subcommand("fit", "Estimate the mixing distribution of a data file");
  std::string data_path, kernel_name, grid_text, out_path, density_path, trace_path;
  std::optional<double> sigma, rho;
  bool no_penalty = false;
  sasa::PRConfig pr;
  sasa::AnnealConfig ann;
  std::uint64_t seed = 0;
  std::size_t initial_level = 0;
  bool literal_beta = false;
  fit_cmd->add_option("--data", data_path, "Observation file")->required();
  fit_cmd->add_option("--kernel", kernel_name, "poisson | gauss-loc | gauss-locscale")->required();
  fit_cmd->add_option("--grid", grid_text, "lo:hi:count or v1,v2,...; 2-d grids as AXIS/SCALES")
      ->required();
  fit_cmd->add_option("--sigma", sigma, "Fixed scale for gauss-loc");
  fit_cmd->add_option("--gamma", pr.gamma, "Recursion weight exponent in (0.5, 1)")
      ->capture_default_str();
  fit_cmd->add_option("--perms", pr.n_permutations, "Number of data permutations")
      ->capture_default_str();
  fit_cmd->add_option("--iters", ann.iterations, "Annealing iterations T")->capture_default_str();
  fit_cmd->add_option("--temp-a", ann.temp_scale, "Temperature scale a")->capture_default_str();
  fit_cmd->add_option("--flip-k", ann.flip_distance, "Positions flipped per proposal")
      ->capture_default_str();
  fit_cmd->add_option("--prop-r", ann.sharpness, "Proposal sharpness r")->capture_default_str();
  fit_cmd->add_option("--chains", ann.chains, "Independent annealing restarts")
      ->capture_default_str();
  auto* rho_opt = fit_cmd->add_option("--rho", rho, "Prior inclusion probability in (0, 1)");
  auto* nopen_opt = fit_cmd->add_flag("--no-penalty", no_penalty, "Fit without the size prior");
  rho_opt->excludes(nopen_opt);
  fit_cmd->add_option("--seed", seed, "Seed for permutations and the annealing chain");
  fit_cmd->add_option("--initial-level", initial_level,
                      "Starting scale level for location-scale fits (default ceil(S2/2))");
  fit_cmd->add_flag("--literal-beta", literal_beta,
                    "Use the unclamped removal probability in location-scale proposals");
  fit_cmd->add_option("--out", out_path, "FitResult JSON (stdout if omitted)");
  fit_cmd->add_option("--emit-density", density_path, "Write fitted density as y,density CSV");
  fit_cmd->add_option("--emit-trace", trace_path, "Write the annealing trace as CSV");

  // simulate
  auto* sim_cmd = app.add_subcommand("simulate", "Draw observations from a mixture model file");
  std::string model_path, sim_out;
  std::size_t sim_n = 100;
  std::uint64_t sim_seed = 0;
  sim_cmd->add_option("--model", model_path, "Model YAML file")->required();
  sim_cmd->add_option("--n", sim_n, "Sample size")->required();
  sim_cmd->add_option("--seed", sim_seed, "Seed");
  sim_cmd->add_option("--out", sim_out, "Output file (stdout if omitted)");

  // experiment
  auto* exp_cmd = app.add_subcommand("experiment", "Run a replicated simulation study");
  std::string spec_path, table_path;
  std::size_t threads = std::max(1u, std::thread::hardware_concurrency());
  exp_cmd->add_option("--spec", spec_path, "Experiment YAML file")->required();
  exp_cmd->add_option("--out-table", table_path, "ComplexityTable CSV");
  exp_cmd->add_option("--threads", threads, "Worker threads")->capture_default_str();

  // oracle
  auto* orc_cmd = app.add_subcommand("oracle", "Dirichlet-prior marginal likelihood of a support");
  std::string orc_data, support_text, orc_kernel = "gauss-loc";
  std::optional<double> orc_sigma, alpha0;
  std::size_t paths = 10000;
  std::uint64_t orc_seed = 0;
  double orc_gamma = 0.67;
  std::size_t orc_perms = 100;
  orc_cmd->add_option("--data", orc_data, "Observation file")->required();
  orc_cmd->add_option("--support", support_text,
                      "Support list: v1,v2,... (or mu:sd pairs for gauss-locscale)")
      ->required();
  orc_cmd->add_option("--kernel", orc_kernel, "poisson | gauss-loc | gauss-locscale")
      ->capture_default_str();
  orc_cmd->add_option("--sigma", orc_sigma, "Fixed scale for gauss-loc");
  orc_cmd->add_option("--alpha0", alpha0, "Dirichlet precision (default 2^gamma - 1)");
  orc_cmd->add_option("--gamma", orc_gamma, "Recursion exponent used for the default alpha0")
      ->capture_default_str();
  orc_cmd->add_option("--perms", orc_perms, "Permutations for the recursion comparison")
      ->capture_default_str();
  orc_cmd->add_option("--paths", paths, "Sequential imputation paths")->capture_default_str();
  orc_cmd->add_option("--seed", orc_seed, "Seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*fit_cmd) {
      if (!rho && !no_penalty) {
        throw sasa::InvalidInput("fit needs either --rho VALUE or --no-penalty");
      }
      const sasa::KernelSpec kernel = make_kernel(kernel_name, sigma);
      const sasa::Grid grid = sasa::parse_grid_spec(grid_text);
      const std::vector<double> data = sasa::load_observations(data_path);
      pr.permutation_seed = sasa::derive_seed(seed, 1);
      ann.chain_seed = sasa::derive_seed(seed, 2);
      ann.rho = rho;
      ann.initial_level = initial_level;
      ann.removal_floor = !literal_beta;
      const sasa::FitResult fit = sasa::run_fit(data, grid, kernel, pr, ann);
      json doc = sasa::fit_to_json(fit, kernel, grid, pr, ann, data.size());
      doc["config"]["seed"] = seed;
      if (!density_path.empty()) {
        sasa::write_density_csv(density_path, sasa::density_curve(fit, kernel, data));
      }
      if (!trace_path.empty()) sasa::write_trace_csv(trace_path, fit.trace);
      emit(doc, out_path);
    } else if (*sim_cmd) {
      const sasa::MixtureModelSpec model = sasa::load_model_spec(model_path);
      const std::vector<double> draws = sasa::simulate(model, sim_n, sim_seed);
      std::ofstream file;
      if (!sim_out.empty()) {
        file.open(sim_out);
        if (!file) throw sasa::InvalidInput("cannot open output file '" + sim_out + "'");
      }
      std::ostream& out = sim_out.empty() ? std::cout : file;
      out << std::setprecision(17);
      for (double y : draws) out << y << '\n';
    } else if (*exp_cmd) {
      const sasa::ExperimentSpec spec = sasa::load_experiment_spec(spec_path);
      std::vector<sasa::ReplicationRecord> records;
      const sasa::ComplexityTable table = sasa::run_experiment(spec, threads, &records);
      if (!table_path.empty()) {
        std::ofstream out(table_path);
        if (!out) throw sasa::InvalidInput("cannot open table file '" + table_path + "'");
        out << table.to_csv();
      }
      double seconds = 0.0;
      for (const auto& r : records) seconds += r.seconds;
      std::cout << table.to_text();
      std::cout << "  mean seconds per replication: " << std::fixed << std::setprecision(2)
                << seconds / static_cast<double>(records.size()) << '\n';
    } else if (*orc_cmd) {
      const sasa::KernelSpec kernel = make_kernel(orc_kernel, orc_sigma);
      const std::vector<double> data = sasa::load_observations(orc_data);
      sasa::check_observations(data, kernel);
      std::vector<sasa::SupportPoint> support;
      std::size_t idx = 0;
      for (const auto& item : sasa::parse_number_list_pairs(support_text)) {
        sasa::SupportPoint u{idx++, item.first, 0.0};
        if (kernel.family() == sasa::KernelFamily::GaussianLocationScale) {
          if (!item.second) throw sasa::InvalidInput("gauss-locscale support needs mu:sd pairs");
          u.variance = *item.second * *item.second;
        }
        kernel.check_support_point(u);
        support.push_back(u);
      }
      if (support.empty()) throw sasa::InvalidInput("empty support list");
      sasa::DirichletSpec spec = sasa::DirichletSpec::matching_recursion(support.size(), orc_gamma);
      if (alpha0) spec.alpha0 = *alpha0;
      const auto si = sasa::sequential_imputation_marginal(support, data, spec, kernel, paths, orc_seed);
      sasa::PRConfig pr_cfg;
      pr_cfg.gamma = orc_gamma;
      pr_cfg.n_permutations = orc_perms;
      const sasa::PermutationSet perms(data.size(), orc_perms, sasa::derive_seed(orc_seed, 1));
      const double ln = sasa::log_marginal_averaged(support, data, perms, pr_cfg, kernel);
      json doc = {{"status", "ok"},
                  {"n", data.size()},
                  {"support_size", support.size()},
                  {"alpha0", spec.alpha0},
                  {"sequential_imputation",
                   {{"log_marginal", si.log_estimate},
                    {"standard_error", si.standard_error},
                    {"paths", si.paths}}},
                  {"recursion_log_marginal", ln}};
      if (data.size() <= sasa::kExactMaxObservations && support.size() <= sasa::kExactMaxSupport) {
        doc["exact_log_marginal"] = sasa::exact_log_marginal(support, data, spec, kernel);
        doc["filter_l1_discrepancy"] =
            sasa::filter_discrepancy(support, data, spec, orc_gamma, kernel);
      }
      emit(doc, "");
    }
  } catch (const std::exception& e) {
    std::cerr << json{{"status", "error"}, {"error", e.what()}}.dump() << '\n';
    return 1;
  }
  return 0;
}

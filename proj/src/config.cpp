#include "sasa/config.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "sasa/error.hpp"

namespace sasa {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

double to_double(std::string_view text) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw InvalidInput("cannot parse '" + std::string(text) + "' as a number");
  }
  return value;
}

std::size_t to_count(std::string_view text) {
  const double value = to_double(text);
  if (value < 1 || value != static_cast<double>(static_cast<std::size_t>(value))) {
    throw InvalidInput("grid count must be a positive integer");
  }
  return static_cast<std::size_t>(value);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return text.str();
}

YAML::Node load_yaml(const std::string& text) {
  try {
    return YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw InvalidInput(std::string("malformed YAML: ") + e.what());
  }
}

template <typename T>
T get(const YAML::Node& node, const char* key, T fallback) {
  const YAML::Node child = node[key];
  if (!child || child.IsNull()) return fallback;
  try {
    return child.as<T>();
  } catch (const YAML::Exception&) {
    throw InvalidInput(std::string("field '") + key + "' has the wrong type");
  }
}

std::vector<double> axis_from_yaml(const YAML::Node& node, const char* name) {
  if (node.IsScalar()) return parse_axis_spec(node.as<std::string>());
  if (node.IsSequence()) {
    std::vector<double> values;
    for (const auto& v : node) values.push_back(v.as<double>());
    return values;
  }
  if (node.IsMap()) {
    if (!node["lo"] || !node["hi"] || !node["count"]) {
      throw InvalidInput(std::string("grid ") + name + " needs lo, hi and count");
    }
    return Grid::equispaced(node["lo"].as<double>(), node["hi"].as<double>(),
                            node["count"].as<std::size_t>());
  }
  throw InvalidInput(std::string("grid ") + name + " must be a descriptor, list or map");
}

Grid grid_from_yaml(const YAML::Node& node) {
  if (node.IsScalar()) return parse_grid_spec(node.as<std::string>());
  if (!node.IsMap() || !node["axis1"]) throw InvalidInput("grid needs an axis1 entry");
  std::vector<double> axis1 = axis_from_yaml(node["axis1"], "axis1");
  if (node["axis2"]) return Grid::two_d(std::move(axis1), axis_from_yaml(node["axis2"], "axis2"));
  return Grid::one_d(std::move(axis1));
}

MixtureModelSpec model_from_yaml(const YAML::Node& node) {
  if (!node.IsMap()) throw InvalidInput("model must be a map");
  MixtureModelSpec model;
  const auto family = parse_kernel_family(get<std::string>(node, "kernel", "poisson"));
  switch (family) {
    case KernelFamily::PoissonRate: model.kernel = KernelSpec::poisson(); break;
    case KernelFamily::GaussianLocation:
      model.kernel = KernelSpec::gaussian_location(get<double>(node, "sigma", 1.0));
      break;
    case KernelFamily::GaussianLocationScale:
      model.kernel = KernelSpec::gaussian_location_scale();
      break;
  }
  const YAML::Node comps = node["components"];
  if (!comps || !comps.IsSequence()) throw InvalidInput("model needs a components list");
  for (const auto& c : comps) {
    MixtureComponent comp;
    comp.location = get<double>(c, "location", 0.0);
    comp.variance = get<double>(c, "variance", 0.0);
    comp.weight = get<double>(c, "weight", 0.0);
    model.components.push_back(comp);
  }
  model.validate();
  return model;
}

}  // namespace

std::vector<double> parse_number_list(std::string_view text) {
  std::vector<double> values;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const auto end = comma == std::string_view::npos ? text.size() : comma;
    values.push_back(to_double(text.substr(start, end - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return values;
}

std::vector<std::pair<double, std::optional<double>>> parse_number_list_pairs(
    std::string_view text) {
  std::vector<std::pair<double, std::optional<double>>> items;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const auto end = comma == std::string_view::npos ? text.size() : comma;
    const std::string_view item = text.substr(start, end - start);
    if (const auto colon = item.find(':'); colon != std::string_view::npos) {
      items.emplace_back(to_double(item.substr(0, colon)), to_double(item.substr(colon + 1)));
    } else {
      items.emplace_back(to_double(item), std::nullopt);
    }
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return items;
}

std::vector<double> parse_axis_spec(std::string_view text) {
  text = trim(text);
  if (text.empty()) throw InvalidInput("empty grid axis descriptor");
  if (text.find(':') != std::string_view::npos) {
    const auto first = text.find(':');
    const auto second = text.find(':', first + 1);
    if (second == std::string_view::npos || text.find(':', second + 1) != std::string_view::npos) {
      throw InvalidInput("equispaced axis must be lo:hi:count");
    }
    return Grid::equispaced(to_double(text.substr(0, first)),
                            to_double(text.substr(first + 1, second - first - 1)),
                            to_count(text.substr(second + 1)));
  }
  return parse_number_list(text);
}

Grid parse_grid_spec(std::string_view text) {
  const auto slash = text.find('/');
  if (slash == std::string_view::npos) return Grid::one_d(parse_axis_spec(text));
  return Grid::two_d(parse_axis_spec(text.substr(0, slash)),
                     parse_axis_spec(text.substr(slash + 1)));
}

MixtureModelSpec parse_model_spec(const std::string& yaml_text) {
  return model_from_yaml(load_yaml(yaml_text));
}

MixtureModelSpec load_model_spec(const std::string& path) {
  return parse_model_spec(read_file(path));
}

ExperimentSpec parse_experiment_spec(const std::string& yaml_text, const std::string& base_dir) {
  const YAML::Node root = load_yaml(yaml_text);
  if (!root.IsMap()) throw InvalidInput("experiment spec must be a map");
  ExperimentSpec spec;
  spec.name = get<std::string>(root, "name", "experiment");
  if (root["model"]) {
    spec.model = model_from_yaml(root["model"]);
  } else if (root["model_file"]) {
    const std::filesystem::path file = root["model_file"].as<std::string>();
    spec.model = load_model_spec(file.is_absolute() ? file.string()
                                                    : (std::filesystem::path(base_dir) / file).string());
  } else {
    throw InvalidInput("experiment spec needs a model or model_file");
  }
  spec.n = get<std::size_t>(root, "n", 100);
  spec.replications = get<std::size_t>(root, "replications", 1);
  spec.master_seed = get<std::uint64_t>(root, "seed", 0);

  const KernelFamily family = spec.model.kernel.family();
  if (root["grid"]) {
    spec.grid = grid_from_yaml(root["grid"]);
  } else if (family == KernelFamily::PoissonRate) {
    spec.grid = Grid::one_d(Grid::equispaced(0.0, 20.0, 101));
  } else if (family == KernelFamily::GaussianLocationScale) {
    spec.grid = Grid::two_d(Grid::equispaced(-2.0, 2.0, 40), Grid::equispaced(0.1, 4.0, 25));
  } else {
    throw InvalidInput("gauss-loc experiments need an explicit grid");
  }

  const YAML::Node rec = root["recursion"] ? root["recursion"] : YAML::Node(YAML::NodeType::Map);
  spec.pr.gamma = get<double>(rec, "gamma", spec.pr.gamma);
  spec.pr.n_permutations = get<std::size_t>(rec, "permutations", spec.pr.n_permutations);
  if (rec["f0"]) spec.pr.f0 = rec["f0"].as<std::vector<double>>();

  const YAML::Node ann = root["anneal"] ? root["anneal"] : YAML::Node(YAML::NodeType::Map);
  spec.anneal.iterations = get<std::size_t>(ann, "iterations", spec.anneal.iterations);
  spec.anneal.temp_scale = get<double>(ann, "temp_scale", spec.anneal.temp_scale);
  spec.anneal.flip_distance = get<std::size_t>(ann, "flip_distance", spec.anneal.flip_distance);
  spec.anneal.sharpness = get<double>(ann, "sharpness", spec.anneal.sharpness);
  spec.anneal.removal_floor = get<bool>(ann, "removal_floor", spec.anneal.removal_floor);
  spec.anneal.initial_level = get<std::size_t>(ann, "initial_level", spec.anneal.initial_level);
  spec.anneal.chains = get<std::size_t>(ann, "chains", spec.anneal.chains);
  const YAML::Node rho = ann["rho"];
  if (rho && !rho.IsNull()) {
    const std::string text = rho.as<std::string>();
    if (text == "none" || text == "off") {
      spec.anneal.rho.reset();
    } else {
      spec.anneal.rho = rho.as<double>();
    }
  } else if (!rho && family == KernelFamily::PoissonRate) {
    spec.anneal.rho = 15.0 / static_cast<double>(spec.grid.size());
  }
  spec.validate();
  return spec;
}

ExperimentSpec load_experiment_spec(const std::string& path) {
  return parse_experiment_spec(read_file(path),
                               std::filesystem::path(path).parent_path().string());
}

}  // namespace sasa

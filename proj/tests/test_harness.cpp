#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "sasa/config.hpp"
#include "sasa/error.hpp"
#include "sasa/harness.hpp"

using namespace sasa;

namespace {

const std::string kData = SASA_DATA_DIR;

double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double variance(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

std::vector<double> parse(const std::string& text) {
  std::istringstream in(text);
  return parse_observations(in, "test");
}

ExperimentSpec small_poisson_experiment(std::size_t replications) {
  ExperimentSpec spec = parse_experiment_spec(R"(
name: small
model:
  kernel: poisson
  components:
    - {location: 1, weight: 0.5}
    - {location: 9, weight: 0.5}
n: 60
seed: 77
grid: "0:12:13"
recursion: {permutations: 5}
anneal: {iterations: 200, rho: 0.1}
)");
  spec.replications = replications;
  return spec;
}

}  // namespace

TEST_CASE("simulate moments") {
  SUBCASE("two-point poisson mean") {
    const auto data = simulate(load_model_spec(kData + "/models/poisson_model1.yaml"), 100000, 1);
    CHECK(std::abs(mean(data) - 5.0) < 0.1);
  }
  SUBCASE("three-component gaussian variance") {
    const auto model = load_model_spec(kData + "/models/gauss_three_component.yaml");
    CHECK(model.variance() == doctest::Approx(5.07).epsilon(1e-12));
    const auto data = simulate(model, 100000, 2);
    CHECK(std::abs(variance(data) / 5.07 - 1.0) < 0.05);
  }
  SUBCASE("single component") {
    MixtureModelSpec model;
    model.kernel = KernelSpec::gaussian_location(2.0);
    model.components = {{3.0, 0.0, 1.0}};
    const std::size_t n = 20000;
    const auto data = simulate(model, n, 3);
    CHECK(std::abs(mean(data) - 3.0) < 4.0 * 2.0 / std::sqrt(static_cast<double>(n)));
  }
  SUBCASE("minor component frequency") {
    const auto model = load_model_spec(kData + "/models/poisson_model3.yaml");
    const auto data = simulate(model, 100000, 4);
    double expected_low = 0.0;
    for (int y = 0; y <= 4; ++y) {
      expected_low += 0.95 * model.kernel.density(y, {0, 1.0, 0.0}) +
                      0.05 * model.kernel.density(y, {1, 10.0, 0.0});
    }
    const double low = static_cast<double>(std::count_if(data.begin(), data.end(),
                                                         [](double y) { return y <= 4; })) /
                       static_cast<double>(data.size());
    CHECK(std::abs(low - expected_low) < 0.01);
    // component-1 frequency recovered from the mixture mean: m = 0.95 + 10 (1 - p)
    const double p = 1.0 - (mean(data) - 1.0) / 9.0;
    CHECK(std::abs(p - 0.95) < 0.01);
  }
  SUBCASE("reproducible") {
    const auto model = load_model_spec(kData + "/models/poisson_model2.yaml");
    CHECK(simulate(model, 50, 9) == simulate(model, 50, 9));
    CHECK(simulate(model, 50, 9) != simulate(model, 50, 10));
  }
  SUBCASE("invalid models") {
    MixtureModelSpec model;
    model.components = {{1.0, 0.0, 0.4}, {2.0, 0.0, 0.4}};
    CHECK_THROWS_AS(model.validate(), InvalidInput);
    model.components = {{-1.0, 0.0, 1.0}};
    CHECK_THROWS_AS(model.validate(), InvalidInput);
  }
}

TEST_CASE("observation files") {
  const auto galaxy = load_observations(kData + "/galaxy.txt");
  CHECK(galaxy.size() == 82);
  CHECK(galaxy.front() == doctest::Approx(9.172));
  CHECK(parse("velocity\n1.5\n2\n\n# note\n3.25\n") == std::vector<double>{1.5, 2.0, 3.25});
  CHECK(parse("y,extra\n1,a\n2,b\n") == std::vector<double>{1.0, 2.0});
  CHECK_THROWS_AS(parse(""), InvalidInput);
  CHECK_THROWS_AS(parse("header\n"), InvalidInput);
  try {
    parse("1\n2\nabc\n4\n");
    FAIL("expected a parse error");
  } catch (const InvalidInput& e) {
    CHECK(std::string(e.what()).find("test:3:") != std::string::npos);
  }
  CHECK_THROWS_AS(load_observations(kData + "/does-not-exist.txt"), InvalidInput);
  CHECK_THROWS_AS(check_observations(std::vector<double>{1.0, 2.5}, KernelSpec::poisson()),
                  InvalidInput);
  CHECK_NOTHROW(check_observations(std::vector<double>{1.0, 2.5}, KernelSpec::gaussian_location(1.0)));
}

TEST_CASE("fit pipeline") {
  const auto pois = KernelSpec::poisson();
  const Grid grid = Grid::one_d(Grid::equispaced(0.0, 12.0, 13));
  PRConfig pr;
  pr.n_permutations = 5;
  AnnealConfig ann;
  ann.iterations = 200;
  ann.rho = 0.1;
  CHECK_THROWS_AS(run_fit(std::vector<double>{}, grid, pois, pr, ann), InvalidInput);
  CHECK_THROWS_AS(run_fit(std::vector<double>{1.0}, Grid::two_d({1.0}, {1.0}), pois, pr, ann),
                  InvalidInput);

  const auto data = simulate(load_model_spec(kData + "/models/poisson_model1.yaml"), 80, 5);
  const FitResult fit = run_fit(data, grid, pois, pr, ann);
  CHECK(!fit.best_support.empty());
  CHECK(std::abs(std::accumulate(fit.best_weights.begin(), fit.best_weights.end(), 0.0) - 1.0) <
        1e-10);

  SUBCASE("density curve") {
    const auto curve = density_curve(fit, pois, data);
    CHECK(curve.front().y >= 0.0);
    for (const auto& p : curve) CHECK(p.y == std::floor(p.y));
    double mass = 0.0;
    for (const auto& p : curve) mass += p.density;
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-3));

    const auto gauss = KernelSpec::gaussian_location(1.0);
    FitResult g;
    g.best_support = {{0, 0.0, 0.0}, {1, 6.0, 0.0}};
    g.best_weights = MixingWeights({0.5, 0.5});
    const std::vector<double> ys{0.0, 6.0};
    const auto gc = density_curve(g, gauss, ys);
    CHECK(gc.size() == 512);
    CHECK(gc.front().y == doctest::Approx(-3.0));
    CHECK(gc.back().y == doctest::Approx(9.0));
    CHECK(count_modes(gc) == 2);
  }
  SUBCASE("json output") {
    const auto j = fit_to_json(fit, pois, grid, pr, ann, data.size());
    CHECK(j["status"] == "ok");
    CHECK(j["size"] == fit.best_support.size());
    CHECK(j["support"].size() == fit.best_support.size());
    CHECK(j["weights"].size() == fit.best_support.size());
    CHECK(j["objective"].get<double>() == fit.best_objective);
    CHECK(j["config"]["anneal"]["iterations"] == 200);
    CHECK(j.contains("seconds"));
  }
  SUBCASE("initial masks") {
    CHECK(initial_mask(grid, ann) == SupportMask::all_ones(13));
    const Grid two = Grid::two_d({0.0, 1.0, 2.0}, {0.5, 1.0, 1.5, 2.0});
    const auto m = initial_mask(two, ann);
    CHECK(m.encoding() == Encoding::Level);
    for (std::size_t s = 0; s < 3; ++s) CHECK(m[s] == 2);
    AnnealConfig low = ann;
    low.initial_level = 1;
    CHECK(initial_mask(two, low)[0] == 1);
    low.initial_level = 5;
    CHECK_THROWS_AS(initial_mask(two, low), InvalidInput);
  }
}

TEST_CASE("replication seeds are stable") {
  const auto a = replication_seeds(5, 3);
  CHECK(a.data == replication_seeds(5, 3).data);
  CHECK(a.data != a.permutations);
  CHECK(a.permutations != a.chain);
  CHECK(a.data != replication_seeds(5, 4).data);
  CHECK(a.data != replication_seeds(6, 3).data);
}

TEST_CASE("experiments") {
  SUBCASE("a single replication is a point mass") {
    const auto table = run_experiment(small_poisson_experiment(1));
    CHECK(table.successes() == 1);
    CHECK(table.counts.size() == 1);
    CHECK(table.proportion(table.modal_size()) == 1.0);
  }
  SUBCASE("tables are reproducible and independent of threads") {
    const auto spec = small_poisson_experiment(8);
    std::vector<ReplicationRecord> ra, rb;
    const auto a = run_experiment(spec, 1, &ra);
    const auto b = run_experiment(spec, 3, &rb);
    CHECK(a.counts == b.counts);
    CHECK(a.to_csv() == b.to_csv());
    REQUIRE(ra.size() == rb.size());
    for (std::size_t r = 0; r < ra.size(); ++r) {
      CHECK(ra[r].index == r);
      CHECK(ra[r].objective == rb[r].objective);
    }
    double total = 0.0;
    for (const auto& [size, count] : a.counts) total += a.proportion(size);
    CHECK(std::abs(total - 1.0) < 1e-9);
    // adding replications leaves earlier ones unchanged
    std::vector<ReplicationRecord> rc;
    run_experiment(small_poisson_experiment(10), 1, &rc);
    for (std::size_t r = 0; r < ra.size(); ++r) CHECK(rc[r].objective == ra[r].objective);
  }
  SUBCASE("failures are counted, not dropped") {
    std::vector<ReplicationRecord> recs(3);
    recs[0] = {0, true, 2, -1.0, 0.0, ""};
    recs[1] = {1, false, 0, 0.0, 0.0, "degenerate"};
    recs[2] = {2, true, 3, -1.0, 0.0, ""};
    const auto t = ComplexityTable::from_records("x", recs);
    CHECK(t.failures == 1);
    CHECK(t.successes() == 2);
    CHECK(t.proportion(2) == 0.5);
    CHECK(t.modal_size() == 2);
    CHECK(t.to_csv() == "size,proportion,count\n2,0.5,1\n3,0.5,1\n");
    CHECK(t.to_text().find("1 failed") != std::string::npos);
  }
}

TEST_CASE("config parsing") {
  SUBCASE("grid descriptors") {
    CHECK(parse_axis_spec("0:1:3") == std::vector<double>{0.0, 0.5, 1.0});
    CHECK(parse_axis_spec("1, 2.5,4") == std::vector<double>{1.0, 2.5, 4.0});
    const Grid g = parse_grid_spec("5:40:71");
    CHECK(g.size() == 71);
    CHECK(g.axis1()[1] == doctest::Approx(5.5));
    const Grid two = parse_grid_spec("5:40:71/0.5:1.5:11");
    CHECK(two.dims() == 2);
    CHECK(two.size() == 781);
    CHECK_THROWS_AS(parse_axis_spec("1:2"), InvalidInput);
    CHECK_THROWS_AS(parse_axis_spec("1:0:3"), InvalidInput);
    CHECK_THROWS_AS(parse_axis_spec("a,b"), InvalidInput);
    CHECK_THROWS_AS(parse_grid_spec("1:2:3/1:2:3/1:2:3"), InvalidInput);
  }
  SUBCASE("number lists") {
    CHECK(parse_number_list("1,2,3") == std::vector<double>{1.0, 2.0, 3.0});
    const auto pairs = parse_number_list_pairs("1:0.5,2");
    REQUIRE(pairs.size() == 2);
    CHECK(pairs[0].second == 0.5);
    CHECK(!pairs[1].second);
  }
  SUBCASE("model files") {
    const auto m = load_model_spec(kData + "/models/gauss_three_component.yaml");
    CHECK(m.kernel.family() == KernelFamily::GaussianLocationScale);
    CHECK(m.components.size() == 3);
    CHECK(m.components[1].variance == 10.0);
    CHECK_THROWS_AS(parse_model_spec("kernel: poisson\ncomponents: []\n"), InvalidInput);
    CHECK_THROWS_AS(parse_model_spec("kernel: cauchy\ncomponents: [{location: 1, weight: 1}]\n"),
                    InvalidInput);
  }
  SUBCASE("experiment files and defaults") {
    const auto p = load_experiment_spec(kData + "/experiments/poisson_model1_n100.yaml");
    CHECK(p.n == 100);
    CHECK(p.replications == 50);
    CHECK(p.grid.size() == 101);
    CHECK(p.grid.axis1().back() == doctest::Approx(20.0));
    REQUIRE(p.anneal.rho);
    CHECK(*p.anneal.rho == doctest::Approx(15.0 / 101.0));
    const auto g = load_experiment_spec(kData + "/experiments/gauss_n250.yaml");
    CHECK(g.grid.size1() == 40);
    CHECK(g.grid.size2() == 25);
    CHECK(!g.anneal.rho);
    CHECK(g.pr.n_permutations == 100);
    CHECK_THROWS_AS(parse_experiment_spec("n: 10\n"), InvalidInput);
    CHECK_THROWS_AS(parse_experiment_spec("model:\n  kernel: gauss-loc\n  sigma: 1\n  components: [{location: 0, weight: 1}]\n"),
                    InvalidInput);
  }
}

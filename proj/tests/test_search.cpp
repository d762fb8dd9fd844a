#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "sasa/error.hpp"
#include "sasa/harness.hpp"
#include "sasa/search.hpp"

using namespace sasa;

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::size_t hamming(const SupportMask& a, const SupportMask& b) {
  std::size_t d = 0;
  for (std::size_t s = 0; s < a.length(); ++s) d += a[s] != b[s];
  return d;
}

MixtureModelSpec poisson_pair(double a, double b, double wa) {
  MixtureModelSpec m;
  m.kernel = KernelSpec::poisson();
  m.components = {{a, 0.0, wa}, {b, 0.0, 1.0 - wa}};
  return m;
}

}  // namespace

TEST_CASE("penalty") {
  const auto empty = SupportMask::binary(std::vector<std::uint8_t>(7, 0));
  CHECK(penalty(empty, 7, 0.3) == doctest::Approx(7.0 * std::log(0.7)).epsilon(1e-14));
  std::vector<std::uint8_t> bits(101, 0);
  std::fill(bits.begin(), bits.begin() + 15, 1);
  CHECK(penalty(SupportMask::binary(bits), 101, 15.0 / 101.0) ==
        doctest::Approx(-42.432551706632389).epsilon(1e-13));
  for (std::size_t k = 0; k <= 10; ++k) {
    std::vector<std::uint8_t> b(10, 0);
    std::fill(b.begin(), b.begin() + static_cast<long>(k), 1);
    CHECK(penalty(SupportMask::binary(b), 10, 0.5) ==
          doctest::Approx(10.0 * std::log(0.5)).epsilon(1e-14));
  }
  CHECK_THROWS_AS(penalty(empty, 7, 1.0), InvalidInput);
}

TEST_CASE("binary proposal") {
  const auto mask = SupportMask::binary({1, 0, 1});
  const auto w = binary_selection_weights(mask, 1.0);
  CHECK(w == std::vector<double>{2.5, 1.0, 2.5});
  const auto ones = binary_selection_weights(SupportMask::all_ones(6), 1.0);
  CHECK(std::all_of(ones.begin(), ones.end(), [](double v) { return v == 2.0; }));

  SUBCASE("selection frequencies") {
    Rng rng = make_rng(5, 0);
    std::vector<double> hits(3, 0.0);
    const int draws = 120000;
    for (int i = 0; i < draws; ++i) {
      const auto next = propose_binary(mask, 1, 1.0, rng);
      for (std::size_t s = 0; s < 3; ++s) hits[s] += next[s] != mask[s];
    }
    CHECK(hits[0] / draws == doctest::Approx(5.0 / 12.0).epsilon(0.02));
    CHECK(hits[1] / draws == doctest::Approx(2.0 / 12.0).epsilon(0.03));
    CHECK(hits[2] / draws == doctest::Approx(5.0 / 12.0).epsilon(0.02));
  }
  SUBCASE("exactly k positions change") {
    Rng rng = make_rng(6, 0);
    std::vector<std::uint8_t> bits(20, 0);
    for (std::size_t s = 0; s < 20; s += 3) bits[s] = 1;
    const auto start = SupportMask::binary(bits);
    for (std::size_t k = 1; k <= 5; ++k) {
      for (int i = 0; i < 200; ++i) CHECK(hamming(start, propose_binary(start, k, 2.0, rng)) == k);
    }
  }
}

TEST_CASE("location-scale proposal") {
  const auto mask = SupportMask::level({0, 3, 0, 0}, 5);
  CHECK(zero_fraction(mask) == 0.75);
  CHECK(locscale_selection_weights(mask, 1.0) == std::vector<double>{1.0, 5.0, 1.0, 1.0});
  CHECK(removal_probability(mask, false) == 0.75);
  CHECK(removal_probability(mask, true) == 0.75);

  SUBCASE("all active: literal rule never removes, the floor does") {
    const auto full = SupportMask::uniform_level(4, 5, 3);
    CHECK(locscale_selection_weights(full, 1.0) == std::vector<double>{2.0, 2.0, 2.0, 2.0});
    CHECK(removal_probability(full, false) == 0.0);
    CHECK(removal_probability(full, true) == 0.25);
    Rng rng = make_rng(7, 0);
    for (int i = 0; i < 2000; ++i) {
      const auto next = propose_locscale(full, 1.0, rng, false);
      CHECK(next.active_count() == 4);
    }
    bool removed = false;
    for (int i = 0; i < 2000 && !removed; ++i) {
      removed = propose_locscale(full, 1.0, rng, true).active_count() == 3;
    }
    CHECK(removed);
  }
  SUBCASE("boundary levels") {
    Rng rng = make_rng(8, 0);
    std::set<int> from_low, from_high, from_zero;
    const auto low = SupportMask::uniform_level(2, 5, 1);
    const auto high = SupportMask::uniform_level(2, 5, 5);
    for (int i = 0; i < 4000; ++i) {
      auto a = propose_locscale(low, 1.0, rng);
      auto b = propose_locscale(high, 1.0, rng);
      CHECK(hamming(a, low) == 1);
      CHECK(hamming(b, high) == 1);
      for (std::size_t s = 0; s < 2; ++s) {
        if (a[s] != low[s]) from_low.insert(a[s]);
        if (b[s] != high[s]) from_high.insert(b[s]);
      }
      auto c = propose_locscale(SupportMask::level({0, 2, 0}, 5), 1.0, rng);
      if (c[0] != 0) from_zero.insert(c[0]);
      if (c[2] != 0) from_zero.insert(c[2]);
    }
    CHECK(from_low == std::set<int>{0, 2});
    CHECK(from_high == std::set<int>{0, 4});
    CHECK(from_zero == std::set<int>{1, 2, 3, 4, 5});
  }
  SUBCASE("interior moves by one level or is removed") {
    Rng rng = make_rng(9, 0);
    std::set<int> seen;
    const auto mid = SupportMask::level({3, 0}, 5);
    for (int i = 0; i < 4000; ++i) {
      auto next = propose_locscale(mid, 1.0, rng);
      if (next[0] != 3) seen.insert(next[0]);
    }
    CHECK(seen == std::set<int>{0, 2, 4});
  }
  SUBCASE("single scale always removes a selected active location") {
    Rng rng = make_rng(10, 0);
    const auto one = SupportMask::level({1, 1, 0}, 1);
    for (int i = 0; i < 500; ++i) {
      const auto next = propose_locscale(one, 1.0, rng);
      CHECK(hamming(next, one) == 1);
    }
  }
}

TEST_CASE("temperature and acceptance") {
  CHECK(temperature(1, 1.0) == doctest::Approx(1.4426950408889634).epsilon(1e-15));
  CHECK(temperature(1, 2.0) == 2.0 * temperature(1, 1.0));
  for (std::size_t t = 1; t < 2000; ++t) CHECK(temperature(t + 1, 1.0) < temperature(t, 1.0));
  CHECK_THROWS(temperature(0, 1.0));

  CHECK(acceptance_prob(-3.0, -3.0, 0.7) == 1.0);
  CHECK(acceptance_prob(-3.7, -3.0, 0.7) == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));
  CHECK(acceptance_prob(kNegInf, -3.0, 0.7) == 0.0);
  Rng rng = make_rng(11, 0);
  for (int i = 0; i < 10000; ++i) {
    const double cur = -1000.0 * uniform01(rng);
    const double next = cur + 50.0 * uniform01(rng);
    CHECK(acceptance_prob(next, cur, 1e-3 + uniform01(rng)) == 1.0);
  }
}

TEST_CASE("encode and decode") {
  SUBCASE("binary round trip") {
    const Grid grid = Grid::one_d(Grid::equispaced(0.0, 10.0, 30));
    Rng rng = make_rng(12, 0);
    for (int rep = 0; rep < 1000; ++rep) {
      std::vector<std::size_t> subset;
      for (std::size_t s = 0; s < grid.size(); ++s) {
        if (uniform01(rng) < 0.3) subset.push_back(s);
      }
      CHECK(SupportMask::encode(subset, grid, Encoding::Binary).decode(grid) == subset);
    }
  }
  SUBCASE("admissible level masks number (S2 + 1)^S1") {
    for (std::size_t S1 = 1; S1 <= 4; ++S1) {
      for (std::size_t S2 = 1; S2 <= 3; ++S2) {
        std::vector<double> loc(S1), scale(S2);
        for (std::size_t i = 0; i < S1; ++i) loc[i] = static_cast<double>(i);
        for (std::size_t h = 0; h < S2; ++h) scale[h] = 1.0 + static_cast<double>(h);
        const Grid grid = Grid::two_d(loc, scale);
        const std::size_t cells = S1 * S2;
        std::set<std::string> keys;
        for (std::size_t bits = 0; bits < (std::size_t{1} << cells); ++bits) {
          std::vector<std::size_t> subset;
          for (std::size_t c = 0; c < cells; ++c) {
            if (bits >> c & 1U) subset.push_back(c);
          }
          try {
            const auto mask = SupportMask::encode(subset, grid, Encoding::Level);
            CHECK(mask.decode(grid) == subset);
            keys.insert(mask.key());
          } catch (const InvalidInput&) {
          }
        }
        CHECK(keys.size() == static_cast<std::size_t>(std::pow(S2 + 1, S1)));
      }
    }
  }
}

TEST_CASE("config validation") {
  AnnealConfig cfg;
  CHECK_NOTHROW(cfg.validate(10));
  cfg.flip_distance = 11;
  CHECK_THROWS_AS(cfg.validate(10), InvalidInput);
  cfg.flip_distance = 1;
  cfg.sharpness = 0.5;
  CHECK_THROWS_AS(cfg.validate(10), InvalidInput);
  cfg.sharpness = 1.0;
  cfg.temp_scale = 0.0;
  CHECK_THROWS_AS(cfg.validate(10), InvalidInput);
  cfg.temp_scale = 1.0;
  cfg.rho = 1.0;
  CHECK_THROWS_AS(cfg.validate(10), InvalidInput);
  cfg.rho.reset();
  cfg.chains = 0;
  CHECK_THROWS_AS(cfg.validate(10), InvalidInput);
}

TEST_CASE("penalty at rho = 1/2 leaves the argmax unchanged") {
  const auto pois = KernelSpec::poisson();
  const Grid grid = Grid::one_d(Grid::equispaced(0.0, 11.0, 12));
  const auto data = simulate(poisson_pair(1.0, 8.0, 0.4), 40, 13);
  PRConfig cfg;
  cfg.n_permutations = 3;
  const MarginalEvaluator ev(pois, grid, data, PermutationSet(data.size(), 3, 14), cfg);
  const SupportObjective plain(ev, grid, std::nullopt);
  const SupportObjective half(ev, grid, 0.5);
  std::size_t best_plain = 0, best_half = 0;
  double top_plain = kNegInf, top_half = kNegInf;
  for (std::size_t bits = 1; bits < (1U << grid.size()); ++bits) {
    std::vector<std::uint8_t> h(grid.size());
    for (std::size_t s = 0; s < grid.size(); ++s) h[s] = bits >> s & 1U;
    const auto mask = SupportMask::binary(h);
    const double p = plain(mask);
    const double q = half(mask);
    if (p > top_plain) top_plain = p, best_plain = bits;
    if (q > top_half) top_half = q, best_half = bits;
  }
  CHECK(best_plain == best_half);
  CHECK(plain(SupportMask::binary(std::vector<std::uint8_t>(12, 0))) == kNegInf);
}

TEST_CASE("annealing loop") {
  const auto pois = KernelSpec::poisson();
  const Grid grid = Grid::one_d(Grid::equispaced(0.0, 12.0, 25));
  const auto data = simulate(poisson_pair(1.0, 9.0, 0.5), 80, 15);
  PRConfig pr;
  pr.n_permutations = 10;
  pr.permutation_seed = 16;
  AnnealConfig cfg;
  cfg.iterations = 600;
  cfg.rho = 0.2;
  cfg.chain_seed = 17;

  SUBCASE("trace invariants") {
    const MarginalEvaluator ev(pois, grid, data, PermutationSet(data.size(), 10, 16), pr);
    const SupportObjective obj(ev, grid, cfg.rho);
    const auto initial = SupportMask::all_ones(grid.size());
    const auto out = anneal([&](const SupportMask& m) { return obj(m); }, initial, cfg,
                            make_proposal(cfg));
    CHECK(out.trace.size() == cfg.iterations + 1);
    double top = kNegInf;
    for (const auto& e : out.trace) {
      CHECK(e.support_size > 0);
      top = std::max(top, e.objective);
    }
    CHECK(out.best_objective == top);
    CHECK(out.best_objective >= obj(initial));
    CHECK(obj(out.best_mask) == out.best_objective);
    CHECK(out.trace[out.best_iteration].objective == out.best_objective);
  }
  SUBCASE("a stationary proposal returns the initial state") {
    AnnealConfig one = cfg;
    one.iterations = 1;
    const auto initial = SupportMask::binary({0, 1, 1, 0});
    const auto out = anneal([](const SupportMask& m) { return -static_cast<double>(m.active_count()); },
                            initial, one, [](const SupportMask& m, Rng&) { return m; });
    CHECK(out.best_mask == initial);
    CHECK(out.best_iteration == 0);
    CHECK(out.best_objective == -2.0);
  }
  SUBCASE("objective failures carry the iteration") {
    const auto initial = SupportMask::all_ones(4);
    int calls = 0;
    auto failing = [&](const SupportMask&) -> double {
      if (++calls > 3) throw std::runtime_error("boom");
      return 0.0;
    };
    try {
      anneal(failing, initial, cfg, make_proposal(cfg));
      FAIL("expected an exception");
    } catch (const std::exception& e) {
      CHECK(std::string(e.what()).find("iteration") != std::string::npos);
    }
    CHECK_THROWS(anneal([](const SupportMask&) { return kNegInf; }, initial, cfg,
                        make_proposal(cfg)));
  }
  SUBCASE("replays are bit-identical") {
    const auto a = run_fit(data, grid, pois, pr, cfg);
    const auto b = run_fit(data, grid, pois, pr, cfg);
    CHECK(a.best_mask == b.best_mask);
    CHECK(a.best_objective == b.best_objective);
    CHECK(a.best_log_marginal == b.best_log_marginal);
    CHECK(std::equal(a.best_weights.begin(), a.best_weights.end(), b.best_weights.begin()));
    REQUIRE(a.trace.size() == b.trace.size());
    for (std::size_t t = 0; t < a.trace.size(); ++t) {
      CHECK(a.trace[t].objective == b.trace[t].objective);
      CHECK(a.trace[t].accepted == b.trace[t].accepted);
    }
    CHECK(std::abs(std::accumulate(a.best_weights.begin(), a.best_weights.end(), 0.0) - 1.0) <
          1e-10);
  }
  SUBCASE("restarts never do worse than the first chain") {
    const auto single = run_fit(data, grid, pois, pr, cfg);
    AnnealConfig multi = cfg;
    multi.chains = 4;
    const auto best = run_fit(data, grid, pois, pr, multi);
    CHECK(best.best_objective >= single.best_objective);
    if (best.best_chain == 0) CHECK(best.best_mask == single.best_mask);
  }
}

TEST_CASE("location-scale fit keeps one scale per location") {
  const auto gauss = KernelSpec::gaussian_location_scale();
  const Grid grid = Grid::two_d(Grid::equispaced(-2.0, 2.0, 9), {0.2, 0.5, 1.0});
  MixtureModelSpec model;
  model.kernel = gauss;
  model.components = {{-1.0, 0.04, 0.5}, {1.0, 0.25, 0.5}};
  const auto data = simulate(model, 100, 18);
  PRConfig pr;
  pr.n_permutations = 5;
  AnnealConfig cfg;
  cfg.iterations = 300;
  const auto fit = run_fit(data, grid, gauss, pr, cfg);
  CHECK(fit.best_mask.encoding() == Encoding::Level);
  std::set<double> locations;
  for (const auto& u : fit.best_support) locations.insert(u.location);
  CHECK(locations.size() == fit.best_support.size());
  CHECK(fit.best_weights.size() == fit.best_support.size());
}

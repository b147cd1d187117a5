#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <flexloop/core/model.hpp>
#include <flexloop/errors.hpp>

#include "support/corpus.hpp"

using namespace flexloop;
using core::ActionGrid;
using core::CostSchedule;
using core::Trajectory;

TEST_CASE("milli-kWh conversion rounds to the nearest unit") {
    CHECK(core::to_mkwh(1.0) == 1000);
    CHECK(core::to_mkwh(0.0005) == 1);   // llround: .5 away from zero
    CHECK(core::to_mkwh(0.0004) == 0);
    CHECK(core::to_mkwh(-1.25) == -1250);
    CHECK(core::from_mkwh(1500) == doctest::Approx(1.5));
    CHECK(core::from_mkwh(core::to_mkwh(3.2)) == doctest::Approx(3.2));
}

TEST_CASE("action grid exposes levels and slot energies") {
    ActionGrid grid({0.0, 1.5, 4.0}, 6.5);
    CHECK(grid.size() == 3);
    CHECK(grid.level_kw(1) == doctest::Approx(1.5));
    CHECK(grid.levels_kw() == std::vector<double>{0.0, 1.5, 4.0});
    REQUIRE(grid.cap_xi_kwh().has_value());
    CHECK(*grid.cap_xi_kwh() == doctest::Approx(6.5));

    // Energy scales with the slot length.
    CHECK(grid.level_energy_mkwh(2, 1.0) == 4000);
    CHECK(grid.level_energy_mkwh(2, 0.5) == 2000);
    CHECK(grid.level_energy_mkwh(0, 1.0) == 0);
}

TEST_CASE("kw lookup finds the matching level or reports none") {
    ActionGrid grid({0.0, 1.0, 2.0});
    CHECK(grid.index_of_kw(1.0) == 1);
    CHECK(grid.index_of_kw(1.0 + 1e-9) == 1);
    CHECK(grid.index_of_kw(1.5) == -1);
    CHECK(grid.index_of_kw(2.0) == 2);
}

TEST_CASE("round-down picks the largest level not exceeding the energy") {
    ActionGrid grid({0.0, 1.0, 2.0, 3.0});
    CHECK(grid.round_down_to_level(2500, 1.0) == 2);
    CHECK(grid.round_down_to_level(3000, 1.0) == 3);
    CHECK(grid.round_down_to_level(999, 1.0) == 0);
    CHECK(grid.round_down_to_level(0, 1.0) == 0);

    // Grids that do not start at zero fall back to the lowest level.
    ActionGrid positive({2.0, 4.0});
    CHECK(positive.round_down_to_level(1000, 1.0) == 0);
}

TEST_CASE("linear costs price the delivered energy") {
    CostSchedule costs = CostSchedule::linear({3.0, 1.0, 2.0});
    CHECK(costs.horizon() == 3);
    CHECK(costs.at(1, 1, 1.0, 1.0) == doctest::Approx(3.0));
    CHECK(costs.at(2, 1, 1.0, 1.0) == doctest::Approx(1.0));
    CHECK(costs.at(2, 1, 2.0, 0.5) == doctest::Approx(1.0)); // price * kW * hours
    CHECK(costs.at(3, 0, 0.0, 1.0) == doctest::Approx(0.0));
    CHECK_THROWS_AS(costs.at(0, 0, 0.0, 1.0), InvalidInputError);
    CHECK_THROWS_AS(costs.at(4, 0, 0.0, 1.0), InvalidInputError);
}

TEST_CASE("tabulated costs read the per-level table directly") {
    CostSchedule costs = CostSchedule::tabulated({{0.0, 5.0}, {1.0, 7.0}});
    CHECK(costs.horizon() == 2);
    CHECK(costs.at(1, 1, 99.0, 99.0) == doctest::Approx(5.0)); // kW and hours ignored
    CHECK(costs.at(2, 0, 0.0, 1.0) == doctest::Approx(1.0));
}

TEST_CASE("trajectory cost sums the per-slot charges") {
    ActionGrid grid({0.0, 1.0});

    // Constant tabulated charge of 5 regardless of the action.
    CostSchedule flat = CostSchedule::tabulated(
        {{5.0, 5.0}, {5.0, 5.0}, {5.0, 5.0}, {5.0, 5.0}});
    CHECK(core::evaluate_cost(flat, grid, {0, 1, 0, 1}, 1.0) == doctest::Approx(20.0));

    CostSchedule linear = CostSchedule::linear({3.0, 1.0, 2.0});
    CHECK(core::evaluate_cost(linear, grid, {0, 0, 1}, 1.0) == doctest::Approx(2.0));
    CHECK(core::evaluate_cost(linear, grid, {0, 1, 0}, 1.0) == doctest::Approx(1.0));
    CHECK(core::evaluate_cost(linear, grid, {1, 0, 0}, 1.0) == doctest::Approx(3.0));
    CHECK(core::evaluate_cost(linear, grid, {0, 0, 0}, 1.0) == doctest::Approx(0.0));
}

TEST_CASE("trajectory length must match the cost horizon") {
    ActionGrid grid({0.0, 1.0});
    CostSchedule costs = CostSchedule::linear({1.0, 1.0, 1.0});
    CHECK_THROWS_AS(core::evaluate_cost(costs, grid, {0, 1}, 1.0), InvalidInputError);
    CHECK_THROWS_AS(core::evaluate_cost(costs, grid, {0, 1, 0, 1}, 1.0), InvalidInputError);
}

TEST_CASE("prefix cost is additive in the split point") {
    ActionGrid grid({0.0, 1.0, 2.0});
    testsup::Rng rng(42);
    std::vector<double> prices;
    for (int t = 0; t < 8; ++t) prices.push_back(rng.uniform() * 4.0);
    CostSchedule costs = CostSchedule::linear(prices);

    for (int trial = 0; trial < 50; ++trial) {
        Trajectory u;
        for (int t = 0; t < 8; ++t) u.push_back(rng.range(0, 2));
        const double full = core::evaluate_cost(costs, grid, u, 0.5);
        for (std::size_t k = 0; k <= u.size(); ++k) {
            std::span<const int> head(u.data(), k);
            std::span<const int> all(u.data(), u.size());
            double tail = 0.0;
            for (std::size_t i = k; i < u.size(); ++i)
                tail += costs.at(static_cast<int>(i) + 1, u[i], grid.level_kw(u[i]), 0.5);
            CHECK(core::evaluate_cost_prefix(costs, grid, head, 0.5) + tail ==
                  doctest::Approx(full).epsilon(1e-12));
            CHECK(core::evaluate_cost_prefix(costs, grid, all, 0.5) == doctest::Approx(full));
        }
    }
}

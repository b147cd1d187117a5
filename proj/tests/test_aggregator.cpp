#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <utility>
#include <vector>

#include <flexloop/errors.hpp>
#include <flexloop/ev/aggregator.hpp>

#include "support/corpus.hpp"

using namespace flexloop;
using core::ActionGrid;
using core::TimeGrid;
using ev::ChargingSession;
using ev::EvAggregator;
using ev::EvState;

TEST_CASE("initial state carries full demands in milli-kWh") {
    EvAggregator agg({3, 1.0}, ActionGrid({0.0, 1.0}),
                     {{"a", 1, 3, 1.5, 1.0}, {"b", 2, 3, 0.25, 1.0}});
    const EvState s = agg.initial_state();
    CHECK(s.next_slot == 1);
    REQUIRE(s.remaining.size() == 2);
    CHECK(s.remaining[0] == 1500);
    CHECK(s.remaining[1] == 250);
    CHECK(agg.total_remaining_mkwh(s) == 1750);
}

TEST_CASE("one slot of charging drains the commanded energy") {
    EvAggregator agg({3, 1.0}, ActionGrid({0.0, 1.0, 2.0}), {{"a", 1, 3, 5.0, 2.0}});
    const auto [next, result] = agg.advance(agg.initial_state(), 2);
    CHECK(next.next_slot == 2);
    CHECK(next.remaining[0] == 3000);
    CHECK(result.requested_kwh == doctest::Approx(2.0));
    CHECK(result.delivered_kwh == doctest::Approx(2.0));
    CHECK(result.residual_kwh() == doctest::Approx(0.0));
    REQUIRE(result.per_session_kwh.size() == 1);
    CHECK(result.per_session_kwh[0] == doctest::Approx(2.0));
}

TEST_CASE("slot energy scales with the slot duration") {
    // Half-hour slots: level 2 kW commands 1 kWh.
    EvAggregator agg({2, 0.5}, ActionGrid({0.0, 2.0}), {{"a", 1, 2, 1.0, 2.0}});
    const auto [next, result] = agg.advance(agg.initial_state(), 1);
    CHECK(result.delivered_kwh == doctest::Approx(1.0));
    CHECK(next.remaining[0] == 0);
}

TEST_CASE("tighter sessions are served first, ties by departure") {
    // Same laxity (1 hour of slack each); b departs earlier and soaks the
    // whole pool at its 2 kW rate.
    EvAggregator agg({3, 1.0}, ActionGrid({0.0, 1.0, 2.0}),
                     {{"a", 1, 3, 2.0, 1.0}, {"b", 1, 2, 2.0, 2.0}});
    const auto [next, result] = agg.advance(agg.initial_state(), 2);
    CHECK(result.per_session_kwh[0] == doctest::Approx(0.0));
    CHECK(result.per_session_kwh[1] == doctest::Approx(2.0));
    CHECK(next.remaining[0] == 2000);
    CHECK(next.remaining[1] == 0);
}

TEST_CASE("lower laxity wins even with a later departure") {
    // a: 4 slots left, needs 4 -> laxity 0. b: 2 slots left, needs 0.5 ->
    // laxity 1.5. The urgent session is served first despite departing last.
    EvAggregator agg({4, 1.0}, ActionGrid({0.0, 1.0, 2.0}),
                     {{"a", 1, 4, 4.0, 1.0}, {"b", 1, 2, 0.5, 1.0}});
    const auto [next, result] = agg.advance(agg.initial_state(), 1);
    CHECK(result.per_session_kwh[0] == doctest::Approx(1.0));
    CHECK(result.per_session_kwh[1] == doctest::Approx(0.0));
    CHECK(next.remaining[0] == 3000);
    CHECK(next.remaining[1] == 500);
}

TEST_CASE("per-session rate caps split a large pool") {
    EvAggregator agg({2, 1.0}, ActionGrid({0.0, 1.0, 2.0, 3.0}),
                     {{"a", 1, 2, 5.0, 1.0}, {"b", 1, 2, 5.0, 2.0}});
    const auto [next, result] = agg.advance(agg.initial_state(), 3);
    // b (laxity 2 - 2.5 < a's 2 - 5... a: laxity = 2 - 5 = -3, b: 2 - 2.5 = -0.5)
    // a is more urgent but rate-capped at 1 kWh; b takes the rest.
    CHECK(result.per_session_kwh[0] == doctest::Approx(1.0));
    CHECK(result.per_session_kwh[1] == doctest::Approx(2.0));
    CHECK(result.delivered_kwh == doctest::Approx(3.0));
    CHECK(next.remaining[0] == 4000);
    CHECK(next.remaining[1] == 3000);
}

TEST_CASE("commanding more than the fleet can soak leaves a residual") {
    EvAggregator agg({2, 1.0}, ActionGrid({0.0, 1.0, 2.0}), {{"a", 1, 2, 5.0, 1.0}});
    const EvState s = agg.initial_state();
    CHECK_FALSE(agg.can_apply(s, 2)); // saturable is 1 kWh
    const auto [next, result] = agg.advance(s, 2);
    CHECK(result.requested_kwh == doctest::Approx(2.0));
    CHECK(result.delivered_kwh == doctest::Approx(1.0));
    CHECK(result.residual_kwh() == doctest::Approx(1.0));
    CHECK(next.remaining[0] == 4000);
}

TEST_CASE("sessions outside their window receive nothing") {
    EvAggregator agg({3, 1.0}, ActionGrid({0.0, 1.0}),
                     {{"late", 2, 3, 1.0, 1.0}});
    const EvState s = agg.initial_state();
    // Slot 1: the only session has not arrived; nothing can soak energy.
    CHECK(agg.saturable_mkwh(s) == 0);
    CHECK_FALSE(agg.can_apply(s, 1));
    CHECK(agg.can_apply(s, 0));
}

TEST_CASE("the operational cap excludes the top levels") {
    EvAggregator agg({2, 1.0}, ActionGrid({0.0, 1.0, 2.0}, 1.0), {{"a", 1, 2, 4.0, 2.0}});
    CHECK(agg.level_within_cap(0));
    CHECK(agg.level_within_cap(1));
    CHECK_FALSE(agg.level_within_cap(2));
    const EvState s = agg.initial_state();
    CHECK(agg.can_apply(s, 1));
    CHECK_FALSE(agg.can_apply(s, 2)); // 2 kWh exceeds the 1 kWh cap
    CHECK_FALSE(agg.is_admissible(std::vector<int>{2}));
    CHECK(agg.free_slot_hi_mkwh() == 1000);
}

TEST_CASE("advance validates its inputs") {
    EvAggregator agg({2, 1.0}, ActionGrid({0.0, 1.0}), {{"a", 1, 2, 1.0, 1.0}});
    EvState s = agg.initial_state();
    CHECK_THROWS_AS(agg.advance(s, 7), InvalidInputError);
    CHECK_THROWS_AS(agg.advance(s, -1), InvalidInputError);
    EvState past = s;
    past.next_slot = 3;
    CHECK_THROWS_AS(agg.advance(past, 0), InvalidInputError);
    EvState mangled = s;
    mangled.remaining.push_back(0);
    CHECK_THROWS_AS(agg.advance(mangled, 0), InvalidInputError);
}

TEST_CASE("three-trajectory fixture: admissibility and membership") {
    const auto ins = testsup::tiny_single_session();
    EvAggregator agg = ins.make();

    CHECK(agg.is_admissible(std::vector<int>{}));
    CHECK(agg.is_admissible(std::vector<int>{1}));
    CHECK(agg.is_admissible(std::vector<int>{1, 0}));
    CHECK_FALSE(agg.is_admissible(std::vector<int>{1, 1}));
    CHECK(agg.is_admissible(std::vector<int>{0, 0}));

    CHECK(agg.is_complete_feasible(std::vector<int>{0, 0, 1}));
    CHECK(agg.is_complete_feasible(std::vector<int>{0, 1, 0}));
    CHECK(agg.is_complete_feasible(std::vector<int>{1, 0, 0}));
    CHECK_FALSE(agg.is_complete_feasible(std::vector<int>{0, 0, 0})); // demand unmet
    CHECK_FALSE(agg.is_complete_feasible(std::vector<int>{1, 1, 0})); // over-delivers
}

TEST_CASE("prefix admissibility is monotone along feasible trajectories") {
    for (const auto& ins : {testsup::tiny_single_session()}) {
        EvAggregator agg = ins.make();
        for (const auto& u : testsup::reference_feasible_set(ins)) {
            for (std::size_t k = 0; k <= u.size(); ++k) {
                CHECK(agg.is_admissible(std::span<const int>(u.data(), k)));
            }
        }
    }
}

TEST_CASE("memo keys canonicalize interchangeable vehicles") {
    // Two identical vehicles: which of them holds the residual demand cannot
    // matter downstream, so permuted remaining vectors must share a key.
    // (Replay itself always feeds the lower-indexed vehicle on laxity ties,
    // so the permuted twin is built by hand.)
    EvAggregator agg({4, 1.0}, ActionGrid({0.0, 1.0}),
                     {{"a", 1, 4, 2.0, 1.0}, {"b", 1, 4, 2.0, 1.0}});
    EvState s1 = agg.advance_state(agg.advance_state(agg.initial_state(), 1), 0);
    CHECK(s1.next_slot == 3);
    EvState s2 = s1;
    std::swap(s2.remaining[0], s2.remaining[1]);
    CHECK(s1.remaining != s2.remaining);
    CHECK(agg.memo_key(s1) == agg.memo_key(s2));

    // The slot index is part of the key.
    EvState s3 = s1;
    s3.next_slot = 4;
    CHECK(agg.memo_key(s1) != agg.memo_key(s3));
}

TEST_CASE("exact tracking can be stricter than schedule existence") {
    // Pins (2,2,0): a valid schedule exists (each vehicle takes 1 kWh in
    // slots 1 and 2), but the laxity rule hands slot 1 entirely to the
    // earlier-departing vehicle, leaving slot 2 unable to soak 2 kWh.
    // Step-exact replay therefore rejects a pin pattern the schedule-level
    // test accepts: replayable trajectories are a subset.
    EvAggregator agg({3, 1.0}, ActionGrid({0.0, 1.0, 2.0}),
                     {{"a", 1, 3, 2.0, 1.0}, {"b", 1, 2, 2.0, 2.0}});

    CHECK(agg.is_admissible(std::vector<int>{2, 2}));
    CHECK(agg.is_complete_feasible(std::vector<int>{2, 2, 0}));

    EvState s = agg.initial_state();
    REQUIRE(agg.can_apply(s, 2));
    s = agg.advance_state(s, 2);
    CHECK(s.remaining[0] == 2000); // a got nothing
    CHECK(s.remaining[1] == 0);
    CHECK_FALSE(agg.can_apply(s, 2)); // slot 2 can only soak 1 kWh now

    // Every replayable trajectory is schedule-feasible (never the reverse).
    const testsup::Instance ins{"divergence", {3, 1.0}, agg.grid(),
                                core::CostSchedule::linear({1, 1, 1}), true,
                                agg.sessions()};
    int members = 0, pinned_ok = 0;
    for (const auto& u : testsup::all_trajectories(3, 3)) {
        const bool member = testsup::reference_member(ins, u);
        const bool schedulable = agg.is_complete_feasible(u);
        members += member;
        pinned_ok += schedulable;
        if (member) CHECK(schedulable);
    }
    CHECK(members < pinned_ok); // (2,2,0) witnesses the strict gap
}

TEST_CASE("replay agrees with the independent reference rule on the corpus") {
    for (const auto& ins : testsup::random_corpus()) {
        EvAggregator agg = ins.make();
        testsup::Rng rng(0xA66ull + agg.horizon());
        for (int trial = 0; trial < 200; ++trial) {
            core::Trajectory u;
            for (int t = 0; t < agg.horizon(); ++t) u.push_back(rng.range(0, agg.num_levels() - 1));

            EvState s = agg.initial_state();
            bool lib_tracked = true;
            for (int a : u) {
                if (!agg.can_apply(s, a)) {
                    lib_tracked = false;
                    break;
                }
                s = agg.advance_state(s, a);
            }
            const auto ref = testsup::reference_rollout(ins.time, ins.grid, ins.sessions, u);
            REQUIRE(lib_tracked == ref.tracked);
            if (lib_tracked) {
                REQUIRE(s.remaining == ref.remaining);
            }
        }
    }
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <thread>
#include <vector>

#include <flexloop/errors.hpp>
#include <flexloop/ev/aggregator.hpp>
#include <flexloop/mef/exact.hpp>
#include <flexloop/mef/sampled.hpp>

#include "support/corpus.hpp"

using namespace flexloop;
using ev::EvAggregator;
using mef::ExactCounter;
using mef::MefResult;
using mef::SampledMef;
using testsup::Instance;
using testsup::Trajectory;

namespace {

mpq_class rat(long num, long den) {
    mpq_class q(num, den);
    q.canonicalize();
    return q;
}

} // namespace

TEST_CASE("three-trajectory fixture: exact counts and ratios") {
    const Instance ins = testsup::tiny_single_session();
    EvAggregator agg = ins.make();
    ExactCounter<EvAggregator> counter(agg);

    CHECK(counter.count_total() == 3);
    CHECK(counter.count_prefix(std::vector<int>{0}) == 2);
    CHECK(counter.count_prefix(std::vector<int>{1}) == 1);
    CHECK(counter.count_prefix(std::vector<int>{1, 1}) == 0);
    CHECK(counter.count_prefix(std::vector<int>{0, 1}) == 1);
    CHECK(counter.count_prefix(std::vector<int>{0, 0, 1}) == 1);
    CHECK(counter.count_prefix(std::vector<int>{0, 0, 0}) == 0);

    MefResult root = counter.mef_prefix(std::vector<int>{});
    CHECK(root.parent_count == 3);
    CHECK(root.child_counts[0] == 2);
    CHECK(root.child_counts[1] == 1);
    CHECK(root.probs_exact[0] == rat(2, 3));
    CHECK(root.probs_exact[1] == rat(1, 3));
    CHECK(root.feedback.probs[0] == doctest::Approx(2.0 / 3.0));
    CHECK_FALSE(root.dead_end());

    MefResult after0 = counter.mef_prefix(std::vector<int>{0});
    CHECK(after0.probs_exact[0] == rat(1, 2));
    CHECK(after0.probs_exact[1] == rat(1, 2));

    MefResult after1 = counter.mef_prefix(std::vector<int>{1});
    CHECK(after1.probs_exact[0] == rat(1, 1));
    CHECK(after1.probs_exact[1] == rat(0, 1));
}

TEST_CASE("a prefix with no continuation reports the all-zero marker") {
    const Instance ins = testsup::tiny_single_session();
    EvAggregator agg = ins.make();
    ExactCounter<EvAggregator> counter(agg);

    MefResult dead = counter.mef_prefix(std::vector<int>{1, 1});
    CHECK(dead.dead_end());
    CHECK(dead.parent_count == 0);
    for (double p : dead.feedback.probs) CHECK(p == 0.0);
    CHECK(dead.feedback.dead_end());
}

TEST_CASE("full-length prefixes report membership through the parent count") {
    const Instance ins = testsup::tiny_single_session();
    EvAggregator agg = ins.make();
    ExactCounter<EvAggregator> counter(agg);
    CHECK(counter.mef_prefix(std::vector<int>{0, 1, 0}).parent_count == 1);
    CHECK(counter.mef_prefix(std::vector<int>{0, 0, 0}).parent_count == 0);
}

TEST_CASE("prefix queries validate their input") {
    const Instance ins = testsup::tiny_single_session();
    EvAggregator agg = ins.make();
    ExactCounter<EvAggregator> counter(agg);
    CHECK_THROWS_AS(counter.count_prefix(std::vector<int>{0, 0, 0, 0}), InvalidInputError);
    CHECK_THROWS_AS(counter.count_prefix(std::vector<int>{5}), InvalidInputError);
    CHECK_THROWS_AS(counter.count_prefix(std::vector<int>{-1}), InvalidInputError);
}

TEST_CASE("capacity equals the entropy of the feedback chain") {
    const Instance ins = testsup::tiny_single_session();
    EvAggregator agg = ins.make();
    ExactCounter<EvAggregator> counter(agg);
    const double cap = counter.system_capacity();
    CHECK(cap == doctest::Approx(std::log(3.0)).epsilon(1e-12));
    CHECK(std::abs(counter.chain_entropy() - cap) <= 1e-9);
}

TEST_CASE("counts match independent enumeration across the corpus") {
    for (const auto& ins : testsup::random_corpus()) {
        EvAggregator agg = ins.make();
        ExactCounter<EvAggregator> counter(agg);
        const auto members = testsup::reference_feasible_set(ins);
        REQUIRE_MESSAGE(counter.count_total() == mpz_class(static_cast<long>(members.size())),
                        ins.name);

        // Spot-check prefix counts against the same enumeration.
        testsup::Rng rng(0x5EEDull ^ members.size());
        for (int trial = 0; trial < 12; ++trial) {
            const int k = rng.range(1, agg.horizon());
            Trajectory p;
            for (int i = 0; i < k; ++i) p.push_back(rng.range(0, agg.num_levels() - 1));
            long expect = 0;
            for (const auto& m : members) {
                if (std::equal(p.begin(), p.end(), m.begin())) ++expect;
            }
            CHECK(counter.count_prefix(p) == mpz_class(expect));
        }
    }
}

TEST_CASE("feedback ratios are consistent with the counts they come from") {
    int checked = 0;
    for (const auto& ins : testsup::random_corpus()) {
        if (++checked > 6) break; // a handful suffices; the loop body is thorough
        EvAggregator agg = ins.make();
        ExactCounter<EvAggregator> counter(agg);
        testsup::Rng rng(0xFEEDull + checked);
        for (int trial = 0; trial < 10; ++trial) {
            Trajectory p;
            const int k = rng.range(0, agg.horizon() - 1);
            for (int i = 0; i < k; ++i) p.push_back(rng.range(0, agg.num_levels() - 1));
            MefResult r = counter.mef_prefix(p);
            mpz_class child_sum = 0;
            mpq_class prob_sum = 0;
            for (int a = 0; a < agg.num_levels(); ++a) {
                child_sum += r.child_counts[a];
                prob_sum += r.probs_exact[a];
                // The ratio times the parent recovers the child count exactly.
                if (r.parent_count > 0)
                    CHECK(r.probs_exact[a] * r.parent_count == r.child_counts[a]);
                // Each child count agrees with a direct prefix query.
                Trajectory ext = p;
                ext.push_back(a);
                CHECK(counter.count_prefix(ext) == r.child_counts[a]);
            }
            CHECK(child_sum == r.parent_count);
            if (r.parent_count > 0) CHECK(prob_sum == mpq_class(1));
        }
    }
}

TEST_CASE("chain probabilities multiply to one over the set size") {
    // Along any feasible trajectory the per-slot ratios telescope, so every
    // member carries identical probability mass 1/|S| -- the uniform
    // distribution, which is what maximizes trajectory entropy.
    int done = 0;
    for (const auto& ins : testsup::random_corpus()) {
        if (ins.trajectory_space() > 7000) continue;
        if (++done > 4) break;
        EvAggregator agg = ins.make();
        ExactCounter<EvAggregator> counter(agg);
        const auto members = testsup::reference_feasible_set(ins);
        REQUIRE(!members.empty());
        const mpq_class uniform(1, mpz_class(static_cast<long>(members.size())));
        for (const auto& u : members) {
            mpq_class mass(1);
            for (std::size_t t = 0; t < u.size(); ++t) {
                MefResult r = counter.mef_prefix(std::span<const int>(u.data(), t));
                mass *= r.probs_exact[u[t]];
            }
            mass.canonicalize();
            CHECK(mass == uniform);
        }
    }
    CHECK(done > 0);
}

TEST_CASE("positive-probability actions always extend to a full member") {
    int done = 0;
    for (const auto& ins : testsup::random_corpus()) {
        if (++done > 5) break;
        EvAggregator agg = ins.make();
        ExactCounter<EvAggregator> counter(agg);
        testsup::Rng rng(0xD1CEull + done);
        for (int walk = 0; walk < 40; ++walk) {
            Trajectory u;
            for (int t = 0; t < agg.horizon(); ++t) {
                MefResult r = counter.mef_prefix(u);
                REQUIRE_FALSE(r.dead_end());
                std::vector<int> options;
                for (int a = 0; a < agg.num_levels(); ++a)
                    if (r.child_counts[a] > 0) options.push_back(a);
                REQUIRE(!options.empty());
                u.push_back(options[rng.range(0, static_cast<int>(options.size()) - 1)]);
            }
            CHECK(testsup::reference_member(ins, u));
        }
    }
}

TEST_CASE("the node budget aborts runaway enumeration") {
    const auto& ins = testsup::random_corpus().front();
    EvAggregator agg = ins.make();
    ExactCounter<EvAggregator> tight(agg, 3);
    CHECK_THROWS_AS(tight.count_total(), BudgetError);

    ExactCounter<EvAggregator> roomy(agg);
    roomy.count_total();
    CHECK(roomy.last_nodes_visited() > 0);
    CHECK(roomy.last_nodes_visited() <= ExactCounter<EvAggregator>::kDefaultNodeBudget);
}

TEST_CASE("unconstrained model has closed-form counts and capacity") {
    testsup::UnconstrainedOracle toy{/*T=*/6, /*levels=*/3};
    ExactCounter<testsup::UnconstrainedOracle> counter(toy);
    mpz_class expect;
    mpz_ui_pow_ui(expect.get_mpz_t(), 3, 6);
    CHECK(counter.count_total() == expect);
    CHECK(counter.system_capacity() == doctest::Approx(6.0 * std::log(3.0)).epsilon(1e-12));
    CHECK(std::abs(counter.chain_entropy() - counter.system_capacity()) <= 1e-9);

    MefResult r = counter.mef_prefix(std::vector<int>{0, 2});
    for (int a = 0; a < 3; ++a) CHECK(r.probs_exact[a] == rat(1, 3));
}

TEST_CASE("concurrent queries share the memo without corrupting it") {
    const auto& ins = testsup::random_corpus()[2];
    EvAggregator agg = ins.make();
    ExactCounter<EvAggregator> serial(agg);
    const mpz_class expect = serial.count_total();

    ExactCounter<EvAggregator> shared(agg);
    std::vector<mpz_class> results(8);
    std::vector<std::thread> threads;
    for (int i = 0; i < 8; ++i) {
        threads.emplace_back([&shared, &results, i] { results[i] = shared.count_total(); });
    }
    for (auto& th : threads) th.join();
    for (const auto& r : results) CHECK(r == expect);
}

TEST_CASE("sampling reproduces exact counts where the tree is degenerate") {
    const Instance ins = testsup::tiny_single_session();
    EvAggregator agg = ins.make();

    SampledMef<EvAggregator> one(agg, 1, 7);
    const auto est = one.estimate_counts(std::vector<int>{1});
    REQUIRE(est.size() == 2);
    CHECK(est[0] == doctest::Approx(1.0));
    CHECK(est[1] == doctest::Approx(0.0));

    auto fb = one.feedback_for(std::vector<int>{1});
    CHECK(fb.provenance == mef::FlexibilityFeedback::Provenance::sampled);
    CHECK(fb.sample_count == 1);
    CHECK(fb.probs[0] == doctest::Approx(1.0));

    // Dead prefix: zero estimates, all-zero feedback.
    auto dead = one.feedback_for(std::vector<int>{1, 1});
    CHECK(dead.dead_end());
}

TEST_CASE("sampling an unconstrained tree is exact and uniform") {
    testsup::UnconstrainedOracle toy{5, 4};
    SampledMef<testsup::UnconstrainedOracle> sampler(toy, 3, 99);
    const auto est = sampler.estimate_counts(std::vector<int>{1});
    // Every dive sees the same branching, so the product is deterministic.
    for (double e : est) CHECK(e == doctest::Approx(std::pow(4.0, 3)));
    const auto fb = sampler.feedback_for(std::vector<int>{1});
    for (double p : fb.probs) CHECK(p == doctest::Approx(0.25));
}

TEST_CASE("sampled estimates track exact counts within tolerance") {
    const auto& ins = testsup::random_corpus()[1];
    EvAggregator agg = ins.make();
    ExactCounter<EvAggregator> counter(agg);
    MefResult exact = counter.mef_prefix(std::vector<int>{});
    REQUIRE(exact.parent_count > 0);

    SampledMef<EvAggregator> sampler(agg, 4000, 0xBEEFull);
    const auto est = sampler.estimate_counts(std::vector<int>{});
    for (int a = 0; a < agg.num_levels(); ++a) {
        const double truth = exact.child_counts[a].get_d();
        if (truth == 0.0) {
            CHECK(est[a] == doctest::Approx(0.0));
        } else {
            CHECK(est[a] / truth == doctest::Approx(1.0).epsilon(0.15));
        }
    }
}

TEST_CASE("sampled feedback is deterministic in the seed and prefix") {
    const auto& ins = testsup::random_corpus()[3];
    EvAggregator agg = ins.make();
    SampledMef<EvAggregator> a(agg, 50, 123);
    SampledMef<EvAggregator> b(agg, 50, 123);

    const std::vector<int> prefix{0};
    CHECK(a.estimate_counts(prefix) == b.estimate_counts(prefix));
    CHECK(a.estimate_counts(std::vector<int>{}) == b.estimate_counts(std::vector<int>{}));

    CHECK_THROWS_AS(SampledMef<EvAggregator>(agg, 0, 1), InvalidInputError);
}

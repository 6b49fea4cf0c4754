#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "firzen/core/rng.hpp"
#include "firzen/data/interactions.hpp"

using namespace firzen;

namespace {

// independent iterative filter over explicit edge lists
InteractionDataset brute_force_user_kcore(InteractionDataset ds, std::size_t k) {
    for (;;) {
        std::map<std::size_t, std::size_t> deg;
        for (const auto& x : ds.interactions) ++deg[x.user];
        std::set<std::size_t> removed;
        for (const auto& [u, d] : deg)
            if (d < k) removed.insert(u);
        if (removed.empty()) break;
        std::vector<Interaction> next;
        for (const auto& x : ds.interactions)
            if (!removed.count(x.user)) next.push_back(x);
        ds.interactions = next;
    }
    // re-densify via raw ids
    InteractionDataset out;
    for (const auto& x : ds.interactions)
        out.interactions.push_back({out.user_vocab.intern(ds.user_vocab.raw_of(x.user)),
                                    out.item_vocab.intern(ds.item_vocab.raw_of(x.item))});
    out.user_count = out.user_vocab.size();
    out.item_count = out.item_vocab.size();
    std::sort(out.interactions.begin(), out.interactions.end());
    return out;
}

}  // namespace

TEST_CASE("load dedups and reindexes") {
    std::istringstream in("alice\tx\nbob\ty\nalice\tx\n");
    auto ds = load_interactions(in);
    CHECK(ds.user_count == 2);
    CHECK(ds.item_count == 2);
    CHECK(ds.interactions.size() == 2);
}

TEST_CASE("single record") {
    std::istringstream in("u\ti\t1234\n");
    auto ds = load_interactions(in);
    CHECK(ds.user_count == 1);
    CHECK(ds.item_count == 1);
    CHECK(ds.interactions.size() == 1);
}

TEST_CASE("malformed line reports line number") {
    std::istringstream in("u\ti\nbadline\n");
    CHECK_THROWS_WITH_AS(load_interactions(in, "f.tsv"), doctest::Contains("f.tsv:2"),
                         std::runtime_error);
}

TEST_CASE("empty input is an error") {
    std::istringstream in("");
    CHECK_THROWS_AS(load_interactions(in), std::runtime_error);
}

TEST_CASE("k-core removes a user below threshold") {
    std::istringstream in("a\ti1\na\ti2\na\ti3\na\ti4\nb\ti1\nb\ti2\nb\ti3\nb\ti4\nb\ti5\n");
    auto ds = load_interactions(in);
    auto filtered = k_core_filter(ds, 5);
    CHECK(filtered.user_count == 1);
    CHECK(filtered.interactions.size() == 5);
    CHECK(filtered.user_vocab.raw_of(0) == "b");
}

TEST_CASE("k-core is identity when all users qualify") {
    std::istringstream in("a\ti1\na\ti2\nb\ti2\nb\ti3\n");
    auto ds = load_interactions(in);
    auto filtered = k_core_filter(ds, 2);
    CHECK(filtered.user_count == ds.user_count);
    CHECK(filtered.item_count == ds.item_count);
    CHECK(filtered.interactions.size() == ds.interactions.size());
}

TEST_CASE("k-core matches brute-force oracle on random toys and is idempotent") {
    Rng rng(17);
    for (int trial = 0; trial < 30; ++trial) {
        InteractionDataset ds;
        std::size_t users = 3 + rng.uniform_index(6), items = 3 + rng.uniform_index(6);
        std::set<Interaction> seen;
        for (std::size_t e = 0; e < users * 3; ++e) {
            Interaction x{rng.uniform_index(users), rng.uniform_index(items)};
            if (seen.insert(x).second) ds.interactions.push_back(x);
        }
        for (std::size_t u = 0; u < users; ++u) ds.user_vocab.intern("u" + std::to_string(u));
        for (std::size_t i = 0; i < items; ++i) ds.item_vocab.intern("i" + std::to_string(i));
        ds.user_count = users;
        ds.item_count = items;
        std::sort(ds.interactions.begin(), ds.interactions.end());

        std::size_t k = 2 + rng.uniform_index(3);
        InteractionDataset got, oracle;
        bool got_threw = false, oracle_threw = false;
        try {
            got = k_core_filter(ds, k);
        } catch (const std::runtime_error&) {
            got_threw = true;
        }
        oracle = brute_force_user_kcore(ds, k);
        oracle_threw = oracle.interactions.empty();
        REQUIRE(got_threw == oracle_threw);
        if (got_threw) continue;
        CHECK(got.interactions == oracle.interactions);

        auto twice = k_core_filter(got, k);
        CHECK(twice.interactions == got.interactions);
    }
}

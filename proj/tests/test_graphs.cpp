#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>
#include <sstream>

#include "firzen/core/rng.hpp"
#include "firzen/data/synthetic.hpp"
#include "firzen/graphs/frozen.hpp"

using namespace firzen;

namespace {

FeatureMatrix random_features(std::size_t n, std::size_t d, std::uint64_t seed) {
    FeatureMatrix fm;
    fm.modality = Modality::Text;
    fm.values = Mat(n, d);
    Rng rng(seed);
    for (double& v : fm.values.raw()) v = rng.normal();
    return fm;
}

// dense oracle for cosine similarity
Mat oracle_similarity(const Mat& f) {
    std::size_t n = f.rows();
    Mat s(n, n);
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b) {
            double na = row_norm(f, a), nb = row_norm(f, b);
            if (na == 0.0 || nb == 0.0) continue;
            s(a, b) = dot_rows(f, a, f, b) / (na * nb);
        }
    return s;
}

// dense oracle for row top-K binarization, self excluded, ties to smaller col
Mat oracle_knn(const Mat& sim, std::size_t k) {
    std::size_t n = sim.rows();
    Mat out(n, n);
    for (std::size_t a = 0; a < n; ++a) {
        std::vector<std::size_t> cols;
        for (std::size_t b = 0; b < n; ++b)
            if (b != a) cols.push_back(b);
        std::stable_sort(cols.begin(), cols.end(),
                         [&](std::size_t x, std::size_t y) { return sim(a, x) > sim(a, y); });
        for (std::size_t j = 0; j < std::min(k, cols.size()); ++j) out(a, cols[j]) = 1.0;
    }
    return out;
}

// dense oracle for D^{-1/2} A D^{-1/2}
Mat oracle_normalize(const Mat& a) {
    std::size_t n = a.rows();
    std::vector<double> inv(n, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
        double d = 0.0;
        for (std::size_t c = 0; c < n; ++c) d += a(r, c);
        if (d > 0.0) inv[r] = 1.0 / std::sqrt(d);
    }
    Mat out(n, n);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c) out(r, c) = a(r, c) * inv[r] * inv[c];
    return out;
}

}  // namespace

TEST_CASE("similarity matches the dense oracle exactly") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        auto fm = random_features(11, 5, seed);
        CHECK(modality_similarity(fm) == oracle_similarity(fm.values));
    }
}

TEST_CASE("zero-norm feature rows give zero similarity including the diagonal") {
    auto fm = random_features(5, 4, 9);
    for (std::size_t j = 0; j < 4; ++j) fm.values(2, j) = 0.0;
    Mat sim = modality_similarity(fm);
    for (std::size_t j = 0; j < 5; ++j) {
        CHECK(sim(2, j) == 0.0);
        CHECK(sim(j, 2) == 0.0);
    }
    CHECK(sim(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("non-finite features rejected") {
    auto fm = random_features(3, 3, 1);
    fm.values(1, 1) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(modality_similarity(fm), std::invalid_argument);
}

TEST_CASE("knn sparsification matches the dense oracle on random instances") {
    Rng rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        std::size_t n = 4 + rng.uniform_index(9);  // 4..12
        std::size_t k = 1 + rng.uniform_index(4);
        Mat sim(n, n);
        // coarse values force frequent ties
        for (double& v : sim.raw()) v = static_cast<double>(rng.uniform_index(4)) * 0.25;
        CHECK(knn_sparsify(sim, k).to_dense() == oracle_knn(sim, k));
    }
}

TEST_CASE("knn tie-break prefers the smaller column index") {
    Mat sim(3, 3);
    sim(0, 1) = 0.5;
    sim(0, 2) = 0.5;
    Csr g = knn_sparsify(sim, 1);
    CHECK(g.at(0, 1) == 1.0);
    CHECK(g.at(0, 2) == 0.0);
}

TEST_CASE("knn with K >= n-1 keeps all neighbors but never the self loop") {
    auto fm = random_features(6, 3, 4);
    Csr g = knn_sparsify(modality_similarity(fm), 10);
    for (std::size_t a = 0; a < 6; ++a) {
        CHECK(g.row_nnz(a) == 5);
        CHECK(g.at(a, a) == 0.0);
    }
}

TEST_CASE("symmetric normalization matches the dense oracle exactly") {
    Rng rng(23);
    for (int trial = 0; trial < 10; ++trial) {
        std::size_t n = 3 + rng.uniform_index(8);
        std::vector<std::tuple<std::size_t, std::size_t, double>> trips;
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < n; ++c)
                if (rng.uniform() < 0.4) trips.emplace_back(r, c, 1.0);
        Csr a = Csr::from_triplets(n, n, trips);
        CHECK(sym_normalize(a).to_dense() == oracle_normalize(a.to_dense()));
    }
}

TEST_CASE("zero-degree rows stay zero after normalization") {
    Csr a = Csr::from_triplets(3, 3, {{0, 1, 1.0}, {1, 0, 1.0}});
    Csr g = sym_normalize(a);
    CHECK(g.row_nnz(2) == 0);
    CHECK(g.at(0, 1) == doctest::Approx(1.0));
}

TEST_CASE("user-user graph keeps raw co-occurrence counts with top-K per row") {
    // users 0 and 1 share items {0,1,2}; users 0 and 2 share {0}; 1 and 2 share {0}
    std::vector<Interaction> train = {{0, 0}, {0, 1}, {0, 2}, {1, 0}, {1, 1},
                                      {1, 2}, {2, 0}, {2, 3}};
    Csr g = build_user_user_graph(train, 3, 4, 10);
    CHECK(g.at(0, 1) == 3.0);
    CHECK(g.at(1, 0) == 3.0);
    CHECK(g.at(0, 2) == 1.0);
    CHECK(g.at(2, 1) == 1.0);
    CHECK(g.at(0, 0) == 0.0);

    // top-1 keeps only the strongest neighbor; tie at 1 resolved to index 0
    Csr g1 = build_user_user_graph(train, 3, 4, 1);
    CHECK(g1.row_nnz(0) == 1);
    CHECK(g1.at(0, 1) == 3.0);
    CHECK(g1.row_nnz(2) == 1);
    CHECK(g1.at(2, 0) == 1.0);
}

TEST_CASE("user-user graph matches a dense oracle on random instances") {
    Rng rng(31);
    for (int trial = 0; trial < 10; ++trial) {
        std::size_t users = 4 + rng.uniform_index(6), items = 5 + rng.uniform_index(6);
        std::set<Interaction> edges;
        for (std::size_t e = 0; e < users * 3; ++e)
            edges.insert({rng.uniform_index(users), rng.uniform_index(items)});
        std::vector<Interaction> train(edges.begin(), edges.end());

        // dense co-occurrence counts via A A^T with zeroed diagonal
        Mat a(users, items);
        for (const auto& x : train) a(x.user, x.item) = 1.0;
        Mat counts = matmul(a, transpose(a));
        for (std::size_t u = 0; u < users; ++u) counts(u, u) = 0.0;

        std::size_t k = 1 + rng.uniform_index(3);
        Mat got = build_user_user_graph(train, users, items, k).to_dense();
        for (std::size_t u = 0; u < users; ++u) {
            // kept entries carry the raw count; kept set is the count top-K
            std::vector<std::size_t> nb;
            for (std::size_t v = 0; v < users; ++v)
                if (counts(u, v) > 0.0) nb.push_back(v);
            std::stable_sort(nb.begin(), nb.end(), [&](std::size_t x, std::size_t y) {
                return counts(u, x) > counts(u, y);
            });
            Mat expect(1, users);
            for (std::size_t j = 0; j < std::min(k, nb.size()); ++j)
                expect(0, nb[j]) = counts(u, nb[j]);
            for (std::size_t v = 0; v < users; ++v) CHECK(got(u, v) == expect(0, v));
        }
    }
}

TEST_CASE("inference mask zeroes exactly warm-to-cold entries") {
    CHECK(inference_mask_value(true, true) == 0.0);    // warm source, cold target
    CHECK(inference_mask_value(true, false) == 1.0);   // warm to warm
    CHECK(inference_mask_value(false, true) == 1.0);   // cold to cold
    CHECK(inference_mask_value(false, false) == 1.0);  // cold to warm
}

TEST_CASE("rectification removes warm-to-cold edges and nothing else") {
    std::vector<bool> cold = {false, false, true, true};
    std::vector<std::tuple<std::size_t, std::size_t, double>> trips;
    for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t c = 0; c < 4; ++c)
            if (r != c) trips.emplace_back(r, c, 1.0);
    Csr g = rectify(Csr::from_triplets(4, 4, trips), cold);
    for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t c = 0; c < 4; ++c) {
            double expect = (r == c) ? 0.0 : inference_mask_value(!cold[r], cold[c]);
            CHECK(g.at(r, c) == expect);
        }
}

TEST_CASE("expanded graph restricted to the warm block equals the training graph") {
    auto data = generate_synthetic([] {
        SyntheticSpec s;
        s.user_count = 20;
        s.item_count = 30;
        s.cluster_count = 3;
        s.seed = 5;
        return s;
    }());
    std::vector<bool> cold(30, false);
    for (std::size_t i = 24; i < 30; ++i) cold[i] = true;
    Mat sim = modality_similarity(data.text);
    std::size_t k = 4;

    Csr training = build_item_graph_training(sim, cold, k);
    Csr expanded = build_item_graph_expanded(sim, cold, k);

    // rectification is a no-op on the expanded graph (mask applied pre-kNN)
    CHECK(rectify(expanded, cold) == expanded);

    // warm rows/cols coincide; training graph has empty cold rows and cols
    for (std::size_t a = 0; a < 30; ++a)
        for (std::size_t b = 0; b < 30; ++b) {
            if (!cold[a] && !cold[b]) CHECK(training.at(a, b) == expanded.at(a, b));
            if (cold[a] || cold[b]) CHECK(training.at(a, b) == 0.0);
        }

    // cold rows pick K neighbors from the full item set
    for (std::size_t a = 24; a < 30; ++a) CHECK(expanded.row_nnz(a) == k);

    // normalized warm block also matches, because warm degrees agree
    Csr tn = sym_normalize(training), en = sym_normalize(expanded);
    for (std::size_t a = 0; a < 24; ++a)
        for (std::size_t b = 0; b < 24; ++b)
            if (!cold[a] && !cold[b]) CHECK(tn.at(a, b) == en.at(a, b));
}

TEST_CASE("ckg merges interaction and knowledge triples in one index space") {
    auto data = generate_synthetic([] {
        SyntheticSpec s;
        s.user_count = 10;
        s.item_count = 12;
        s.cluster_count = 3;
        s.seed = 8;
        return s;
    }());
    const auto& train = data.interactions.interactions;
    Ckg ckg = build_ckg(train, data.kg, 10, 12);

    CHECK(ckg.n_items == 12);
    CHECK(ckg.n_users == 10);
    CHECK(ckg.n_entities() == 12 + 10 + ckg.n_external);
    CHECK(ckg.n_relations == data.kg.relations.size() + 1);
    CHECK(ckg.triples.size() == data.kg.triples.size() + train.size());

    // interaction triples connect user entities to item entities
    std::size_t n_interact = 0;
    for (const auto& t : ckg.triples)
        if (t.relation == ckg.interact_relation) {
            ++n_interact;
            CHECK(ckg.is_user(t.head));
            CHECK(ckg.is_item(t.tail));
        }
    CHECK(n_interact == train.size());

    // knowledge triples carry item heads and external tails here
    for (const auto& t : ckg.triples)
        if (t.relation != ckg.interact_relation) {
            CHECK(ckg.is_item(t.head));
            CHECK(!ckg.is_item(t.tail));
            CHECK(!ckg.is_user(t.tail));
        }
    CHECK(ckg_entity_type(ckg, 0) == EntityType::Item);
    CHECK(ckg_entity_type(ckg, ckg.user_entity(3)) == EntityType::External);
}

TEST_CASE("propagation operators scale by inverse square-root degree") {
    std::vector<Interaction> train = {{0, 0}, {0, 1}, {0, 2}, {0, 3}, {1, 0}};
    Csr inter = interaction_adjacency(train, 2, 4);
    Csr us = user_side_operator(inter, false);
    CHECK(us.at(0, 1) == doctest::Approx(0.5));  // user 0 has degree 4
    CHECK(us.at(1, 0) == doctest::Approx(1.0));
    Csr is_ = item_side_operator(inter, false);
    CHECK(is_.at(0, 0) == doctest::Approx(1.0 / std::sqrt(2.0)));  // item 0 degree 2
    CHECK(is_.at(3, 0) == doctest::Approx(1.0));

    Csr us_sym = user_side_operator(inter, true);
    CHECK(us_sym.at(0, 0) == doctest::Approx(1.0 / std::sqrt(4.0 * 2.0)));
}

TEST_CASE("frozen bundle round trips through the binary container") {
    auto data = generate_synthetic([] {
        SyntheticSpec s;
        s.user_count = 15;
        s.item_count = 20;
        s.cluster_count = 4;
        s.seed = 12;
        return s;
    }());
    std::vector<bool> cold(20, false);
    cold[18] = cold[19] = true;
    auto bundle = build_frozen_bundle(data.interactions.interactions, 15, 20,
                                      {&data.text, &data.image}, data.kg, cold, 4, 3, false);

    std::ostringstream os;
    save_bundle(bundle, os);
    std::istringstream is(os.str());
    auto loaded = load_bundle(is);

    CHECK(loaded.user_count == bundle.user_count);
    CHECK(loaded.item_count == bundle.item_count);
    CHECK(loaded.k_item == bundle.k_item);
    CHECK(loaded.k_user == bundle.k_user);
    CHECK(loaded.expanded == bundle.expanded);
    CHECK(loaded.inter_adj == bundle.inter_adj);
    CHECK(loaded.modalities == bundle.modalities);
    REQUIRE(loaded.item_item_binary.size() == 2);
    CHECK(loaded.item_item_binary[0] == bundle.item_item_binary[0]);
    CHECK(loaded.item_item_normalized[1] == bundle.item_item_normalized[1]);
    CHECK(loaded.user_user_topk == bundle.user_user_topk);
    CHECK(loaded.ckg.triples == bundle.ckg.triples);
    CHECK(loaded.ckg.external_types == bundle.ckg.external_types);

    std::istringstream bad("not a bundle at all");
    CHECK_THROWS_AS(load_bundle(bad), std::runtime_error);
}

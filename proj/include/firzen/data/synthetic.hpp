#pragma once

#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "firzen/core/rng.hpp"
#include "firzen/data/features.hpp"
#include "firzen/data/interactions.hpp"
#include "firzen/data/kg.hpp"

namespace firzen {

struct SyntheticSpec {
    std::size_t user_count = 100;
    std::size_t item_count = 50;
    std::size_t cluster_count = 5;
    std::size_t interactions_per_user = 10;  // target; at least min_user_degree survive
    std::size_t min_user_degree = 5;         // k-core guarantee
    std::size_t text_dim = 16;
    std::size_t image_dim = 24;
    double cluster_affinity = 0.85;          // probability an interaction stays in-cluster
    double feature_noise = 0.25;             // sigma around the cluster centroid
    std::uint64_t seed = 0;
};

struct SyntheticData {
    InteractionDataset interactions;
    KnowledgeGraph kg;
    FeatureMatrix text;
    FeatureMatrix image;
    std::vector<std::size_t> item_cluster;
};

// Cluster-structured generator: users prefer one cluster, item features sit
// near their cluster centroid, and the KG links every item to cluster-level
// brand and category entities. Modality and KG signal therefore predict
// held-out items of a user's preferred cluster.
inline SyntheticData generate_synthetic(const SyntheticSpec& spec) {
    if (spec.user_count == 0 || spec.item_count == 0 || spec.cluster_count == 0)
        throw std::invalid_argument("generate_synthetic: counts must be positive");
    if (spec.cluster_count > spec.item_count)
        throw std::invalid_argument("generate_synthetic: more clusters than items");
    if (spec.interactions_per_user < spec.min_user_degree)
        throw std::invalid_argument("generate_synthetic: interactions_per_user below min degree");

    Rng rng(spec.seed);
    SyntheticData out;

    // items round-robin over clusters keeps cluster sizes balanced
    out.item_cluster.resize(spec.item_count);
    std::vector<std::vector<std::size_t>> cluster_items(spec.cluster_count);
    for (std::size_t i = 0; i < spec.item_count; ++i) {
        out.item_cluster[i] = i % spec.cluster_count;
        cluster_items[i % spec.cluster_count].push_back(i);
    }

    auto draw_features = [&](std::size_t dim, Modality modality) {
        Mat centroids(spec.cluster_count, dim);
        for (double& v : centroids.raw()) v = rng.normal();
        Mat f(spec.item_count, dim);
        for (std::size_t i = 0; i < spec.item_count; ++i)
            for (std::size_t j = 0; j < dim; ++j)
                f(i, j) = centroids(out.item_cluster[i], j) + spec.feature_noise * rng.normal();
        FeatureMatrix fm;
        fm.modality = modality;
        fm.values = std::move(f);
        return fm;
    };
    out.text = draw_features(spec.text_dim, Modality::Text);
    out.image = draw_features(spec.image_dim, Modality::Image);

    // interactions: each user gets a preferred cluster and samples items with
    // cluster_affinity mass on it
    InteractionDataset& ds = out.interactions;
    const std::size_t max_retries = 64;
    for (std::size_t attempt = 0;; ++attempt) {
        if (attempt >= max_retries)
            throw std::runtime_error("generate_synthetic: could not satisfy min user degree");
        ds = InteractionDataset{};
        std::set<Interaction> seen;
        bool ok = true;
        for (std::size_t u = 0; u < spec.user_count; ++u) {
            std::size_t pref = rng.uniform_index(spec.cluster_count);
            std::size_t placed = 0;
            for (std::size_t t = 0; t < spec.interactions_per_user * 4 &&
                                    placed < spec.interactions_per_user;
                 ++t) {
                std::size_t item;
                if (rng.uniform() < spec.cluster_affinity) {
                    const auto& pool = cluster_items[pref];
                    item = pool[rng.uniform_index(pool.size())];
                } else {
                    item = rng.uniform_index(spec.item_count);
                }
                if (seen.insert({u, item}).second) {
                    ds.interactions.push_back({u, item});
                    ++placed;
                }
            }
            if (placed < spec.min_user_degree) {
                ok = false;
                break;
            }
        }
        if (ok) break;
    }
    for (std::size_t u = 0; u < spec.user_count; ++u)
        ds.user_vocab.intern("u" + std::to_string(u));
    for (std::size_t i = 0; i < spec.item_count; ++i)
        ds.item_vocab.intern("i" + std::to_string(i));
    ds.user_count = spec.user_count;
    ds.item_count = spec.item_count;
    std::sort(ds.interactions.begin(), ds.interactions.end());

    // KG: every item -> cluster brand and cluster category (>= 2 triples each)
    KnowledgeGraph& kg = out.kg;
    std::size_t r_brand = kg.relations.intern("produced_by");
    std::size_t r_cat = kg.relations.intern("belongs_to");
    kg.item_alignment.resize(spec.item_count);
    for (std::size_t i = 0; i < spec.item_count; ++i)
        kg.item_alignment[i] = kg.add_entity("item:" + std::to_string(i), EntityType::Item);
    std::vector<std::size_t> brand_ent(spec.cluster_count), cat_ent(spec.cluster_count);
    for (std::size_t c = 0; c < spec.cluster_count; ++c) {
        brand_ent[c] = kg.add_entity("brand:cluster" + std::to_string(c), EntityType::Brand);
        cat_ent[c] = kg.add_entity("category:cluster" + std::to_string(c), EntityType::Category);
    }
    for (std::size_t i = 0; i < spec.item_count; ++i) {
        kg.triples.push_back({kg.item_alignment[i], r_brand, brand_ent[out.item_cluster[i]]});
        kg.triples.push_back({kg.item_alignment[i], r_cat, cat_ent[out.item_cluster[i]]});
    }
    std::sort(kg.triples.begin(), kg.triples.end());
    return out;
}

}  // namespace firzen

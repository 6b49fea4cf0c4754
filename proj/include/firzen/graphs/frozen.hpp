#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <tuple>
#include <utility>
#include <vector>

#include "firzen/core/binio.hpp"
#include "firzen/core/matrix.hpp"
#include "firzen/data/features.hpp"
#include "firzen/data/interactions.hpp"
#include "firzen/data/kg.hpp"

namespace firzen {

// Cosine similarity between item feature rows. Zero-norm rows get
// zero similarity everywhere (including the diagonal).
inline Mat modality_similarity(const FeatureMatrix& features) {
    const Mat& f = features.values;
    if (!f.all_finite()) throw std::invalid_argument("modality_similarity: non-finite features");
    std::size_t n = f.rows();
    std::vector<double> norms(n);
    for (std::size_t i = 0; i < n; ++i) norms[i] = row_norm(f, i);
    Mat sim(n, n);
    for (std::size_t a = 0; a < n; ++a) {
        if (norms[a] == 0.0) continue;
        for (std::size_t b = a; b < n; ++b) {
            if (norms[b] == 0.0) continue;
            double s = dot_rows(f, a, f, b) / (norms[a] * norms[b]);
            sim(a, b) = s;
            sim(b, a) = s;
        }
    }
    return sim;
}

namespace detail {

// top-K column indices of one similarity row, self excluded, candidates
// restricted; ties broken by smaller column index
inline std::vector<std::size_t> top_k_row(const Mat& sim, std::size_t row, std::size_t k,
                                          const std::vector<std::size_t>& candidates) {
    std::vector<std::size_t> cand;
    cand.reserve(candidates.size());
    for (std::size_t c : candidates)
        if (c != row) cand.push_back(c);
    std::sort(cand.begin(), cand.end(), [&](std::size_t x, std::size_t y) {
        if (sim(row, x) != sim(row, y)) return sim(row, x) > sim(row, y);
        return x < y;
    });
    if (cand.size() > k) cand.resize(k);
    std::sort(cand.begin(), cand.end());
    return cand;
}

}  // namespace detail

// kNN sparsification: each row keeps its top-K entries (self excluded),
// binarized. Not symmetrized.
inline Csr knn_sparsify(const Mat& sim, std::size_t k) {
    if (k == 0) throw std::invalid_argument("knn_sparsify: K must be >= 1");
    std::size_t n = sim.rows();
    std::vector<std::size_t> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = i;
    std::vector<std::tuple<std::size_t, std::size_t, double>> trips;
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b : detail::top_k_row(sim, a, k, all)) trips.emplace_back(a, b, 1.0);
    return Csr::from_triplets(n, n, trips);
}

// Symmetric normalization D^{-1/2} A D^{-1/2} with D taken from row sums; zero
// degrees map to zero rows/columns.
inline Csr sym_normalize(const Csr& adj) {
    std::size_t n = adj.rows();
    std::vector<double> inv_sqrt(n, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
        double d = adj.row_sum(r);
        if (d > 0.0) inv_sqrt[r] = 1.0 / std::sqrt(d);
    }
    std::vector<std::tuple<std::size_t, std::size_t, double>> trips;
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t k = adj.row_begin(r); k < adj.row_end(r); ++k) {
            std::size_t c = adj.col_at(k);
            trips.emplace_back(r, c, adj.val_at(k) * inv_sqrt[r] * inv_sqrt[c]);
        }
    return Csr::from_triplets(n, n, trips);
}

// User-user co-occurrence: counts of commonly interacted items, each row
// keeping its top-K neighbors by count (ties by smaller index), raw counts kept.
inline Csr build_user_user_graph(const std::vector<Interaction>& train, std::size_t user_count,
                                 std::size_t item_count, std::size_t k) {
    if (k == 0) throw std::invalid_argument("build_user_user_graph: K must be >= 1");
    std::vector<std::vector<std::size_t>> item_users(item_count);
    for (const auto& x : train) item_users[x.item].push_back(x.user);

    std::vector<std::vector<std::pair<std::size_t, std::size_t>>> counts(user_count);
    {
        // accumulate co-occurrence sparsely through shared items
        std::vector<std::map<std::size_t, std::size_t>> acc(user_count);
        for (const auto& users : item_users)
            for (std::size_t a : users)
                for (std::size_t b : users)
                    if (a != b) ++acc[a][b];
        for (std::size_t u = 0; u < user_count; ++u)
            counts[u].assign(acc[u].begin(), acc[u].end());
    }

    std::vector<std::tuple<std::size_t, std::size_t, double>> trips;
    for (std::size_t a = 0; a < user_count; ++a) {
        auto& row = counts[a];
        std::sort(row.begin(), row.end(), [](const auto& x, const auto& y) {
            if (x.second != y.second) return x.second > y.second;
            return x.first < y.first;
        });
        if (row.size() > k) row.resize(k);
        for (const auto& [b, c] : row) trips.emplace_back(a, b, static_cast<double>(c));
    }
    return Csr::from_triplets(user_count, user_count, trips);
}

// Inference mask: zero iff the source is warm and the target cold.
inline double inference_mask_value(bool a_warm, bool b_cold) {
    return (a_warm && b_cold) ? 0.0 : 1.0;
}

// Rectification: elementwise product of a binary item-item graph with
// the inference mask.
inline Csr rectify(const Csr& binary_graph, const std::vector<bool>& cold_mask) {
    std::vector<std::tuple<std::size_t, std::size_t, double>> trips;
    for (std::size_t r = 0; r < binary_graph.rows(); ++r) {
        bool a_warm = !cold_mask[r];
        for (std::size_t k = binary_graph.row_begin(r); k < binary_graph.row_end(r); ++k) {
            std::size_t c = binary_graph.col_at(k);
            if (inference_mask_value(a_warm, cold_mask[c]) != 0.0)
                trips.emplace_back(r, c, binary_graph.val_at(k));
        }
    }
    return Csr::from_triplets(binary_graph.rows(), binary_graph.cols(), trips);
}

// Training-time item-item graph: kNN among warm items only; cold rows and
// columns are empty. Matrices are item_count x item_count so embeddings index
// directly.
inline Csr build_item_graph_training(const Mat& sim, const std::vector<bool>& cold_mask,
                                     std::size_t k) {
    std::size_t n = sim.rows();
    std::vector<std::size_t> warm;
    for (std::size_t i = 0; i < n; ++i)
        if (!cold_mask[i]) warm.push_back(i);
    std::vector<std::tuple<std::size_t, std::size_t, double>> trips;
    for (std::size_t a : warm)
        for (std::size_t b : detail::top_k_row(sim, a, k, warm)) trips.emplace_back(a, b, 1.0);
    return Csr::from_triplets(n, n, trips);
}

// Inference-time expanded graph. Warm rows select neighbors among warm items
// (the inference mask applied before selection, so rectify() is a no-op on them
// and the warm block matches the training graph); cold rows select among all
// items.
inline Csr build_item_graph_expanded(const Mat& sim, const std::vector<bool>& cold_mask,
                                     std::size_t k) {
    std::size_t n = sim.rows();
    std::vector<std::size_t> warm, all(n);
    for (std::size_t i = 0; i < n; ++i) {
        all[i] = i;
        if (!cold_mask[i]) warm.push_back(i);
    }
    std::vector<std::tuple<std::size_t, std::size_t, double>> trips;
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b : detail::top_k_row(sim, a, k, cold_mask[a] ? all : warm))
            trips.emplace_back(a, b, 1.0);
    return Csr::from_triplets(n, n, trips);
}

// ---- collaborative knowledge graph ----

// CKG entity indexing: [0, n_items) items, [n_items, n_items + n_users)
// users, then external KG entities. Relations: KG relations then Interact.
struct Ckg {
    std::size_t n_users = 0;
    std::size_t n_items = 0;
    std::size_t n_external = 0;
    std::size_t n_relations = 0;  // includes Interact
    std::size_t interact_relation = 0;
    std::vector<Triple> triples;             // ckg index space
    std::vector<EntityType> external_types;  // per external entity

    std::size_t n_entities() const { return n_items + n_users + n_external; }
    std::size_t user_entity(std::size_t u) const { return n_items + u; }
    std::size_t external_entity(std::size_t e) const { return n_items + n_users + e; }
    bool is_item(std::size_t ent) const { return ent < n_items; }
    bool is_user(std::size_t ent) const { return ent >= n_items && ent < n_items + n_users; }
};

inline Ckg build_ckg(const std::vector<Interaction>& train, const KnowledgeGraph& kg,
                     std::size_t user_count, std::size_t item_count) {
    if (kg.item_alignment.size() < item_count)
        throw std::runtime_error("build_ckg: item alignment does not cover all items");
    Ckg ckg;
    ckg.n_users = user_count;
    ckg.n_items = item_count;
    ckg.n_relations = kg.relations.size() + 1;
    ckg.interact_relation = kg.relations.size();

    // map KG entity index -> ckg entity index
    std::vector<std::size_t> remap(kg.entities.size(), static_cast<std::size_t>(-1));
    for (std::size_t i = 0; i < item_count; ++i) {
        std::size_t e = kg.item_alignment[i];
        if (e >= kg.entities.size()) throw std::runtime_error("build_ckg: bad item alignment");
        remap[e] = i;
    }
    for (std::size_t e = 0; e < kg.entities.size(); ++e) {
        if (remap[e] != static_cast<std::size_t>(-1)) continue;
        if (kg.entity_types[e] == EntityType::Item)
            throw std::runtime_error("build_ckg: item entity without alignment");
        remap[e] = ckg.external_entity(ckg.n_external++);
        ckg.external_types.push_back(kg.entity_types[e]);
    }

    ckg.triples.reserve(kg.triples.size() + train.size());
    for (const auto& t : kg.triples)
        ckg.triples.push_back({remap[t.head], t.relation, remap[t.tail]});
    for (const auto& x : train)
        ckg.triples.push_back({ckg.user_entity(x.user), ckg.interact_relation, x.item});
    return ckg;
}

inline EntityType ckg_entity_type(const Ckg& ckg, std::size_t ent) {
    if (ckg.is_item(ent)) return EntityType::Item;
    if (ckg.is_user(ent)) return EntityType::External;  // users are never KG tails
    return ckg.external_types[ent - ckg.n_items - ckg.n_users];
}

// ---- interaction adjacency helpers ----

inline Csr interaction_adjacency(const std::vector<Interaction>& edges, std::size_t user_count,
                                 std::size_t item_count) {
    std::vector<std::tuple<std::size_t, std::size_t, double>> trips;
    trips.reserve(edges.size());
    for (const auto& x : edges) trips.emplace_back(x.user, x.item, 1.0);
    return Csr::from_triplets(user_count, item_count, trips);
}

// Message-passing operators for the bipartite convolutions: rows scaled by 1/sqrt(degree) of
// the receiving side; with symmetric = true both endpoint degrees are used.
inline Csr user_side_operator(const Csr& inter, bool symmetric) {
    std::vector<double> udeg(inter.rows(), 0.0), ideg(inter.cols(), 0.0);
    for (std::size_t u = 0; u < inter.rows(); ++u)
        for (std::size_t k = inter.row_begin(u); k < inter.row_end(u); ++k) {
            udeg[u] += 1.0;
            ideg[inter.col_at(k)] += 1.0;
        }
    std::vector<std::tuple<std::size_t, std::size_t, double>> trips;
    for (std::size_t u = 0; u < inter.rows(); ++u)
        for (std::size_t k = inter.row_begin(u); k < inter.row_end(u); ++k) {
            std::size_t i = inter.col_at(k);
            double w = symmetric ? 1.0 / std::sqrt(udeg[u] * ideg[i]) : 1.0 / std::sqrt(udeg[u]);
            trips.emplace_back(u, i, w);
        }
    return Csr::from_triplets(inter.rows(), inter.cols(), trips);
}

inline Csr item_side_operator(const Csr& inter, bool symmetric) {
    std::vector<double> udeg(inter.rows(), 0.0), ideg(inter.cols(), 0.0);
    for (std::size_t u = 0; u < inter.rows(); ++u)
        for (std::size_t k = inter.row_begin(u); k < inter.row_end(u); ++k) {
            udeg[u] += 1.0;
            ideg[inter.col_at(k)] += 1.0;
        }
    std::vector<std::tuple<std::size_t, std::size_t, double>> trips;
    for (std::size_t u = 0; u < inter.rows(); ++u)
        for (std::size_t k = inter.row_begin(u); k < inter.row_end(u); ++k) {
            std::size_t i = inter.col_at(k);
            double w = symmetric ? 1.0 / std::sqrt(udeg[u] * ideg[i]) : 1.0 / std::sqrt(ideg[i]);
            trips.emplace_back(i, u, w);
        }
    return Csr::from_triplets(inter.cols(), inter.rows(), trips);
}

// ---- the frozen bundle ----

struct FrozenGraphBundle {
    std::size_t user_count = 0;
    std::size_t item_count = 0;
    std::size_t k_item = 0;
    std::size_t k_user = 0;
    bool expanded = false;  // true when built for inference over warm+cold

    Csr inter_adj;  // user x item, binary, the edges used for propagation
    std::vector<Modality> modalities;
    std::vector<Csr> item_item_binary;      // per modality, already rectified
    std::vector<Csr> item_item_normalized;  // sym_normalize of the above
    Csr user_user_topk;                     // raw co-occurrence counts
    Ckg ckg;
};

// Training bundle: graphs over train interactions, item-item restricted to
// warm items. Frozen from here on; nothing in the trainer mutates it.
inline FrozenGraphBundle build_frozen_bundle(const std::vector<Interaction>& train_edges,
                                             std::size_t user_count, std::size_t item_count,
                                             const std::vector<const FeatureMatrix*>& features,
                                             const KnowledgeGraph& kg,
                                             const std::vector<bool>& cold_mask, std::size_t k_item,
                                             std::size_t k_user, bool expanded) {
    FrozenGraphBundle b;
    b.user_count = user_count;
    b.item_count = item_count;
    b.k_item = k_item;
    b.k_user = k_user;
    b.expanded = expanded;
    b.inter_adj = interaction_adjacency(train_edges, user_count, item_count);
    for (const FeatureMatrix* fm : features) {
        Mat sim = modality_similarity(*fm);
        Csr binary = expanded ? build_item_graph_expanded(sim, cold_mask, k_item)
                              : build_item_graph_training(sim, cold_mask, k_item);
        binary = rectify(binary, cold_mask);  // no-op for warm rows by construction
        b.modalities.push_back(fm->modality);
        b.item_item_binary.push_back(binary);
        b.item_item_normalized.push_back(sym_normalize(binary));
    }
    b.user_user_topk = build_user_user_graph(train_edges, user_count, item_count, k_user);
    b.ckg = build_ckg(train_edges, kg, user_count, item_count);
    return b;
}

// ---- bundle serialization (versioned binary container) ----

namespace detail {

inline void write_csr(std::ostream& os, const Csr& m) {
    binio::write_u64(os, m.rows());
    binio::write_u64(os, m.cols());
    binio::write_u64_vec(os, m.row_start());
    binio::write_u64_vec(os, m.col_index());
    binio::write_f64_vec(os, m.values());
}

inline Csr read_csr(std::istream& is) {
    std::size_t rows = static_cast<std::size_t>(binio::read_u64(is));
    std::size_t cols = static_cast<std::size_t>(binio::read_u64(is));
    auto row_start = binio::read_u64_vec(is);
    auto col = binio::read_u64_vec(is);
    auto val = binio::read_f64_vec(is);
    if (row_start.size() != rows + 1 || col.size() != val.size() || row_start.back() != col.size())
        throw std::runtime_error("graph bundle: inconsistent sparse block");
    Csr m(rows, cols);
    m.set_raw(std::move(row_start), std::move(col), std::move(val));
    return m;
}

}  // namespace detail

inline constexpr char kBundleMagic[] = "firzen-graphs v1\n";

inline void save_bundle(const FrozenGraphBundle& b, std::ostream& os) {
    os.write(kBundleMagic, sizeof(kBundleMagic) - 1);
    binio::write_u64(os, b.user_count);
    binio::write_u64(os, b.item_count);
    binio::write_u64(os, b.k_item);
    binio::write_u64(os, b.k_user);
    binio::write_u64(os, b.expanded ? 1 : 0);
    detail::write_csr(os, b.inter_adj);
    binio::write_u64(os, b.modalities.size());
    for (std::size_t m = 0; m < b.modalities.size(); ++m) {
        binio::write_string(os, modality_name(b.modalities[m]));
        detail::write_csr(os, b.item_item_binary[m]);
        detail::write_csr(os, b.item_item_normalized[m]);
    }
    detail::write_csr(os, b.user_user_topk);

    const Ckg& c = b.ckg;
    binio::write_u64(os, c.n_users);
    binio::write_u64(os, c.n_items);
    binio::write_u64(os, c.n_external);
    binio::write_u64(os, c.n_relations);
    binio::write_u64(os, c.interact_relation);
    binio::write_u64(os, c.triples.size());
    for (const auto& t : c.triples) {
        binio::write_u64(os, t.head);
        binio::write_u64(os, t.relation);
        binio::write_u64(os, t.tail);
    }
    binio::write_u64(os, c.external_types.size());
    for (EntityType t : c.external_types) binio::write_u64(os, static_cast<std::uint64_t>(t));
    if (!os) throw std::runtime_error("graph bundle: write failed");
}

inline FrozenGraphBundle load_bundle(std::istream& is) {
    binio::expect_magic(is, std::string(kBundleMagic, sizeof(kBundleMagic) - 1), "graph bundle");
    FrozenGraphBundle b;
    b.user_count = static_cast<std::size_t>(binio::read_u64(is));
    b.item_count = static_cast<std::size_t>(binio::read_u64(is));
    b.k_item = static_cast<std::size_t>(binio::read_u64(is));
    b.k_user = static_cast<std::size_t>(binio::read_u64(is));
    b.expanded = binio::read_u64(is) != 0;
    b.inter_adj = detail::read_csr(is);
    std::size_t n_mod = static_cast<std::size_t>(binio::read_u64(is));
    for (std::size_t m = 0; m < n_mod; ++m) {
        b.modalities.push_back(parse_modality(binio::read_string(is)));
        b.item_item_binary.push_back(detail::read_csr(is));
        b.item_item_normalized.push_back(detail::read_csr(is));
    }
    b.user_user_topk = detail::read_csr(is);

    Ckg& c = b.ckg;
    c.n_users = static_cast<std::size_t>(binio::read_u64(is));
    c.n_items = static_cast<std::size_t>(binio::read_u64(is));
    c.n_external = static_cast<std::size_t>(binio::read_u64(is));
    c.n_relations = static_cast<std::size_t>(binio::read_u64(is));
    c.interact_relation = static_cast<std::size_t>(binio::read_u64(is));
    std::size_t n_trip = static_cast<std::size_t>(binio::read_u64(is));
    c.triples.resize(n_trip);
    for (auto& t : c.triples) {
        t.head = static_cast<std::size_t>(binio::read_u64(is));
        t.relation = static_cast<std::size_t>(binio::read_u64(is));
        t.tail = static_cast<std::size_t>(binio::read_u64(is));
    }
    std::size_t n_ext = static_cast<std::size_t>(binio::read_u64(is));
    c.external_types.resize(n_ext);
    for (auto& t : c.external_types) t = static_cast<EntityType>(binio::read_u64(is));
    if (c.n_users != b.user_count || c.n_items != b.item_count ||
        c.external_types.size() != c.n_external)
        throw std::runtime_error("graph bundle: inconsistent ckg block");
    return b;
}

}  // namespace firzen

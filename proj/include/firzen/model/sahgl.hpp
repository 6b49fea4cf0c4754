#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "firzen/core/autodiff.hpp"
#include "firzen/graphs/frozen.hpp"
#include "firzen/model/params.hpp"
#include "firzen/train/config.hpp"

namespace firzen {

// ---- behavior-aware propagation (user-item bipartite graph) ----

struct BehaviorEmbeddings {
    ad::Var user;  // n_users x d, layer-pooled
    ad::Var item;  // n_items x d
};

// Alternating bipartite convolution: each layer sends item states to users
// and user states to items through inverse-sqrt-degree operators, then pools
// the layer outputs 0..L. The printed pooling divides the L+1 summands by L;
// pool_divide_l_plus_1 switches to a true mean.
inline BehaviorEmbeddings behavior_conv(ad::Tape& tape, const Csr& user_op, const Csr& user_op_t,
                                        const Csr& item_op, const Csr& item_op_t, ad::Var e_u0,
                                        ad::Var e_i0, std::size_t L, bool pool_divide_l_plus_1) {
    std::vector<ad::Var> u_layers{e_u0}, i_layers{e_i0};
    for (std::size_t l = 0; l < L; ++l) {
        u_layers.push_back(tape.spmm(&user_op, &user_op_t, i_layers.back()));
        i_layers.push_back(tape.spmm(&item_op, &item_op_t, u_layers[u_layers.size() - 2]));
    }
    double denom = pool_divide_l_plus_1 ? static_cast<double>(L + 1)
                                        : static_cast<double>(L == 0 ? 1 : L);
    auto pool = [&](const std::vector<ad::Var>& layers) {
        ad::Var acc = layers[0];
        for (std::size_t l = 1; l < layers.size(); ++l) acc = tape.add(acc, layers[l]);
        return tape.scale(acc, 1.0 / denom);
    };
    return {pool(u_layers), pool(i_layers)};
}

// ---- modality-aware propagation (projected features over the same graph) ----

struct ModalityEmbeddings {
    ad::Var user;  // n_users x d
    ad::Var item;  // n_items x d
};

// Projects raw item features with a fully-connected layer + dropout, then
// sweeps them to users and back to items with the degree-normalized operators.
inline ModalityEmbeddings modality_conv(ad::Tape& tape, const Csr& user_op, const Csr& user_op_t,
                                        const Csr& item_op, const Csr& item_op_t, ad::Var features,
                                        ad::Var proj_w, ad::Var proj_b, double dropout_rate,
                                        bool training, Rng& rng) {
    ad::Var projected = tape.add_rowvec(tape.matmul_(features, proj_w), proj_b);
    projected = tape.dropout(projected, dropout_rate, training, rng);
    ad::Var x_user = tape.spmm(&user_op, &user_op_t, projected);
    ad::Var x_item = tape.spmm(&item_op, &item_op_t, x_user);
    return {x_user, x_item};
}

// ---- knowledge-aware attention over the collaborative KG ----

// Triples regrouped by relation so each group shares one transform W_r.
struct CkgIndex {
    std::vector<std::vector<std::size_t>> heads_by_rel;  // per relation
    std::vector<std::vector<std::size_t>> tails_by_rel;
    std::vector<std::size_t> seg_heads;  // head entity per triple, relation-major order
    std::size_t n_entities = 0;

    static CkgIndex build(const Ckg& ckg) {
        CkgIndex idx;
        idx.n_entities = ckg.n_entities();
        idx.heads_by_rel.resize(ckg.n_relations);
        idx.tails_by_rel.resize(ckg.n_relations);
        for (const auto& t : ckg.triples) {
            idx.heads_by_rel[t.relation].push_back(t.head);
            idx.tails_by_rel[t.relation].push_back(t.tail);
        }
        for (std::size_t r = 0; r < ckg.n_relations; ++r)
            for (std::size_t h : idx.heads_by_rel[r]) idx.seg_heads.push_back(h);
        return idx;
    }
};

struct KnowledgeEmbeddings {
    ad::Var user;  // n_users x d_know
    ad::Var item;  // n_items x d_know
    ad::Var all;   // n_entities x d_know
};

// One attention + aggregation round. Entity inputs are the base id
// embeddings (items, then users, then external entities). For each triple the
// score is (x_t W_r) . tanh(x_h W_r + x_r), softmaxed over the head's
// ego-network; the aggregate mixes the sum and product paths through two
// learned maps with LeakyReLU.
inline KnowledgeEmbeddings kg_attention(ad::Tape& tape, const Ckg& ckg, const CkgIndex& idx,
                                        ad::Var entities, ad::Var relation_table,
                                        const std::vector<ad::Var>& relation_w, ad::Var agg_w1,
                                        ad::Var agg_w2, double leaky_slope) {
    std::vector<ad::Var> logit_parts, tail_parts;
    for (std::size_t r = 0; r < ckg.n_relations; ++r) {
        if (idx.heads_by_rel[r].empty()) continue;
        ad::Var xh = tape.gather_rows(entities, idx.heads_by_rel[r]);
        ad::Var xt = tape.gather_rows(entities, idx.tails_by_rel[r]);
        ad::Var xr = tape.gather_rows(relation_table, {r});
        ad::Var wh = tape.add_rowvec(tape.matmul_(xh, relation_w[r]), xr);
        ad::Var wt = tape.matmul_(xt, relation_w[r]);
        logit_parts.push_back(tape.row_dot(wt, tape.tanh_(wh)));
        tail_parts.push_back(xt);
    }
    if (logit_parts.empty()) throw std::runtime_error("kg_attention: empty knowledge graph");

    ad::Var logits = logit_parts.size() == 1 ? logit_parts[0] : tape.vcat(logit_parts);
    ad::Var tails = tail_parts.size() == 1 ? tail_parts[0] : tape.vcat(tail_parts);
    ad::Var alpha = tape.segment_softmax(logits, idx.seg_heads, idx.n_entities);
    ad::Var x_nh = tape.segment_sum(tape.mul_colvec(tails, alpha), idx.seg_heads, idx.n_entities);

    ad::Var sum_path = tape.leaky_relu(tape.matmul_(tape.add(entities, x_nh), agg_w1), leaky_slope);
    ad::Var mix_path = tape.leaky_relu(tape.matmul_(tape.hadamard(entities, x_nh), agg_w2),
                                       leaky_slope);
    ad::Var know = tape.add(sum_path, mix_path);

    std::vector<std::size_t> item_rows(ckg.n_items), user_rows(ckg.n_users);
    for (std::size_t i = 0; i < ckg.n_items; ++i) item_rows[i] = i;
    for (std::size_t u = 0; u < ckg.n_users; ++u) user_rows[u] = ckg.user_entity(u);
    return {tape.gather_rows(know, user_rows), tape.gather_rows(know, item_rows), know};
}

// ---- fusion (behavior + knowledge + weighted modalities) ----

struct FusedEmbeddings {
    ad::Var user;
    ad::Var item;
};

struct FusionInputs {
    ad::Var behavior_user, behavior_item;  // valid iff enable_ba
    ad::Var know_user, know_item;          // already in id space; valid iff enable_ka
    ad::Var text_user, text_item;          // valid iff enable_ma_text
    ad::Var image_user, image_item;        // valid iff enable_ma_image
};

inline FusedEmbeddings fuse_representations(ad::Tape& tape, const FusionInputs& in,
                                            const TrainingConfig& cfg, double beta_text,
                                            double beta_image) {
    auto combine = [&](ad::Var ba, ad::Var ka, ad::Var tx, ad::Var im) {
        ad::Var acc;
        auto add_in = [&](ad::Var v, double w) {
            ad::Var term = tape.scale(v, w);
            acc = acc.valid() ? tape.add(acc, term) : term;
        };
        if (cfg.enable_ba) add_in(ba, 1.0);
        if (cfg.enable_ka) add_in(ka, cfg.lambda_k);
        if (cfg.enable_ma_text) add_in(tx, cfg.lambda_m * beta_text);
        if (cfg.enable_ma_image) add_in(im, cfg.lambda_m * beta_image);
        if (!acc.valid()) throw std::invalid_argument("fusion: every branch is disabled");
        return acc;
    };
    return {combine(in.behavior_user, in.know_user, in.text_user, in.image_user),
            combine(in.behavior_item, in.know_item, in.text_item, in.image_item)};
}

// ---- modality importance momentum update ----

struct BetaPair {
    double text, image;
};

// Softmax of the two mean discriminator scores, folded into the running
// importances with momentum eta. Preserves beta_text + beta_image.
inline BetaPair update_modality_importance(double beta_text, double beta_image, double d_text,
                                           double d_image, double eta) {
    double mx = std::max(d_text, d_image);
    double et = std::exp(d_text - mx), ei = std::exp(d_image - mx);
    double soft_t = et / (et + ei);
    double soft_i = ei / (et + ei);
    return {eta * beta_text + (1.0 - eta) * soft_t, eta * beta_image + (1.0 - eta) * soft_i};
}

}  // namespace firzen

#pragma once

#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "firzen/core/autodiff.hpp"
#include "firzen/graphs/frozen.hpp"
#include "firzen/model/mshgl.hpp"
#include "firzen/model/params.hpp"
#include "firzen/model/sahgl.hpp"
#include "firzen/train/config.hpp"

namespace firzen {

// Constant operators derived once from a frozen bundle; they must outlive
// every tape built over them.
struct GraphOps {
    Csr user_op, user_op_t;  // degree-normalized user <- item messages
    Csr item_op, item_op_t;  // degree-normalized item <- user messages
    std::vector<Csr> ii, ii_t;  // normalized item-item graph per modality
    Csr uu_attn, uu_attn_t;     // softmaxed user-user attention operator
    CkgIndex ckg_index;
    Mat text_features, image_features;

    static GraphOps build(const FrozenGraphBundle& bundle, const Mat& text, const Mat& image,
                          const TrainingConfig& cfg) {
        GraphOps ops;
        ops.user_op = user_side_operator(bundle.inter_adj, cfg.symmetric_behavior_norm);
        ops.user_op_t = ops.user_op.transposed();
        ops.item_op = item_side_operator(bundle.inter_adj, cfg.symmetric_behavior_norm);
        ops.item_op_t = ops.item_op.transposed();
        for (const Csr& g : bundle.item_item_normalized) {
            ops.ii.push_back(g);
            ops.ii_t.push_back(g.transposed());
        }
        ops.uu_attn = user_user_attention_operator(bundle.user_user_topk);
        ops.uu_attn_t = ops.uu_attn.transposed();
        ops.ckg_index = CkgIndex::build(bundle.ckg);
        ops.text_features = text;
        ops.image_features = image;
        return ops;
    }
};

// Tape handles for every learnable tensor of one forward pass. Tensors for
// which trainable(name) is false enter the tape as constants, which is how
// the alternating steps isolate their parameter subsets.
struct ParamVars {
    std::map<std::string, ad::Var> vars;

    ad::Var at(const std::string& name) const {
        auto it = vars.find(name);
        if (it == vars.end()) throw std::logic_error("ParamVars: unknown name " + name);
        return it->second;
    }

    static ParamVars make(ad::Tape& tape, ModelParams& params,
                          const std::function<bool(const std::string&)>& trainable) {
        ParamVars pv;
        params.for_each_param([&](const std::string& name, Mat& m) {
            pv.vars.emplace(name, trainable(name) ? tape.param(m) : tape.constant(m));
        });
        return pv;
    }
};

inline bool all_params_trainable(const std::string&) { return true; }

inline bool is_discriminator_param(const std::string& name) {
    return name == "disc_w" || name == "disc_b" || name == "bn_gain" || name == "bn_bias";
}

// Knowledge-step subset: entity, relation and transform tensors only.
inline bool is_kg_param(const std::string& name) {
    return name == "external_table" || name == "relation_table" ||
           name.rfind("relation_w.", 0) == 0;
}

// Recommendation-step subset: everything except the discriminator.
inline bool is_rec_param(const std::string& name) { return !is_discriminator_param(name); }

// All intermediates of one forward pass that later stages and losses need.
struct ForwardResult {
    ParamVars pv;
    ad::Var e_u0, e_i0;  // base id tables on the tape
    BehaviorEmbeddings behavior;                  // valid iff enable_ba
    std::vector<ModalityEmbeddings> modality;     // per bundle modality (always built)
    KnowledgeEmbeddings know;                     // valid iff enable_ka
    ad::Var know_user_id, know_item_id;           // knowledge mapped to id space
    FusedEmbeddings fused;
    std::vector<ad::Var> item_item;  // per modality, propagated fused items
    ad::Var breve_user, breve_item;  // final representations for scoring
};

inline bool modality_enabled(const TrainingConfig& cfg, Modality m) {
    return m == Modality::Text ? cfg.enable_ma_text : cfg.enable_ma_image;
}

inline ForwardResult model_forward(ad::Tape& tape, const GraphOps& ops,
                                   const FrozenGraphBundle& bundle, ModelParams& params,
                                   const TrainingConfig& cfg, bool training, Rng& rng,
                                   const std::function<bool(const std::string&)>& trainable =
                                       all_params_trainable) {
    ForwardResult r;
    r.pv = ParamVars::make(tape, params, trainable);
    r.e_u0 = r.pv.at("user_table");
    r.e_i0 = r.pv.at("item_table");

    if (cfg.enable_ba)
        r.behavior = behavior_conv(tape, ops.user_op, ops.user_op_t, ops.item_op, ops.item_op_t,
                                   r.e_u0, r.e_i0, cfg.L, cfg.pool_divide_l_plus_1);

    for (std::size_t m = 0; m < bundle.modalities.size(); ++m) {
        bool is_text = bundle.modalities[m] == Modality::Text;
        ad::Var feats = tape.constant(is_text ? ops.text_features : ops.image_features);
        r.modality.push_back(modality_conv(
            tape, ops.user_op, ops.user_op_t, ops.item_op, ops.item_op_t, feats,
            r.pv.at(is_text ? "text_proj_w" : "image_proj_w"),
            r.pv.at(is_text ? "text_proj_b" : "image_proj_b"), cfg.dropout, training, rng));
    }

    if (cfg.enable_ka) {
        // base entity matrix in CKG order: items, users, external entities
        ad::Var entities = tape.vcat({r.e_i0, r.e_u0, r.pv.at("external_table")});
        std::vector<ad::Var> rel_w;
        for (std::size_t rel = 0; rel < params.relation_w.size(); ++rel)
            rel_w.push_back(r.pv.at("relation_w." + std::to_string(rel)));
        r.know = kg_attention(tape, bundle.ckg, ops.ckg_index, entities,
                              r.pv.at("relation_table"), rel_w, r.pv.at("agg_w1"),
                              r.pv.at("agg_w2"), cfg.leaky_slope);
        if (params.know2id.size() > 0) {
            r.know_user_id = tape.matmul_(r.know.user, r.pv.at("know2id"));
            r.know_item_id = tape.matmul_(r.know.item, r.pv.at("know2id"));
        } else {
            r.know_user_id = r.know.user;
            r.know_item_id = r.know.item;
        }
    }

    FusionInputs fin;
    fin.behavior_user = r.behavior.user;
    fin.behavior_item = r.behavior.item;
    fin.know_user = r.know_user_id;
    fin.know_item = r.know_item_id;
    for (std::size_t m = 0; m < bundle.modalities.size(); ++m) {
        if (bundle.modalities[m] == Modality::Text) {
            fin.text_user = r.modality[m].user;
            fin.text_item = r.modality[m].item;
        } else {
            fin.image_user = r.modality[m].user;
            fin.image_item = r.modality[m].item;
        }
    }
    r.fused = fuse_representations(tape, fin, cfg, params.beta_text, params.beta_image);

    if (cfg.enable_ms) {
        std::vector<ad::Var> per_mod;
        for (std::size_t m = 0; m < bundle.modalities.size(); ++m) {
            ad::Var h = item_item_propagate(tape, ops.ii[m], ops.ii_t[m], r.fused.item, cfg.L_ii);
            r.item_item.push_back(h);
            if (modality_enabled(cfg, bundle.modalities[m])) per_mod.push_back(h);
        }
        if (per_mod.empty()) per_mod.push_back(r.fused.item);  // no modality branch active
        r.breve_item = modality_self_attention(tape, per_mod, r.pv.at("attn_q"),
                                               r.pv.at("attn_k"), cfg.H);
        r.breve_user = user_user_propagate(tape, ops.uu_attn, ops.uu_attn_t, r.fused.user,
                                           cfg.L_uu);
    } else {
        r.breve_user = r.fused.user;
        r.breve_item = r.fused.item;
    }
    return r;
}

}  // namespace firzen

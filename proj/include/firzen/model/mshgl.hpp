#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "firzen/core/autodiff.hpp"
#include "firzen/core/matrix.hpp"
#include "firzen/train/config.hpp"

namespace firzen {

// ---- item-item propagation ----

// Runs L_ii sweeps of the frozen normalized item-item graph of one modality
// over the fused item embeddings; the output is the last layer, not a pool.
inline ad::Var item_item_propagate(ad::Tape& tape, const Csr& g_norm, const Csr& g_norm_t,
                                   ad::Var fused_items, std::size_t layers) {
    ad::Var h = fused_items;
    for (std::size_t l = 0; l < layers; ++l) h = tape.spmm(&g_norm, &g_norm_t, h);
    return h;
}

// ---- user-user propagation ----

// The attention weights are a softmax of the raw co-occurrence counts over
// each user's nonzero neighbors. Counts are frozen, so the whole operator is
// a constant row-stochastic matrix; users without neighbors fall back to the
// identity row.
inline Csr user_user_attention_operator(const Csr& counts) {
    std::vector<std::tuple<std::size_t, std::size_t, double>> trips;
    for (std::size_t u = 0; u < counts.rows(); ++u) {
        if (counts.row_nnz(u) == 0) {
            trips.emplace_back(u, u, 1.0);
            continue;
        }
        double mx = -1e300;
        for (std::size_t k = counts.row_begin(u); k < counts.row_end(u); ++k)
            mx = std::max(mx, counts.val_at(k));
        double denom = 0.0;
        for (std::size_t k = counts.row_begin(u); k < counts.row_end(u); ++k)
            denom += std::exp(counts.val_at(k) - mx);
        for (std::size_t k = counts.row_begin(u); k < counts.row_end(u); ++k)
            trips.emplace_back(u, counts.col_at(k), std::exp(counts.val_at(k) - mx) / denom);
    }
    return Csr::from_triplets(counts.rows(), counts.cols(), trips);
}

inline ad::Var user_user_propagate(ad::Tape& tape, const Csr& attn_op, const Csr& attn_op_t,
                                   ad::Var fused_users, std::size_t layers) {
    ad::Var z = fused_users;
    for (std::size_t l = 0; l < layers; ++l) z = tape.spmm(&attn_op, &attn_op_t, z);
    return z;
}

// ---- multi-head self-attention across modalities ----

// Heads act blockwise: head h scores modality pairs with the h-th d/H column
// slices of the query/key maps, softmaxes over source modalities, and mixes
// the h-th column slice of each source representation. Heads are concatenated
// back to width d; the item output averages over target modalities. There is
// no value projection.
inline ad::Var modality_self_attention(ad::Tape& tape, const std::vector<ad::Var>& per_modality,
                                       ad::Var attn_q, ad::Var attn_k, std::size_t heads) {
    if (per_modality.empty())
        throw std::invalid_argument("modality_self_attention: no modalities");
    std::size_t d = tape.val(per_modality[0]).cols();
    if (heads == 0 || d % heads != 0)
        throw std::invalid_argument("modality_self_attention: H must divide d");
    std::size_t p = d / heads;
    std::size_t n_mod = per_modality.size();
    double inv_sqrt_p = 1.0 / std::sqrt(static_cast<double>(p));

    std::vector<ad::Var> per_target_out(n_mod);
    for (std::size_t m = 0; m < n_mod; ++m) {
        std::vector<ad::Var> head_outs;
        for (std::size_t h = 0; h < heads; ++h) {
            ad::Var wq = tape.col_slice(attn_q, h * p, p);
            ad::Var wk = tape.col_slice(attn_k, h * p, p);
            ad::Var q = tape.matmul_(per_modality[m], wq);
            std::vector<ad::Var> scores;
            for (std::size_t m2 = 0; m2 < n_mod; ++m2) {
                ad::Var k = tape.matmul_(per_modality[m2], wk);
                scores.push_back(tape.scale(tape.row_dot(q, k), inv_sqrt_p));
            }
            ad::Var weights = tape.row_softmax(tape.hcat(scores));  // n x n_mod
            ad::Var mixed;
            for (std::size_t m2 = 0; m2 < n_mod; ++m2) {
                ad::Var w_col = tape.col_slice(weights, m2, 1);
                ad::Var slice = tape.col_slice(per_modality[m2], h * p, p);
                ad::Var term = tape.mul_colvec(slice, w_col);
                mixed = mixed.valid() ? tape.add(mixed, term) : term;
            }
            head_outs.push_back(mixed);
        }
        per_target_out[m] = heads == 1 ? head_outs[0] : tape.hcat(head_outs);
    }

    ad::Var acc = per_target_out[0];
    for (std::size_t m = 1; m < n_mod; ++m) acc = tape.add(acc, per_target_out[m]);
    return tape.scale(acc, 1.0 / static_cast<double>(n_mod));
}

}  // namespace firzen

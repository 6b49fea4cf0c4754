#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "firzen/core/autodiff.hpp"
#include "firzen/model/forward.hpp"

namespace firzen {

// ---- sampled graph views for the adversarial game ----

// cosine-similarity matrix between rows of a and rows of b
inline ad::Var cosine_matrix(ad::Tape& tape, ad::Var a, ad::Var b) {
    return tape.matmul_(tape.row_l2_normalize(a), tape.transpose_(tape.row_l2_normalize(b)));
}

// Virtual interaction graph of one modality over sampled users x items.
inline ad::Var virtual_interaction_graph(ad::Tape& tape, ad::Var x_user, ad::Var x_item,
                                         const std::vector<std::size_t>& user_rows,
                                         const std::vector<std::size_t>& item_cols) {
    return cosine_matrix(tape, tape.gather_rows(x_user, user_rows),
                         tape.gather_rows(x_item, item_cols));
}

// dense submatrix of the binary interaction graph
inline Mat interaction_submatrix(const Csr& inter, const std::vector<std::size_t>& user_rows,
                                 const std::vector<std::size_t>& item_cols) {
    Mat out(user_rows.size(), item_cols.size());
    for (std::size_t i = 0; i < user_rows.size(); ++i)
        for (std::size_t j = 0; j < item_cols.size(); ++j)
            out(i, j) = inter.at(user_rows[i], item_cols[j]);
    return out;
}

// Per-row Gumbel softmax of the observed graph at temperature
// tau, plus gamma times the cosine auxiliary signal from the final
// representations. The Gumbel draw is taken here, one value per cell.
inline ad::Var augment_objective_graph(ad::Tape& tape, const Mat& inter_sample, ad::Var breve_user,
                                       ad::Var breve_item,
                                       const std::vector<std::size_t>& user_rows,
                                       const std::vector<std::size_t>& item_cols, double tau,
                                       double gamma, Rng& rng) {
    Mat noisy = inter_sample;
    for (double& v : noisy.raw()) v = (v + rng.gumbel()) / tau;
    ad::Var base = tape.row_softmax(tape.constant(noisy));
    ad::Var phi = cosine_matrix(tape, tape.gather_rows(breve_user, user_rows),
                                tape.gather_rows(breve_item, item_cols));
    return tape.add(base, tape.scale(phi, gamma));
}

// ---- discriminator ----

struct DiscriminatorOut {
    ad::Var scores;      // n x 1 in (0, 1)
    ad::Var pre_sigmoid; // n x 1, after dropout
    ad::Var linear;      // n x 1, before the LeakyReLU
    Mat drop_mask;       // n x 1 inverted-dropout scales actually applied
    double batch_mean = 0.0, batch_var = 0.0;  // statistics used by this pass
};

// D(x) = sigmoid(Dropout(BatchNorm(LeakyReLU(x w + b)))). Batch statistics
// are treated as constants of the pass (they do not receive gradient), which
// is also the convention the gradient penalty differentiates.
inline DiscriminatorOut discriminator_forward(ad::Tape& tape, ad::Var x, ad::Var disc_w,
                                              ad::Var disc_b, ad::Var bn_gain, ad::Var bn_bias,
                                              double leaky_slope, double dropout_rate,
                                              bool training, double running_mean,
                                              double running_var, Rng& rng) {
    constexpr double kBnEps = 1e-5;
    DiscriminatorOut out;
    out.linear = tape.add_rowvec(tape.matmul_(x, disc_w), disc_b);
    ad::Var act = tape.leaky_relu(out.linear, leaky_slope);

    if (training) {
        const Mat& a = tape.val(act);
        double mean = 0.0;
        for (double v : a.raw()) mean += v;
        mean /= static_cast<double>(a.size());
        double var = 0.0;
        for (double v : a.raw()) var += (v - mean) * (v - mean);
        var /= static_cast<double>(a.size());
        out.batch_mean = mean;
        out.batch_var = var;
    } else {
        out.batch_mean = running_mean;
        out.batch_var = running_var;
    }
    ad::Var nrm = tape.scale(tape.add_const(act, -out.batch_mean),
                             1.0 / std::sqrt(out.batch_var + kBnEps));
    ad::Var bn = tape.add_rowvec(tape.mul_scalar(nrm, bn_gain), bn_bias);

    out.drop_mask = Mat(tape.val(bn).rows(), 1, 1.0);
    if (training && dropout_rate > 0.0) {
        double keep = 1.0 - dropout_rate;
        for (double& v : out.drop_mask.raw()) v = rng.uniform() < keep ? 1.0 / keep : 0.0;
    }
    out.pre_sigmoid = tape.hadamard(bn, tape.constant(out.drop_mask));
    out.scores = tape.sigmoid_(out.pre_sigmoid);
    return out;
}

// Closed-form input-gradient norm of the one-layer discriminator, built from
// tape nodes so its parameters still receive gradient through the penalty:
// per row, |sigmoid'(z2)| * drop * |gain| / sqrt(var + eps) * leakyReLU'(z1)
// * ||w||. The LeakyReLU derivative is piecewise constant, so it enters as a
// constant of the pass.
inline ad::Var discriminator_input_grad_norm(ad::Tape& tape, const DiscriminatorOut& d,
                                             ad::Var disc_w, ad::Var bn_gain, double leaky_slope) {
    constexpr double kBnEps = 1e-5;
    ad::Var sig = d.scores;
    ad::Var sig_deriv = tape.hadamard(sig, tape.add_const(tape.scale(sig, -1.0), 1.0));

    Mat piecewise(tape.val(d.linear).rows(), 1);
    for (std::size_t i = 0; i < piecewise.rows(); ++i) {
        double lk = tape.val(d.linear)(i, 0) > 0.0 ? 1.0 : leaky_slope;
        piecewise(i, 0) = lk * d.drop_mask(i, 0);
    }
    ad::Var chain = tape.hadamard(sig_deriv, tape.constant(piecewise));
    chain = tape.mul_scalar(chain, tape.scale(bn_gain, 1.0 / std::sqrt(d.batch_var + kBnEps)));
    ad::Var w_norm = tape.sqrt_(tape.sum_all(tape.hadamard(disc_w, disc_w)));
    return tape.abs_(tape.mul_scalar(chain, w_norm));
}

// ---- adversarial loss ----

struct AdversarialLoss {
    ad::Var loss;       // diff + xi * penalty, what the generator receives
    ad::Var diff;       // mean D(augmented) - mean D(modality graph)
    ad::Var penalty;    // gradient penalty term; invalid when xi = 0
    double mean_real;   // mean D over the modality graph rows
    double mean_fake;   // mean D over the augmented graph rows
};

// WGAN-style objective with gradient penalty on per-row interpolates. The
// same expression serves both players: the discriminator step maximizes it
// (minimizes its negation) and the generator step receives it inside L_Rec.
inline AdversarialLoss adversarial_loss(ad::Tape& tape, ad::Var g_aug, ad::Var g_modality,
                                        ad::Var disc_w, ad::Var disc_b, ad::Var bn_gain,
                                        ad::Var bn_bias, const TrainingConfig& cfg, bool training,
                                        double running_mean, double running_var, Rng& rng,
                                        double* batch_mean_out = nullptr,
                                        double* batch_var_out = nullptr) {
    auto disc = [&](ad::Var x) {
        return discriminator_forward(tape, x, disc_w, disc_b, bn_gain, bn_bias, cfg.leaky_slope,
                                     cfg.dropout, training, running_mean, running_var, rng);
    };
    DiscriminatorOut d_fake = disc(g_aug);
    DiscriminatorOut d_real = disc(g_modality);
    if (batch_mean_out) *batch_mean_out = 0.5 * (d_fake.batch_mean + d_real.batch_mean);
    if (batch_var_out) *batch_var_out = 0.5 * (d_fake.batch_var + d_real.batch_var);

    AdversarialLoss result;
    result.diff = tape.sub(tape.mean_all(d_fake.scores), tape.mean_all(d_real.scores));
    ad::Var loss = result.diff;

    if (cfg.xi > 0.0) {
        std::size_t n = tape.val(g_aug).rows();
        Mat eps(n, 1);
        for (double& v : eps.raw()) v = rng.uniform();
        Mat one_minus = eps;
        for (double& v : one_minus.raw()) v = 1.0 - v;
        ad::Var interp = tape.add(tape.mul_colvec(g_aug, tape.constant(eps)),
                                  tape.mul_colvec(g_modality, tape.constant(one_minus)));
        DiscriminatorOut d_mix = disc(interp);
        ad::Var norm = discriminator_input_grad_norm(tape, d_mix, disc_w, bn_gain,
                                                     cfg.leaky_slope);
        ad::Var nm1 = tape.add_const(norm, -1.0);
        result.penalty = tape.mean_all(tape.hadamard(nm1, nm1));
        loss = tape.add(loss, tape.scale(result.penalty, cfg.xi));
    }

    result.loss = loss;
    double mr = 0.0, mf = 0.0;
    for (double v : tape.val(d_real.scores).raw()) mr += v;
    for (double v : tape.val(d_fake.scores).raw()) mf += v;
    result.mean_real = mr / static_cast<double>(tape.val(d_real.scores).rows());
    result.mean_fake = mf / static_cast<double>(tape.val(d_fake.scores).rows());
    return result;
}

// ---- contrastive alignment loss ----

// InfoNCE between the final user representations and each modality's user
// representation; the denominator pools cross-view and in-view similarities
// over all users. Similarities are cosine over a configurable temperature.
inline ad::Var contrastive_loss(ad::Tape& tape, ad::Var breve_user,
                                const std::vector<ad::Var>& modality_users, double temperature) {
    ad::Var total;
    for (ad::Var xm : modality_users) {
        double inv_t = 1.0 / temperature;
        ad::Var cross = tape.scale(cosine_matrix(tape, breve_user, xm), inv_t);   // (u', u)
        ad::Var inview = tape.scale(cosine_matrix(tape, xm, xm), inv_t);          // (u', u)
        // denominator per column u: sum over u' of exp(cross) + exp(inview)
        ad::Var denom = tape.row_sum(
            tape.transpose_(tape.add(tape.exp_(cross), tape.exp_(inview))));      // n x 1
        // numerator per u: diagonal of cross
        std::size_t n = tape.val(cross).rows();
        ad::Var diag;
        {
            // extract the diagonal as row_dot with one-hot selection
            Mat eye(n, n);
            for (std::size_t i = 0; i < n; ++i) eye(i, i) = 1.0;
            diag = tape.row_dot(cross, tape.constant(eye));
        }
        ad::Var per_user = tape.sub(diag, tape.log_(denom));
        ad::Var term = tape.scale(tape.sum_all(per_user), -1.0);
        total = total.valid() ? tape.add(total, term) : term;
    }
    if (!total.valid()) throw std::invalid_argument("contrastive_loss: no modality views");
    return total;
}

// ---- knowledge triplet loss ----

struct KgQuad {
    std::size_t head, relation, tail_pos, tail_neg;
};

// TransR energy sc(h,r,t) = -|| e_h W_r + e_r - e_t W_r ||^2 with a pairwise
// softplus ranking objective over corrupted tails.
inline ad::Var kg_triplet_loss(ad::Tape& tape, ad::Var entities, ad::Var relation_table,
                               const std::vector<ad::Var>& relation_w,
                               const std::vector<KgQuad>& quads) {
    if (quads.empty()) throw std::invalid_argument("kg_triplet_loss: no quads");
    std::vector<std::vector<std::size_t>> heads(relation_w.size()), pos(relation_w.size()),
        neg(relation_w.size());
    for (const auto& q : quads) {
        heads[q.relation].push_back(q.head);
        pos[q.relation].push_back(q.tail_pos);
        neg[q.relation].push_back(q.tail_neg);
    }
    std::vector<ad::Var> parts;
    for (std::size_t r = 0; r < relation_w.size(); ++r) {
        if (heads[r].empty()) continue;
        ad::Var h = tape.gather_rows(entities, heads[r]);
        ad::Var xr = tape.gather_rows(relation_table, {r});
        auto energy = [&](const std::vector<std::size_t>& tails) {
            ad::Var t = tape.gather_rows(entities, tails);
            ad::Var diff = tape.add_rowvec(tape.matmul_(tape.sub(h, t), relation_w[r]), xr);
            return tape.scale(tape.row_dot(diff, diff), -1.0);
        };
        ad::Var margin = tape.sub(energy(pos[r]), energy(neg[r]));
        // -ln sigmoid(x) = softplus(-x)
        ad::Var softplus = tape.log_(tape.add_const(tape.exp_(tape.scale(margin, -1.0)), 1.0));
        parts.push_back(tape.sum_all(softplus));
    }
    ad::Var total = parts[0];
    for (std::size_t i = 1; i < parts.size(); ++i) total = tape.add(total, parts[i]);
    return total;
}

// ---- BPR ranking loss ----

struct BprTriplet {
    std::size_t user, item_pos, item_neg;
};

inline ad::Var bpr_loss(ad::Tape& tape, ad::Var breve_user, ad::Var breve_item,
                        const std::vector<BprTriplet>& triplets) {
    if (triplets.empty()) throw std::invalid_argument("bpr_loss: no triplets");
    std::vector<std::size_t> users, pos, neg;
    for (const auto& t : triplets) {
        users.push_back(t.user);
        pos.push_back(t.item_pos);
        neg.push_back(t.item_neg);
    }
    ad::Var u = tape.gather_rows(breve_user, users);
    ad::Var yp = tape.row_dot(u, tape.gather_rows(breve_item, pos));
    ad::Var yn = tape.row_dot(u, tape.gather_rows(breve_item, neg));
    ad::Var margin = tape.sub(yp, yn);
    return tape.sum_all(tape.log_(tape.add_const(tape.exp_(tape.scale(margin, -1.0)), 1.0)));
}

// ---- L2 regularizer over a named parameter subset ----

inline ad::Var l2_penalty(ad::Tape& tape, const ParamVars& pv,
                          const std::function<bool(const std::string&)>& include) {
    ad::Var total;
    for (const auto& [name, v] : pv.vars) {
        if (!include(name) || !tape.requires_grad(v)) continue;
        ad::Var sq = tape.sum_all(tape.hadamard(v, v));
        total = total.valid() ? tape.add(total, sq) : sq;
    }
    if (!total.valid()) {
        Mat zero(1, 1);
        total = tape.constant(zero);
    }
    return total;
}

}  // namespace firzen

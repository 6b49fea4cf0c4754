#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "firzen/eval/evaluate.hpp"
#include "firzen/model/losses.hpp"
#include "firzen/train/config.hpp"

namespace firzen {

// Adam with per-parameter moment buffers and step counts.
class Adam {
public:
    explicit Adam(double lr, double b1 = 0.9, double b2 = 0.999, double eps = 1e-8)
        : lr_(lr), b1_(b1), b2_(b2), eps_(eps) {}

    void update(const std::string& name, Mat& param, const Mat& grad) {
        auto& s = state_[name];
        if (s.m.size() == 0) {
            s.m = Mat(param.rows(), param.cols());
            s.v = Mat(param.rows(), param.cols());
        }
        ++s.t;
        double c1 = 1.0 - std::pow(b1_, static_cast<double>(s.t));
        double c2 = 1.0 - std::pow(b2_, static_cast<double>(s.t));
        for (std::size_t i = 0; i < param.size(); ++i) {
            double g = grad.raw()[i];
            s.m.raw()[i] = b1_ * s.m.raw()[i] + (1.0 - b1_) * g;
            s.v.raw()[i] = b2_ * s.v.raw()[i] + (1.0 - b2_) * g * g;
            param.raw()[i] -= lr_ * (s.m.raw()[i] / c1) / (std::sqrt(s.v.raw()[i] / c2) + eps_);
        }
    }

    // moment blocks for exact checkpoint resume
    std::vector<std::pair<std::string, Mat>> export_blocks() const {
        std::vector<std::pair<std::string, Mat>> out;
        for (const auto& [name, s] : state_) {
            out.emplace_back("adam.m." + name, s.m);
            out.emplace_back("adam.v." + name, s.v);
            Mat t(1, 1, static_cast<double>(s.t));
            out.emplace_back("adam.t." + name, t);
        }
        return out;
    }

    void import_blocks(const std::vector<std::pair<std::string, Mat>>& blocks) {
        for (const auto& [name, m] : blocks) {
            if (name.rfind("adam.m.", 0) == 0) state_[name.substr(7)].m = m;
            else if (name.rfind("adam.v.", 0) == 0) state_[name.substr(7)].v = m;
            else if (name.rfind("adam.t.", 0) == 0)
                state_[name.substr(7)].t = static_cast<std::size_t>(m(0, 0));
        }
    }

private:
    struct Slot {
        Mat m, v;
        std::size_t t = 0;
    };
    double lr_, b1_, b2_, eps_;
    std::map<std::string, Slot> state_;
};

struct TrainBatch {
    std::vector<BprTriplet> bpr;
    std::vector<KgQuad> kg;
    std::vector<std::size_t> user_rows;  // sampled graph rows
    std::vector<std::size_t> item_cols;  // sampled graph columns
};

struct StepLosses {
    double kg = 0.0, bpr = 0.0, adv = 0.0, contr = 0.0, reg = 0.0, rec_total = 0.0, disc = 0.0;
    double d_text = 0.0, d_image = 0.0;  // mean discriminator scores on the modality graphs
};

struct EpochRecord {
    std::size_t epoch = 0;
    double kg_loss = 0.0, rec_loss = 0.0, disc_loss = 0.0;
    double val_recall = 0.0;
};

struct FitResult {
    ModelParams best_params;
    std::size_t best_epoch = 0;
    double best_metric = 0.0;
    std::vector<EpochRecord> history;
};

class Trainer {
public:
    Trainer(const FrozenGraphBundle& bundle, const GraphOps& ops, const TrainingConfig& cfg,
            ModelParams params, const std::vector<std::size_t>& warm_items)
        : bundle_(bundle),
          ops_(ops),
          cfg_(cfg),
          params_(std::move(params)),
          warm_items_(warm_items),
          rng_(cfg.seed),
          adam_(cfg.learning_rate) {
        cfg_.validate();
        if (cfg_.adv_items > warm_items_.size())
            throw std::invalid_argument("trainer: adv_items exceeds the warm item count");
        if (cfg_.adv_users > bundle_.user_count)
            throw std::invalid_argument("trainer: adv_users exceeds the user count");
        if (params_.disc_dim != cfg_.adv_items)
            throw std::invalid_argument("trainer: discriminator width disagrees with adv_items");

        user_items_.resize(bundle_.user_count);
        for (std::size_t u = 0; u < bundle_.user_count; ++u)
            for (std::size_t k = bundle_.inter_adj.row_begin(u); k < bundle_.inter_adj.row_end(u);
                 ++k)
                user_items_[u].insert(bundle_.inter_adj.col_at(k));
        for (std::size_t u = 0; u < bundle_.user_count; ++u)
            for (std::size_t i : user_items_[u]) train_edges_.push_back({u, i});

        const Ckg& ckg = bundle_.ckg;
        for (const auto& t : ckg.triples)
            if (t.relation != ckg.interact_relation) kg_triples_.push_back(t);
        for (std::size_t e = 0; e < ckg.n_entities(); ++e)
            if (!ckg.is_user(e)) tails_by_type_[ckg_entity_type(ckg, e)].push_back(e);
    }

    ModelParams& params() { return params_; }
    Rng& rng() { return rng_; }
    Adam& optimizer() { return adam_; }
    const std::vector<Interaction>& train_edges() const { return train_edges_; }

    // ---- sampling ----

    std::size_t sample_negative_item(std::size_t user) {
        const auto& seen = user_items_[user];
        for (int attempt = 0; attempt < 100; ++attempt) {
            std::size_t cand = warm_items_[rng_.uniform_index(warm_items_.size())];
            if (!seen.count(cand)) return cand;
        }
        for (std::size_t cand : warm_items_)
            if (!seen.count(cand)) return cand;
        return warm_items_[rng_.uniform_index(warm_items_.size())];  // user saw everything
    }

    KgQuad sample_kg_quad() {
        if (kg_triples_.empty()) throw std::runtime_error("trainer: knowledge graph has no triples");
        for (int attempt = 0; attempt < 200; ++attempt) {
            const Triple& t = kg_triples_[rng_.uniform_index(kg_triples_.size())];
            const auto& pool = tails_by_type_.at(ckg_entity_type(bundle_.ckg, t.tail));
            if (pool.size() < 2) continue;
            for (int inner = 0; inner < 100; ++inner) {
                std::size_t neg = pool[rng_.uniform_index(pool.size())];
                if (neg != t.tail) return {t.head, t.relation, t.tail, neg};
            }
        }
        throw std::runtime_error("trainer: cannot sample a corrupted tail");
    }

    TrainBatch sample_batch(const std::vector<Interaction>& shuffled, std::size_t offset,
                            std::size_t count) {
        TrainBatch b;
        for (std::size_t i = 0; i < count; ++i) {
            const auto& x = shuffled[offset + i];
            b.bpr.push_back({x.user, x.item, sample_negative_item(x.user)});
        }
        if (cfg_.enable_ka)
            for (std::size_t i = 0; i < count; ++i) b.kg.push_back(sample_kg_quad());
        if (adversarial_active()) {
            b.user_rows = rng_.sample_without_replacement(bundle_.user_count, cfg_.adv_users);
            auto idx = rng_.sample_without_replacement(warm_items_.size(), cfg_.adv_items);
            for (std::size_t j : idx) b.item_cols.push_back(warm_items_[j]);
        }
        return b;
    }

    bool adversarial_active() const { return cfg_.lambda_adv > 0.0; }

    // ---- the four sub-steps of one alternating iteration ----

    StepLosses train_step(const TrainBatch& batch) {
        StepLosses losses;
        if (cfg_.enable_ka && !batch.kg.empty()) losses.kg = kg_step(batch);
        rec_step(batch, losses);
        if (adversarial_active()) {
            losses.disc = disc_step();
            losses.d_text = last_d_text_;
            losses.d_image = last_d_image_;
            auto [bt, bi] = update_modality_importance(params_.beta_text, params_.beta_image,
                                                       losses.d_text, losses.d_image, cfg_.eta);
            params_.beta_text = bt;
            params_.beta_image = bi;
        }
        if (!params_.all_finite())
            throw std::runtime_error("trainer: parameters became non-finite; aborting");
        return losses;
    }

    FitResult fit(const SplitSpec& split) {
        FitResult fit_result;
        fit_result.best_params = params_;
        std::size_t since_best = 0;
        std::vector<Interaction> order = train_edges_;
        for (std::size_t epoch = 0; epoch < cfg_.epochs; ++epoch) {
            rng_.shuffle(order);
            EpochRecord rec;
            rec.epoch = epoch;
            std::size_t n_batches = 0;
            for (std::size_t off = 0; off < order.size(); off += cfg_.batch_size) {
                std::size_t count = std::min(cfg_.batch_size, order.size() - off);
                auto losses = train_step(sample_batch(order, off, count));
                rec.kg_loss += losses.kg;
                rec.rec_loss += losses.rec_total;
                rec.disc_loss += losses.disc;
                ++n_batches;
            }
            if (n_batches > 0) {
                rec.kg_loss /= static_cast<double>(n_batches);
                rec.rec_loss /= static_cast<double>(n_batches);
                rec.disc_loss /= static_cast<double>(n_batches);
            }

            auto inf = run_inference(bundle_, ops_, params_, cfg_);
            rec.val_recall = evaluate_warm(inf, split, split.warm_val, 20, "warm_val").recall;
            fit_result.history.push_back(rec);

            if (rec.val_recall > fit_result.best_metric || fit_result.history.size() == 1) {
                fit_result.best_metric = rec.val_recall;
                fit_result.best_epoch = epoch;
                fit_result.best_params = params_;
                since_best = 0;
            } else if (++since_best >= cfg_.patience) {
                break;
            }
        }
        return fit_result;
    }

private:
    double kg_step(const TrainBatch& batch) {
        ad::Tape tape;
        ParamVars pv = ParamVars::make(tape, params_, is_kg_param);
        ad::Var entities =
            tape.vcat({pv.at("item_table"), pv.at("user_table"), pv.at("external_table")});
        std::vector<ad::Var> rel_w;
        for (std::size_t r = 0; r < params_.relation_w.size(); ++r)
            rel_w.push_back(pv.at("relation_w." + std::to_string(r)));
        ad::Var loss = kg_triplet_loss(tape, entities, pv.at("relation_table"), rel_w, batch.kg);
        tape.backward(loss);
        apply_updates(tape, pv, is_kg_param);
        return tape.val(loss)(0, 0);
    }

    void rec_step(const TrainBatch& batch, StepLosses& losses) {
        ad::Tape tape;
        auto fr = model_forward(tape, ops_, bundle_, params_, cfg_, true, rng_, is_rec_param);
        ad::Var loss = bpr_loss(tape, fr.breve_user, fr.breve_item, batch.bpr);
        losses.bpr = tape.val(loss)(0, 0);

        if (adversarial_active()) {
            Mat inter_sample =
                interaction_submatrix(bundle_.inter_adj, batch.user_rows, batch.item_cols);
            adv_graph_values_.clear();
            ad::Var adv_total;
            for (std::size_t m = 0; m < bundle_.modalities.size(); ++m) {
                if (!modality_enabled(cfg_, bundle_.modalities[m])) continue;
                ad::Var g_mod = virtual_interaction_graph(tape, fr.modality[m].user,
                                                          fr.modality[m].item, batch.user_rows,
                                                          batch.item_cols);
                ad::Var g_aug = augment_objective_graph(tape, inter_sample, fr.breve_user,
                                                        fr.breve_item, batch.user_rows,
                                                        batch.item_cols, cfg_.tau, cfg_.gamma,
                                                        rng_);
                auto adv = adversarial_loss(tape, g_aug, g_mod, fr.pv.at("disc_w"),
                                            fr.pv.at("disc_b"), fr.pv.at("bn_gain"),
                                            fr.pv.at("bn_bias"), cfg_, true, params_.bn_mean,
                                            params_.bn_var, rng_);
                adv_total = adv_total.valid() ? tape.add(adv_total, adv.loss) : adv.loss;
                adv_graph_values_.push_back(
                    {bundle_.modalities[m], tape.val(g_aug), tape.val(g_mod)});
            }
            if (adv_total.valid()) {
                losses.adv = tape.val(adv_total)(0, 0);
                loss = tape.add(loss, tape.scale(adv_total, cfg_.lambda_adv));
            }
        }

        if (cfg_.lambda_contr > 0.0) {
            std::vector<ad::Var> views;
            for (std::size_t m = 0; m < bundle_.modalities.size(); ++m)
                if (modality_enabled(cfg_, bundle_.modalities[m]))
                    views.push_back(fr.modality[m].user);
            if (!views.empty()) {
                ad::Var contr =
                    contrastive_loss(tape, fr.breve_user, views, cfg_.contr_temperature);
                losses.contr = tape.val(contr)(0, 0);
                loss = tape.add(loss, tape.scale(contr, cfg_.lambda_contr));
            }
        }

        if (cfg_.lambda_reg > 0.0) {
            ad::Var reg = l2_penalty(tape, fr.pv, is_rec_param);
            losses.reg = tape.val(reg)(0, 0);
            loss = tape.add(loss, tape.scale(reg, cfg_.lambda_reg));
        }

        losses.rec_total = tape.val(loss)(0, 0);
        tape.backward(loss);
        apply_updates(tape, fr.pv, is_rec_param);
    }

    // Critic update on the graphs produced by the generator pass, which enter
    // as constants here: minimize -(E[D(aug)] - E[D(modality)]) + xi*penalty.
    double disc_step() {
        if (adv_graph_values_.empty()) return 0.0;
        ad::Tape tape;
        ParamVars pv = ParamVars::make(tape, params_, is_discriminator_param);
        ad::Var total;
        double bn_mean_acc = 0.0, bn_var_acc = 0.0;
        for (const auto& g : adv_graph_values_) {
            double bm = 0.0, bv = 0.0;
            auto adv = adversarial_loss(tape, tape.constant(g.aug), tape.constant(g.mod),
                                        pv.at("disc_w"), pv.at("disc_b"), pv.at("bn_gain"),
                                        pv.at("bn_bias"), cfg_, true, params_.bn_mean,
                                        params_.bn_var, rng_, &bm, &bv);
            ad::Var critic = tape.scale(adv.diff, -1.0);
            if (adv.penalty.valid())
                critic = tape.add(critic, tape.scale(adv.penalty, cfg_.xi));
            total = total.valid() ? tape.add(total, critic) : critic;
            bn_mean_acc += bm;
            bn_var_acc += bv;
            if (g.modality == Modality::Text) last_d_text_ = adv.mean_real;
            else last_d_image_ = adv.mean_real;
        }
        tape.backward(total);
        apply_updates(tape, pv, is_discriminator_param);

        constexpr double kBnMomentum = 0.1;
        double n = static_cast<double>(adv_graph_values_.size());
        params_.bn_mean = (1.0 - kBnMomentum) * params_.bn_mean + kBnMomentum * bn_mean_acc / n;
        params_.bn_var = (1.0 - kBnMomentum) * params_.bn_var + kBnMomentum * bn_var_acc / n;
        return tape.val(total)(0, 0);
    }

    void apply_updates(ad::Tape& tape, const ParamVars& pv,
                       const std::function<bool(const std::string&)>& subset) {
        params_.for_each_param([&](const std::string& name, Mat& m) {
            if (!subset(name)) return;
            ad::Var v = pv.at(name);
            if (!tape.requires_grad(v)) return;
            adam_.update(name, m, tape.grad(v));
        });
    }

    const FrozenGraphBundle& bundle_;
    const GraphOps& ops_;
    TrainingConfig cfg_;
    ModelParams params_;
    std::vector<std::size_t> warm_items_;
    Rng rng_;
    Adam adam_;

    std::vector<Interaction> train_edges_;
    std::vector<std::set<std::size_t>> user_items_;
    std::vector<Triple> kg_triples_;
    std::map<EntityType, std::vector<std::size_t>> tails_by_type_;

    struct GraphPair {
        Modality modality;
        Mat aug, mod;
    };
    std::vector<GraphPair> adv_graph_values_;
    double last_d_text_ = 0.0, last_d_image_ = 0.0;

public:
    double last_d_text() const { return last_d_text_; }
    double last_d_image() const { return last_d_image_; }
};

}  // namespace firzen

#pragma once

#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "firzen/core/binio.hpp"
#include "firzen/core/matrix.hpp"
#include "firzen/core/rng.hpp"
#include "firzen/train/config.hpp"

namespace firzen {

// Every learnable tensor of the model, plus the non-gradient state that rides
// along (modality importances, batch-norm running statistics).
struct ModelParams {
    std::size_t d = 0, d_know = 0;
    std::size_t n_users = 0, n_items = 0, n_external = 0, n_relations = 0;
    std::size_t text_dim = 0, image_dim = 0;
    std::size_t disc_dim = 0;  // discriminator input width (sampled item columns)

    Mat user_table;       // n_users x d
    Mat item_table;       // n_items x d
    Mat external_table;   // n_external x d (non-user, non-item CKG entities)
    Mat relation_table;   // n_relations x d_know
    std::vector<Mat> relation_w;  // per relation, d x d_know
    Mat agg_w1, agg_w2;   // d x d_know, knowledge aggregation
    Mat know2id;          // d_know x d; empty when d_know == d (identity)
    Mat text_proj_w, text_proj_b;    // text_dim x d, 1 x d
    Mat image_proj_w, image_proj_b;  // image_dim x d, 1 x d
    Mat attn_q, attn_k;   // d x d, column-sliced per head
    Mat disc_w, disc_b;   // disc_dim x 1, 1 x 1
    Mat bn_gain, bn_bias; // 1 x 1 each

    double beta_text = 0.5, beta_image = 0.5;  // modality importances (state)
    double bn_mean = 0.0, bn_var = 1.0;        // running statistics (state)

    static ModelParams init(std::size_t n_users, std::size_t n_items, std::size_t n_external,
                            std::size_t n_relations, std::size_t text_dim, std::size_t image_dim,
                            const TrainingConfig& cfg, Rng& rng) {
        cfg.validate();
        ModelParams p;
        p.d = cfg.d;
        p.d_know = cfg.d_know;
        p.n_users = n_users;
        p.n_items = n_items;
        p.n_external = n_external;
        p.n_relations = n_relations;
        p.text_dim = text_dim;
        p.image_dim = image_dim;
        p.disc_dim = cfg.adv_items;

        p.user_table = rng.xavier_uniform(n_users, cfg.d);
        p.item_table = rng.xavier_uniform(n_items, cfg.d);
        p.external_table = rng.xavier_uniform(n_external, cfg.d);
        p.relation_table = rng.xavier_uniform(n_relations, cfg.d_know);
        for (std::size_t r = 0; r < n_relations; ++r)
            p.relation_w.push_back(rng.xavier_uniform(cfg.d, cfg.d_know));
        p.agg_w1 = rng.xavier_uniform(cfg.d, cfg.d_know);
        p.agg_w2 = rng.xavier_uniform(cfg.d, cfg.d_know);
        if (cfg.d_know != cfg.d) p.know2id = rng.xavier_uniform(cfg.d_know, cfg.d);
        p.text_proj_w = rng.xavier_uniform(text_dim, cfg.d);
        p.text_proj_b = Mat(1, cfg.d);
        p.image_proj_w = rng.xavier_uniform(image_dim, cfg.d);
        p.image_proj_b = Mat(1, cfg.d);
        p.attn_q = rng.xavier_uniform(cfg.d, cfg.d);
        p.attn_k = rng.xavier_uniform(cfg.d, cfg.d);
        p.disc_w = rng.xavier_uniform(cfg.adv_items, 1);
        p.disc_b = Mat(1, 1);
        p.bn_gain = Mat(1, 1, 1.0);
        p.bn_bias = Mat(1, 1);
        p.beta_text = cfg.beta_text_init;
        p.beta_image = cfg.beta_image_init;
        return p;
    }

    // Visit every learnable tensor with a stable name, in a fixed order.
    template <typename F>
    void for_each_param(F&& f) {
        f("user_table", user_table);
        f("item_table", item_table);
        f("external_table", external_table);
        f("relation_table", relation_table);
        for (std::size_t r = 0; r < relation_w.size(); ++r)
            f("relation_w." + std::to_string(r), relation_w[r]);
        f("agg_w1", agg_w1);
        f("agg_w2", agg_w2);
        if (know2id.size() > 0) f("know2id", know2id);
        f("text_proj_w", text_proj_w);
        f("text_proj_b", text_proj_b);
        f("image_proj_w", image_proj_w);
        f("image_proj_b", image_proj_b);
        f("attn_q", attn_q);
        f("attn_k", attn_k);
        f("disc_w", disc_w);
        f("disc_b", disc_b);
        f("bn_gain", bn_gain);
        f("bn_bias", bn_bias);
    }

    bool all_finite() {
        bool ok = true;
        for_each_param([&](const std::string&, const Mat& m) { ok = ok && m.all_finite(); });
        return ok && std::isfinite(beta_text) && std::isfinite(beta_image) &&
               std::isfinite(bn_mean) && std::isfinite(bn_var);
    }
};

// ---- checkpoint container ----

struct Checkpoint {
    TrainingConfig config;
    ModelParams params;
    std::string rng_state;
    std::uint64_t epoch = 0;
    double best_metric = 0.0;
    // optimizer state and anything else the trainer wants to resume exactly
    std::vector<std::pair<std::string, Mat>> extra_blocks;
};

inline constexpr char kCheckpointMagic[] = "firzen-checkpoint v1\n";

namespace detail {

inline void write_mat_block(std::ostream& os, const std::string& name, const Mat& m) {
    binio::write_string(os, name);
    binio::write_u64(os, m.rows());
    binio::write_u64(os, m.cols());
    binio::write_f64_vec(os, m.raw());
}

inline std::pair<std::string, Mat> read_mat_block(std::istream& is) {
    std::string name = binio::read_string(is);
    std::size_t rows = static_cast<std::size_t>(binio::read_u64(is));
    std::size_t cols = static_cast<std::size_t>(binio::read_u64(is));
    auto data = binio::read_f64_vec(is);
    if (data.size() != rows * cols) throw std::runtime_error("checkpoint: bad block " + name);
    Mat m(rows, cols);
    m.raw() = std::move(data);
    return {std::move(name), std::move(m)};
}

}  // namespace detail

inline void save_checkpoint(const Checkpoint& ck, std::ostream& os) {
    os.write(kCheckpointMagic, sizeof(kCheckpointMagic) - 1);
    {
        std::ostringstream cfg;
        save_training_config(ck.config, cfg);
        binio::write_string(os, cfg.str());
    }
    const ModelParams& p = ck.params;
    for (std::size_t v :
         {p.d, p.d_know, p.n_users, p.n_items, p.n_external, p.n_relations, p.text_dim,
          p.image_dim, p.disc_dim})
        binio::write_u64(os, v);
    std::size_t n_blocks = 0;
    const_cast<ModelParams&>(p).for_each_param([&](const std::string&, const Mat&) { ++n_blocks; });
    binio::write_u64(os, n_blocks);
    const_cast<ModelParams&>(p).for_each_param(
        [&](const std::string& name, const Mat& m) { detail::write_mat_block(os, name, m); });
    binio::write_f64(os, p.beta_text);
    binio::write_f64(os, p.beta_image);
    binio::write_f64(os, p.bn_mean);
    binio::write_f64(os, p.bn_var);
    binio::write_string(os, ck.rng_state);
    binio::write_u64(os, ck.epoch);
    binio::write_f64(os, ck.best_metric);
    binio::write_u64(os, ck.extra_blocks.size());
    for (const auto& [name, m] : ck.extra_blocks) detail::write_mat_block(os, name, m);
    if (!os) throw std::runtime_error("checkpoint: write failed");
}

inline Checkpoint load_checkpoint(std::istream& is) {
    binio::expect_magic(is, std::string(kCheckpointMagic, sizeof(kCheckpointMagic) - 1),
                        "checkpoint");
    Checkpoint ck;
    {
        std::istringstream cfg(binio::read_string(is));
        ck.config = parse_training_config(cfg, "checkpoint config");
    }
    ModelParams& p = ck.params;
    p.d = static_cast<std::size_t>(binio::read_u64(is));
    p.d_know = static_cast<std::size_t>(binio::read_u64(is));
    p.n_users = static_cast<std::size_t>(binio::read_u64(is));
    p.n_items = static_cast<std::size_t>(binio::read_u64(is));
    p.n_external = static_cast<std::size_t>(binio::read_u64(is));
    p.n_relations = static_cast<std::size_t>(binio::read_u64(is));
    p.text_dim = static_cast<std::size_t>(binio::read_u64(is));
    p.image_dim = static_cast<std::size_t>(binio::read_u64(is));
    p.disc_dim = static_cast<std::size_t>(binio::read_u64(is));

    std::size_t n_blocks = static_cast<std::size_t>(binio::read_u64(is));
    p.relation_w.resize(p.n_relations);
    std::size_t seen = 0;
    for (std::size_t b = 0; b < n_blocks; ++b) {
        auto [name, m] = detail::read_mat_block(is);
        bool placed = false;
        p.for_each_param([&](const std::string& pname, Mat& dst) {
            if (pname == name) {
                dst = m;
                placed = true;
            }
        });
        // relation_w / know2id names may not be visitable until allocated
        if (!placed) {
            if (name.rfind("relation_w.", 0) == 0) {
                std::size_t r = std::stoul(name.substr(11));
                if (r >= p.relation_w.size()) throw std::runtime_error("checkpoint: bad relation block");
                p.relation_w[r] = std::move(m);
                placed = true;
            } else if (name == "know2id") {
                p.know2id = std::move(m);
                placed = true;
            }
        }
        if (!placed) throw std::runtime_error("checkpoint: unknown block " + name);
        ++seen;
    }
    if (seen != n_blocks) throw std::runtime_error("checkpoint: missing blocks");
    p.beta_text = binio::read_f64(is);
    p.beta_image = binio::read_f64(is);
    p.bn_mean = binio::read_f64(is);
    p.bn_var = binio::read_f64(is);
    ck.rng_state = binio::read_string(is);
    ck.epoch = binio::read_u64(is);
    ck.best_metric = binio::read_f64(is);
    std::size_t n_extra = static_cast<std::size_t>(binio::read_u64(is));
    for (std::size_t b = 0; b < n_extra; ++b) ck.extra_blocks.push_back(detail::read_mat_block(is));
    return ck;
}

}  // namespace firzen

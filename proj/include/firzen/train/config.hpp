#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

namespace firzen {

// All model and optimization hyperparameters. Keys in config files are named
// after the symbols they stand for (lambda_k, eta, K_item, ...).
struct TrainingConfig {
    std::size_t d = 64;        // id embedding dimension
    std::size_t d_know = 64;   // knowledge/relation space dimension
    std::size_t L = 2;         // behavior propagation layers
    std::size_t L_ii = 1;      // item-item propagation layers
    std::size_t L_uu = 1;      // user-user propagation layers
    std::size_t H = 2;         // self-attention heads (must divide d)
    std::size_t K_item = 10;   // item-item kNN neighbors
    std::size_t K_user = 10;   // user-user top-K neighbors

    double lambda_k = 0.36;    // knowledge branch fusion weight
    double lambda_m = 1.10;    // modality branch fusion weight
    double lambda_adv = 0.1;   // adversarial loss weight
    double lambda_contr = 0.01;  // contrastive loss weight
    double lambda_reg = 1e-4;  // L2 regularization weight
    double eta = 0.999;        // modality-importance momentum
    double tau = 0.2;          // Gumbel-softmax temperature
    double gamma = 0.1;        // auxiliary-signal weight in graph augmentation
    double xi = 10.0;          // gradient-penalty weight
    double contr_temperature = 1.0;  // InfoNCE temperature (1 = plain cosine)

    double learning_rate = 1e-3;
    std::size_t batch_size = 2048;
    std::size_t epochs = 300;
    std::size_t patience = 20;
    std::uint64_t seed = 2026;

    double leaky_slope = 0.01;
    double dropout = 0.1;
    double beta_text_init = 0.5;
    double beta_image_init = 0.5;

    std::size_t adv_users = 64;  // sampled graph rows per discriminator step
    std::size_t adv_items = 64;  // sampled graph columns (= discriminator input dim)

    bool symmetric_behavior_norm = false;  // 1/sqrt(|N_u||N_i|) instead of 1/sqrt(|N_u|)
    bool pool_divide_l_plus_1 = false;     // layer pooling mean over L+1 instead of /L

    // ablation switches
    bool enable_ba = true;        // behavior branch
    bool enable_ka = true;        // knowledge branch
    bool enable_ma_text = true;   // text modality branch
    bool enable_ma_image = true;  // image modality branch
    bool enable_ms = true;        // modality-specific refinement stage

    void validate() const {
        if (d == 0 || d_know == 0) throw std::invalid_argument("config: d and d_know must be positive");
        if (H == 0 || d % H != 0) throw std::invalid_argument("config: H must divide d");
        if (K_item == 0 || K_user == 0) throw std::invalid_argument("config: K must be >= 1");
        if (tau <= 0.0) throw std::invalid_argument("config: tau must be positive");
        if (learning_rate <= 0.0) throw std::invalid_argument("config: learning_rate must be positive");
        if (eta < 0.0 || eta > 1.0) throw std::invalid_argument("config: eta must be in [0,1]");
        if (lambda_k < 0 || lambda_m < 0 || lambda_adv < 0 || lambda_contr < 0 || lambda_reg < 0 ||
            gamma < 0 || xi < 0)
            throw std::invalid_argument("config: loss weights must be nonnegative");
        if (batch_size == 0 || epochs == 0) throw std::invalid_argument("config: batch_size and epochs must be positive");
        if (dropout < 0.0 || dropout >= 1.0) throw std::invalid_argument("config: dropout must be in [0,1)");
        if (adv_users == 0 || adv_items == 0) throw std::invalid_argument("config: adv sample sizes must be positive");
        if (contr_temperature <= 0.0) throw std::invalid_argument("config: contr_temperature must be positive");
    }
};

// Experiment-level configuration: paths, split parameters, ablations, noise.
struct ExperimentConfig {
    std::string interactions_path;
    std::string kg_path;
    std::string text_features_path;
    std::string image_features_path;
    std::string output_dir = ".";

    std::size_t k_core = 0;  // 0 disables the iterative user-degree filter

    double cold_fraction = 0.2;
    double train_ratio = 0.8;
    double val_ratio = 0.1;
    double test_ratio = 0.1;

    // synthetic-generation keys (used by the dataset synthesis command)
    std::size_t synth_users = 100;
    std::size_t synth_items = 50;
    std::size_t synth_clusters = 5;
    std::size_t synth_interactions_per_user = 10;
    std::size_t synth_min_degree = 5;
    std::size_t synth_text_dim = 16;
    std::size_t synth_image_dim = 24;
    double synth_affinity = 0.85;
    double synth_feature_noise = 0.25;

    std::string noise_mode;      // empty, "outlier", "duplicate", "discrepancy"
    double noise_fraction = 0.0;

    std::vector<std::size_t> eval_k = {10, 20};

    TrainingConfig train;
};

namespace detail {

inline std::string trim_ws(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace detail

// Line-oriented `key = value` text; '#' starts a comment; blank lines and
// [section] headers ignored.
inline std::map<std::string, std::string> parse_config_lines(std::istream& is,
                                                             const std::string& name = "config") {
    std::map<std::string, std::string> kv;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        std::string t = detail::trim_ws(line);
        if (t.empty() || (t.front() == '[' && t.back() == ']')) continue;
        std::size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error(name + ":" + std::to_string(lineno) + ": expected key = value");
        std::string key = detail::trim_ws(t.substr(0, eq));
        std::string val = detail::trim_ws(t.substr(eq + 1));
        if (key.empty()) throw std::runtime_error(name + ":" + std::to_string(lineno) + ": empty key");
        if (!kv.emplace(key, val).second)
            throw std::runtime_error(name + ":" + std::to_string(lineno) + ": duplicate key " + key);
    }
    return kv;
}

namespace detail {

struct ConfigReader {
    std::map<std::string, std::string> kv;
    std::string name;

    bool take(const std::string& key, std::string& out) {
        auto it = kv.find(key);
        if (it == kv.end()) return false;
        out = it->second;
        kv.erase(it);
        return true;
    }

    template <typename T, typename Parse>
    void field(const std::string& key, T& dst, Parse parse) {
        std::string raw;
        if (!take(key, raw)) return;
        try {
            dst = parse(raw);
        } catch (const std::exception&) {
            throw std::runtime_error(name + ": bad value for " + key + ": " + raw);
        }
    }

    void num(const std::string& key, double& dst) {
        field(key, dst, [](const std::string& s) {
            std::size_t pos = 0;
            double v = std::stod(s, &pos);
            if (pos != s.size()) throw std::invalid_argument("trailing");
            return v;
        });
    }
    template <typename T, typename = std::enable_if_t<std::is_integral_v<T>>>
    void num(const std::string& key, T& dst) {
        field(key, dst, [](const std::string& s) {
            std::size_t pos = 0;
            unsigned long long v = std::stoull(s, &pos);
            if (pos != s.size()) throw std::invalid_argument("bad");
            return static_cast<T>(v);
        });
    }
    void boolean(const std::string& key, bool& dst) {
        field(key, dst, [](const std::string& s) {
            if (s == "true" || s == "1") return true;
            if (s == "false" || s == "0") return false;
            throw std::invalid_argument("bad bool");
        });
    }
    void str(const std::string& key, std::string& dst) {
        field(key, dst, [](const std::string& s) { return s; });
    }
};

inline void apply_training_keys(ConfigReader& r, TrainingConfig& c) {
    r.num("d", c.d);
    r.num("d_know", c.d_know);
    r.num("L", c.L);
    r.num("L_ii", c.L_ii);
    r.num("L_uu", c.L_uu);
    r.num("H", c.H);
    r.num("K_item", c.K_item);
    r.num("K_user", c.K_user);
    r.num("lambda_k", c.lambda_k);
    r.num("lambda_m", c.lambda_m);
    r.num("lambda_adv", c.lambda_adv);
    r.num("lambda_contr", c.lambda_contr);
    r.num("lambda_reg", c.lambda_reg);
    r.num("eta", c.eta);
    r.num("tau", c.tau);
    r.num("gamma", c.gamma);
    r.num("xi", c.xi);
    r.num("contr_temperature", c.contr_temperature);
    r.num("learning_rate", c.learning_rate);
    r.num("batch_size", c.batch_size);
    r.num("epochs", c.epochs);
    r.num("patience", c.patience);
    r.num("seed", c.seed);
    r.num("leaky_slope", c.leaky_slope);
    r.num("dropout", c.dropout);
    r.num("beta_text_init", c.beta_text_init);
    r.num("beta_image_init", c.beta_image_init);
    r.num("adv_users", c.adv_users);
    r.num("adv_items", c.adv_items);
    r.boolean("symmetric_behavior_norm", c.symmetric_behavior_norm);
    r.boolean("pool_divide_l_plus_1", c.pool_divide_l_plus_1);
    r.boolean("enable_ba", c.enable_ba);
    r.boolean("enable_ka", c.enable_ka);
    r.boolean("enable_ma_text", c.enable_ma_text);
    r.boolean("enable_ma_image", c.enable_ma_image);
    r.boolean("enable_ms", c.enable_ms);
}

}  // namespace detail

inline TrainingConfig parse_training_config(std::istream& is, const std::string& name = "config") {
    detail::ConfigReader r{parse_config_lines(is, name), name};
    TrainingConfig c;
    detail::apply_training_keys(r, c);
    if (!r.kv.empty())
        throw std::runtime_error(name + ": unknown key " + r.kv.begin()->first);
    c.validate();
    return c;
}

inline ExperimentConfig parse_experiment_config(std::istream& is,
                                                const std::string& name = "config") {
    detail::ConfigReader r{parse_config_lines(is, name), name};
    ExperimentConfig c;
    r.str("interactions", c.interactions_path);
    r.str("kg", c.kg_path);
    r.str("text_features", c.text_features_path);
    r.str("image_features", c.image_features_path);
    r.str("output_dir", c.output_dir);
    r.num("k_core", c.k_core);
    r.num("cold_fraction", c.cold_fraction);
    r.num("synth_users", c.synth_users);
    r.num("synth_items", c.synth_items);
    r.num("synth_clusters", c.synth_clusters);
    r.num("synth_interactions_per_user", c.synth_interactions_per_user);
    r.num("synth_min_degree", c.synth_min_degree);
    r.num("synth_text_dim", c.synth_text_dim);
    r.num("synth_image_dim", c.synth_image_dim);
    r.num("synth_affinity", c.synth_affinity);
    r.num("synth_feature_noise", c.synth_feature_noise);
    r.num("train_ratio", c.train_ratio);
    r.num("val_ratio", c.val_ratio);
    r.num("test_ratio", c.test_ratio);
    r.str("noise_mode", c.noise_mode);
    r.num("noise_fraction", c.noise_fraction);
    {
        std::string ks;
        if (r.take("eval_k", ks)) {
            c.eval_k.clear();
            std::istringstream ss(ks);
            std::string tok;
            while (std::getline(ss, tok, ',')) {
                tok = detail::trim_ws(tok);
                if (!tok.empty()) c.eval_k.push_back(std::stoul(tok));
            }
            if (c.eval_k.empty()) throw std::runtime_error(name + ": eval_k must list at least one K");
        }
    }
    detail::apply_training_keys(r, c.train);
    if (!r.kv.empty())
        throw std::runtime_error(name + ": unknown key " + r.kv.begin()->first);
    c.train.validate();
    return c;
}

inline void save_training_config(const TrainingConfig& c, std::ostream& os) {
    auto put = [&](const char* k, auto v) { os << k << " = " << v << "\n"; };
    os.precision(17);
    put("d", c.d);
    put("d_know", c.d_know);
    put("L", c.L);
    put("L_ii", c.L_ii);
    put("L_uu", c.L_uu);
    put("H", c.H);
    put("K_item", c.K_item);
    put("K_user", c.K_user);
    put("lambda_k", c.lambda_k);
    put("lambda_m", c.lambda_m);
    put("lambda_adv", c.lambda_adv);
    put("lambda_contr", c.lambda_contr);
    put("lambda_reg", c.lambda_reg);
    put("eta", c.eta);
    put("tau", c.tau);
    put("gamma", c.gamma);
    put("xi", c.xi);
    put("contr_temperature", c.contr_temperature);
    put("learning_rate", c.learning_rate);
    put("batch_size", c.batch_size);
    put("epochs", c.epochs);
    put("patience", c.patience);
    put("seed", c.seed);
    put("leaky_slope", c.leaky_slope);
    put("dropout", c.dropout);
    put("beta_text_init", c.beta_text_init);
    put("beta_image_init", c.beta_image_init);
    put("adv_users", c.adv_users);
    put("adv_items", c.adv_items);
    put("symmetric_behavior_norm", c.symmetric_behavior_norm ? "true" : "false");
    put("pool_divide_l_plus_1", c.pool_divide_l_plus_1 ? "true" : "false");
    put("enable_ba", c.enable_ba ? "true" : "false");
    put("enable_ka", c.enable_ka ? "true" : "false");
    put("enable_ma_text", c.enable_ma_text ? "true" : "false");
    put("enable_ma_image", c.enable_ma_image ? "true" : "false");
    put("enable_ms", c.enable_ms ? "true" : "false");
}

}  // namespace firzen

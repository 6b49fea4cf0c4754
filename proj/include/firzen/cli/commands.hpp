#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "firzen/data/synthetic.hpp"
#include "firzen/eval/evaluate.hpp"
#include "firzen/train/trainer.hpp"

namespace firzen::cli {

inline constexpr char kOutputRootEnv[] = "FIRZEN_OUTPUT_ROOT";

// Output directory, optionally re-rooted by the environment.
inline std::string resolve_output_dir(const ExperimentConfig& cfg) {
    const char* root = std::getenv(kOutputRootEnv);
    if (root && *root) return (std::filesystem::path(root) / cfg.output_dir).string();
    return cfg.output_dir;
}

// Comma-separated branch names whose fusion terms get removed.
inline void apply_ablations(TrainingConfig& cfg, const std::string& csv) {
    std::istringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        if (tok == "ba") cfg.enable_ba = false;
        else if (tok == "ka") cfg.enable_ka = false;
        else if (tok == "ma_text") cfg.enable_ma_text = false;
        else if (tok == "ma_image") cfg.enable_ma_image = false;
        else if (tok == "ms") cfg.enable_ms = false;
        else throw std::runtime_error("unknown ablation '" + tok + "'");
    }
    if (!cfg.enable_ba && !cfg.enable_ka && !cfg.enable_ma_text && !cfg.enable_ma_image)
        throw std::runtime_error("ablation removes every representation branch");
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config " + path);
    return parse_experiment_config(in, path);
}

struct Dataset {
    InteractionDataset interactions;
    KnowledgeGraph kg;
    FeatureMatrix text, image;
};

inline Dataset load_dataset(const ExperimentConfig& cfg) {
    Dataset d;
    d.interactions = load_interactions_file(cfg.interactions_path);
    if (cfg.k_core > 0) d.interactions = k_core_filter(d.interactions, cfg.k_core);
    {
        std::ifstream in(cfg.kg_path);
        if (!in) throw std::runtime_error("cannot open " + cfg.kg_path);
        d.kg = load_kg(in, d.interactions.item_count, cfg.kg_path);
    }
    d.text = load_features_file(cfg.text_features_path, Modality::Text,
                                d.interactions.item_count);
    d.image = load_features_file(cfg.image_features_path, Modality::Image,
                                 d.interactions.item_count);
    return d;
}

// ---- synth ----

// On-disk contract: feature row r and the knowledge-graph literal "item:r"
// both refer to the r-th distinct item of the interactions file, in first-
// appearance order (which is how the interaction loader assigns indices).
// The generator indexes items its own way, so reorder its outputs to match
// and drop items that never occur in an interaction.
struct SynthReindex {
    std::vector<std::size_t> kept;  // new index -> generator index
};

inline SynthReindex synth_loader_order(const InteractionDataset& ds) {
    SynthReindex rx;
    std::vector<bool> seen(ds.item_count, false);
    for (const auto& x : ds.interactions)
        if (!seen[x.item]) {
            seen[x.item] = true;
            rx.kept.push_back(x.item);
        }
    return rx;
}

inline void cmd_synth(const ExperimentConfig& cfg, std::ostream& log) {
    SyntheticSpec spec;
    spec.user_count = cfg.synth_users;
    spec.item_count = cfg.synth_items;
    spec.cluster_count = cfg.synth_clusters;
    spec.interactions_per_user = cfg.synth_interactions_per_user;
    spec.min_user_degree = cfg.synth_min_degree;
    spec.text_dim = cfg.synth_text_dim;
    spec.image_dim = cfg.synth_image_dim;
    spec.cluster_affinity = cfg.synth_affinity;
    spec.feature_noise = cfg.synth_feature_noise;
    spec.seed = cfg.train.seed;
    SyntheticData data = generate_synthetic(spec);
    SynthReindex rx = synth_loader_order(data.interactions);
    std::size_t n_kept = rx.kept.size();

    auto permute_features = [&](const FeatureMatrix& fm) {
        FeatureMatrix out;
        out.modality = fm.modality;
        out.values = Mat(n_kept, fm.values.cols());
        for (std::size_t r = 0; r < n_kept; ++r)
            for (std::size_t c = 0; c < fm.values.cols(); ++c)
                out.values(r, c) = fm.values(rx.kept[r], c);
        return out;
    };
    KnowledgeGraph kg;
    kg.item_alignment.resize(n_kept);
    for (std::size_t r = 0; r < n_kept; ++r)
        kg.item_alignment[r] = kg.add_entity("item:" + std::to_string(r), EntityType::Item);
    for (std::size_t rel = 0; rel < data.kg.relations.size(); ++rel)
        kg.relations.intern(data.kg.relations.raw_of(rel));
    for (std::size_t r = 0; r < n_kept; ++r) {
        std::size_t old_ent = data.kg.item_alignment[rx.kept[r]];
        for (const auto& t : data.kg.triples) {
            if (t.head != old_ent) continue;
            std::size_t tail = kg.add_entity(data.kg.entities.raw_of(t.tail),
                                             data.kg.entity_types[t.tail]);
            kg.triples.push_back({kg.item_alignment[r], t.relation, tail});
        }
    }
    std::sort(kg.triples.begin(), kg.triples.end());

    std::filesystem::path out(resolve_output_dir(cfg));
    std::filesystem::create_directories(out);
    {
        std::ofstream os(out / "interactions.tsv");
        save_interactions(data.interactions, os);
    }
    {
        std::ofstream os(out / "kg.tsv");
        save_kg(kg, os);
    }
    save_features_file(permute_features(data.text), (out / "text.bin").string());
    save_features_file(permute_features(data.image), (out / "image.bin").string());
    {
        std::ofstream os(out / "clusters.tsv");
        for (std::size_t r = 0; r < n_kept; ++r)
            os << data.interactions.item_vocab.raw_of(rx.kept[r]) << '\t'
               << data.item_cluster[rx.kept[r]] << '\n';
    }
    log << "synth users " << spec.user_count << " items " << n_kept << " interactions "
        << data.interactions.interactions.size() << " triples " << kg.triples.size() << "\n";
}

// ---- inject-noise ----

inline void cmd_inject_noise(const ExperimentConfig& cfg, std::ostream& log) {
    if (cfg.noise_mode.empty()) throw std::runtime_error("inject-noise: noise_mode not set");
    InteractionDataset ds = load_interactions_file(cfg.interactions_path);
    std::ifstream in(cfg.kg_path);
    if (!in) throw std::runtime_error("cannot open " + cfg.kg_path);
    KnowledgeGraph kg = load_kg(in, ds.item_count, cfg.kg_path);
    KnowledgeGraph noisy = inject_kg_noise(kg, parse_noise_mode(cfg.noise_mode),
                                           cfg.noise_fraction, cfg.train.seed);
    std::filesystem::path out(resolve_output_dir(cfg));
    std::filesystem::create_directories(out);
    std::ofstream os(out / "kg.noisy.tsv");
    save_kg(noisy, os);
    log << "noise " << cfg.noise_mode << " " << cfg.noise_fraction << " triples "
        << kg.triples.size() << " -> " << noisy.triples.size() << "\n";
}

// ---- build ----

inline void cmd_build(const ExperimentConfig& cfg, std::ostream& log) {
    Dataset d = load_dataset(cfg);
    if (!cfg.noise_mode.empty())
        d.kg = inject_kg_noise(d.kg, parse_noise_mode(cfg.noise_mode), cfg.noise_fraction,
                               cfg.train.seed);

    SplitSpec split = build_strict_cold_splits(d.interactions, cfg.cold_fraction, cfg.train_ratio,
                                               cfg.val_ratio, cfg.test_ratio, cfg.train.seed);
    split = build_normal_cold_splits(d.interactions, split, cfg.train.seed);

    FrozenGraphBundle bundle = build_frozen_bundle(
        split.train, d.interactions.user_count, d.interactions.item_count, {&d.text, &d.image},
        d.kg, split.cold_mask(d.interactions.item_count), cfg.train.K_item, cfg.train.K_user,
        false);

    std::filesystem::path out(resolve_output_dir(cfg));
    std::filesystem::create_directories(out);
    {
        std::ofstream os(out / "split.manifest");
        save_split_manifest(split, os);
    }
    {
        std::ofstream os(out / "kg.used.tsv");
        save_kg(d.kg, os);
    }
    {
        std::ofstream os(out / "bundle.bin", std::ios::binary);
        save_bundle(bundle, os);
    }

    double denom = double(d.interactions.user_count) * double(d.interactions.item_count);
    double sparsity = denom > 0 ? 100.0 * (1.0 - double(d.interactions.interactions.size()) / denom)
                                : 0.0;
    log.precision(6);
    log << "users " << d.interactions.user_count << "\n"
        << "items " << d.interactions.item_count << "\n"
        << "warm_items " << split.warm_items.size() << "\n"
        << "cold_items " << split.cold_items.size() << "\n"
        << "interactions " << d.interactions.interactions.size() << "\n"
        << "sparsity " << sparsity << "%\n"
        << "entities " << d.kg.entities.size() << "\n"
        << "relations " << d.kg.relations.size() << "\n"
        << "triplets " << d.kg.triples.size() << "\n";
}

// ---- shared loading of built artifacts ----

struct BuiltArtifacts {
    Dataset data;
    SplitSpec split;
    FrozenGraphBundle bundle;  // training bundle from disk
};

inline BuiltArtifacts load_built(const ExperimentConfig& cfg) {
    BuiltArtifacts a;
    a.data.interactions = load_interactions_file(cfg.interactions_path);
    if (cfg.k_core > 0) a.data.interactions = k_core_filter(a.data.interactions, cfg.k_core);
    std::filesystem::path out(resolve_output_dir(cfg));
    {
        std::ifstream in(out / "split.manifest");
        if (!in) throw std::runtime_error("missing split manifest; run build first");
        a.split = load_split_manifest(in);
    }
    {
        std::ifstream in(out / "kg.used.tsv");
        if (!in) throw std::runtime_error("missing built knowledge graph; run build first");
        a.data.kg = load_kg(in, a.data.interactions.item_count, "kg.used.tsv");
    }
    a.data.text = load_features_file(cfg.text_features_path, Modality::Text,
                                     a.data.interactions.item_count);
    a.data.image = load_features_file(cfg.image_features_path, Modality::Image,
                                      a.data.interactions.item_count);
    {
        std::ifstream in(out / "bundle.bin", std::ios::binary);
        if (!in) throw std::runtime_error("missing graph bundle; run build first");
        a.bundle = load_bundle(in);
    }
    if (a.bundle.user_count != a.data.interactions.user_count ||
        a.bundle.item_count != a.data.interactions.item_count)
        throw std::runtime_error("graph bundle does not match the interaction data");
    if (a.bundle.k_item != cfg.train.K_item || a.bundle.k_user != cfg.train.K_user)
        throw std::runtime_error("graph bundle was built with different K settings");
    return a;
}

// ---- train ----

inline FitResult cmd_train(const ExperimentConfig& cfg, std::ostream& log) {
    BuiltArtifacts a = load_built(cfg);
    GraphOps ops = GraphOps::build(a.bundle, a.data.text.values, a.data.image.values, cfg.train);
    Rng rng(cfg.train.seed);
    ModelParams params = ModelParams::init(
        a.bundle.user_count, a.bundle.item_count, a.bundle.ckg.n_external,
        a.bundle.ckg.n_relations, a.data.text.values.cols(), a.data.image.values.cols(), cfg.train,
        rng);
    Trainer trainer(a.bundle, ops, cfg.train, std::move(params), a.split.warm_items);
    FitResult fit = trainer.fit(a.split);

    std::filesystem::path out(resolve_output_dir(cfg));
    {
        std::ofstream os(out / "train_log.tsv");
        os.precision(17);
        os << "epoch\tkg_loss\trec_loss\tdisc_loss\tval_recall20\n";
        for (const auto& e : fit.history)
            os << e.epoch << '\t' << e.kg_loss << '\t' << e.rec_loss << '\t' << e.disc_loss << '\t'
               << e.val_recall << '\n';
    }
    {
        Checkpoint ck;
        ck.config = cfg.train;
        ck.params = fit.best_params;
        ck.rng_state = trainer.rng().serialize();
        ck.epoch = fit.best_epoch;
        ck.best_metric = fit.best_metric;
        ck.extra_blocks = trainer.optimizer().export_blocks();
        std::ofstream os(out / "checkpoint.bin", std::ios::binary);
        save_checkpoint(ck, os);
    }
    log.precision(17);
    log << "train epochs " << fit.history.size() << " best_epoch " << fit.best_epoch
        << " best_val_recall20 " << fit.best_metric << "\n";
    return fit;
}

// ---- eval ----

inline Checkpoint load_checkpoint_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint " + path);
    return load_checkpoint(in);
}

inline std::vector<MetricsReport> cmd_eval(const ExperimentConfig& cfg,
                                           const std::string& checkpoint_path,
                                           const std::vector<std::string>& settings,
                                           std::ostream& log) {
    BuiltArtifacts a = load_built(cfg);
    Checkpoint ck = load_checkpoint_file(checkpoint_path.empty()
                                             ? (std::filesystem::path(resolve_output_dir(cfg)) /
                                                "checkpoint.bin")
                                                   .string()
                                             : checkpoint_path);
    if (ck.params.n_users != a.bundle.user_count || ck.params.n_items != a.bundle.item_count)
        throw std::runtime_error("checkpoint dimensions do not match the built artifacts");
    TrainingConfig tcfg = ck.config;

    auto cold_mask = a.split.cold_mask(a.bundle.item_count);
    std::vector<MetricsReport> reports;

    bool want_warm = settings.empty(), want_cold = settings.empty(), want_normal = false;
    for (const auto& s : settings) {
        if (s == "warm") want_warm = true;
        else if (s == "cold") want_cold = true;
        else if (s == "normal_cold") want_normal = true;
        else throw std::runtime_error("unknown setting '" + s + "'");
    }

    if (want_warm || want_cold) {
        FrozenGraphBundle inference_bundle = build_frozen_bundle(
            a.split.train, a.bundle.user_count, a.bundle.item_count,
            {&a.data.text, &a.data.image}, a.data.kg, cold_mask, tcfg.K_item, tcfg.K_user, true);
        GraphOps ops =
            GraphOps::build(inference_bundle, a.data.text.values, a.data.image.values, tcfg);
        InferenceOutputs inf = run_inference(inference_bundle, ops, ck.params, tcfg);
        for (std::size_t k : cfg.eval_k) {
            MetricsReport warm = evaluate_warm(inf, a.split, a.split.warm_test, k);
            MetricsReport cold = evaluate_cold(inf, a.split.cold_test_items,
                                               a.data.interactions.interactions, k);
            if (want_warm) reports.push_back(warm);
            if (want_cold) reports.push_back(cold);
            if (want_warm && want_cold) reports.push_back(harmonic_mean(cold, warm));
        }
    }

    if (want_normal) {
        if (!a.split.has_normal_cold)
            throw std::runtime_error("split manifest lacks the normal-cold partition");
        std::vector<Interaction> edges = a.split.train;
        edges.insert(edges.end(), a.split.known_cold.begin(), a.split.known_cold.end());
        std::sort(edges.begin(), edges.end());
        FrozenGraphBundle nc_bundle = build_frozen_bundle(
            edges, a.bundle.user_count, a.bundle.item_count, {&a.data.text, &a.data.image},
            a.data.kg, cold_mask, tcfg.K_item, tcfg.K_user, true);
        GraphOps ops = GraphOps::build(nc_bundle, a.data.text.values, a.data.image.values, tcfg);
        InferenceOutputs inf = run_inference(nc_bundle, ops, ck.params, tcfg);
        for (std::size_t k : cfg.eval_k)
            reports.push_back(evaluate_normal_cold(inf, a.split, a.split.cold_test_items, k));
    }

    for (const auto& r : reports) print_report(r, log);
    std::ofstream table(std::filesystem::path(resolve_output_dir(cfg)) / "metrics.tsv");
    print_report_table(reports, table);
    return reports;
}

// ---- export-embeddings ----

inline void cmd_export_embeddings(const ExperimentConfig& cfg, const std::string& checkpoint_path,
                                  std::ostream& log) {
    BuiltArtifacts a = load_built(cfg);
    Checkpoint ck = load_checkpoint_file(checkpoint_path.empty()
                                             ? (std::filesystem::path(resolve_output_dir(cfg)) /
                                                "checkpoint.bin")
                                                   .string()
                                             : checkpoint_path);
    if (ck.params.n_items != a.bundle.item_count)
        throw std::runtime_error("checkpoint dimensions do not match the built artifacts");
    auto cold_mask = a.split.cold_mask(a.bundle.item_count);
    FrozenGraphBundle inference_bundle = build_frozen_bundle(
        a.split.train, a.bundle.user_count, a.bundle.item_count, {&a.data.text, &a.data.image},
        a.data.kg, cold_mask, ck.config.K_item, ck.config.K_user, true);
    GraphOps ops =
        GraphOps::build(inference_bundle, a.data.text.values, a.data.image.values, ck.config);
    InferenceOutputs inf = run_inference(inference_bundle, ops, ck.params, ck.config);

    std::filesystem::path path = std::filesystem::path(resolve_output_dir(cfg)) / "embeddings.tsv";
    std::ofstream os(path);
    os.precision(17);
    for (std::size_t i = 0; i < inf.breve_item.rows(); ++i) {
        os << a.data.interactions.item_vocab.raw_of(i) << '\t'
           << (cold_mask[i] ? "cold" : "warm");
        for (std::size_t c = 0; c < inf.breve_item.cols(); ++c) os << '\t' << inf.breve_item(i, c);
        os << '\n';
    }
    log << "exported " << inf.breve_item.rows() << " item embeddings to " << path.string() << "\n";
}

}  // namespace firzen::cli

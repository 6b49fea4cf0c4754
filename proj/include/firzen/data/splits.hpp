#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "firzen/core/rng.hpp"
#include "firzen/data/interactions.hpp"

namespace firzen {

struct SplitSpec {
    std::vector<std::size_t> warm_items;
    std::vector<std::size_t> cold_items;
    std::vector<std::size_t> cold_val_items;
    std::vector<std::size_t> cold_test_items;

    std::vector<Interaction> train;
    std::vector<Interaction> warm_val;
    std::vector<Interaction> warm_test;

    // normal-cold protocol (optional): per-setting partition of cold interactions
    std::vector<Interaction> known_cold;
    std::vector<Interaction> unknown_cold;
    bool has_normal_cold = false;

    std::vector<std::size_t> users_without_train;  // report: users left with no train targets
    std::uint64_t seed = 0;

    std::vector<bool> cold_mask(std::size_t item_count) const {
        std::vector<bool> mask(item_count, false);
        for (std::size_t i : cold_items) mask[i] = true;
        return mask;
    }
};

// Cold items sampled uniformly with the seed, split 1:1 into val/test; warm
// interactions split per user by the given ratios, smallest users all-train.
inline SplitSpec build_strict_cold_splits(const InteractionDataset& ds, double cold_fraction,
                                          double train_ratio, double val_ratio, double test_ratio,
                                          std::uint64_t seed) {
    if (!(cold_fraction > 0.0 && cold_fraction < 1.0))
        throw std::invalid_argument("cold_fraction must be in (0,1)");
    double rsum = train_ratio + val_ratio + test_ratio;
    if (train_ratio <= 0 || val_ratio <= 0 || test_ratio <= 0 || std::fabs(rsum - 1.0) > 1e-9)
        throw std::invalid_argument("warm ratios must be positive and sum to 1");

    SplitSpec split;
    split.seed = seed;
    Rng rng(seed);

    // ceil keeps a 20% split of 12101 items at 2421 cold (round would give 2420)
    std::size_t n_cold =
        static_cast<std::size_t>(std::ceil(cold_fraction * static_cast<double>(ds.item_count)));
    auto cold = rng.sample_without_replacement(ds.item_count, n_cold);
    std::sort(cold.begin(), cold.end());
    split.cold_items = cold;
    std::vector<bool> is_cold(ds.item_count, false);
    for (std::size_t i : cold) is_cold[i] = true;
    for (std::size_t i = 0; i < ds.item_count; ++i)
        if (!is_cold[i]) split.warm_items.push_back(i);

    // 1:1 item-level split of the cold set
    std::vector<std::size_t> shuffled = cold;
    rng.shuffle(shuffled);
    std::size_t half = shuffled.size() / 2;
    split.cold_val_items.assign(shuffled.begin(), shuffled.begin() + half);
    split.cold_test_items.assign(shuffled.begin() + half, shuffled.end());
    std::sort(split.cold_val_items.begin(), split.cold_val_items.end());
    std::sort(split.cold_test_items.begin(), split.cold_test_items.end());

    // per-user split of warm interactions
    std::vector<std::vector<std::size_t>> per_user(ds.user_count);
    for (std::size_t k = 0; k < ds.interactions.size(); ++k)
        if (!is_cold[ds.interactions[k].item]) per_user[ds.interactions[k].user].push_back(k);

    for (std::size_t u = 0; u < ds.user_count; ++u) {
        auto& idx = per_user[u];
        if (idx.empty()) {
            split.users_without_train.push_back(u);
            continue;
        }
        if (idx.size() < 3) {
            for (std::size_t k : idx) split.train.push_back(ds.interactions[k]);
            continue;
        }
        rng.shuffle(idx);
        std::size_t n = idx.size();
        std::size_t n_val = static_cast<std::size_t>(std::floor(val_ratio * n));
        std::size_t n_test = static_cast<std::size_t>(std::floor(test_ratio * n));
        if (n_val == 0) n_val = 1;
        if (n_test == 0) n_test = 1;
        std::size_t n_train = n - n_val - n_test;
        for (std::size_t j = 0; j < n; ++j) {
            const Interaction& x = ds.interactions[idx[j]];
            if (j < n_train)
                split.train.push_back(x);
            else if (j < n_train + n_val)
                split.warm_val.push_back(x);
            else
                split.warm_test.push_back(x);
        }
    }
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.warm_val.begin(), split.warm_val.end());
    std::sort(split.warm_test.begin(), split.warm_test.end());
    return split;
}

// Splits each cold item's interactions 1:1 into known (graph edges at
// inference) and unknown (evaluation targets); singletons go to unknown.
inline SplitSpec build_normal_cold_splits(const InteractionDataset& ds, const SplitSpec& base,
                                          std::uint64_t seed) {
    if (base.cold_val_items.empty() && base.cold_test_items.empty())
        throw std::invalid_argument("build_normal_cold_splits: cold split not populated");
    SplitSpec out = base;
    out.known_cold.clear();
    out.unknown_cold.clear();
    out.has_normal_cold = true;
    Rng rng(seed);

    std::vector<bool> is_cold = base.cold_mask(ds.item_count);
    std::vector<std::vector<Interaction>> per_item(ds.item_count);
    for (const auto& x : ds.interactions)
        if (is_cold[x.item]) per_item[x.item].push_back(x);

    for (std::size_t i = 0; i < ds.item_count; ++i) {
        auto& xs = per_item[i];
        if (xs.empty()) continue;
        rng.shuffle(xs);
        std::size_t n_known = xs.size() / 2;  // singleton -> 0 known, 1 unknown
        for (std::size_t j = 0; j < xs.size(); ++j)
            (j < n_known ? out.known_cold : out.unknown_cold).push_back(xs[j]);
    }
    std::sort(out.known_cold.begin(), out.known_cold.end());
    std::sort(out.unknown_cold.begin(), out.unknown_cold.end());
    return out;
}

// ---- split manifest (versioned text) ----

inline void write_index_line(std::ostream& out, const std::string& tag,
                             const std::vector<std::size_t>& v) {
    out << tag;
    for (std::size_t x : v) out << ' ' << x;
    out << '\n';
}

inline void write_pair_line(std::ostream& out, const std::string& tag,
                            const std::vector<Interaction>& v) {
    out << tag;
    for (const auto& x : v) out << ' ' << x.user << ':' << x.item;
    out << '\n';
}

inline void save_split_manifest(const SplitSpec& s, std::ostream& out) {
    out << "firzen-split v1\n";
    out << "seed " << s.seed << '\n';
    write_index_line(out, "warm_items", s.warm_items);
    write_index_line(out, "cold_items", s.cold_items);
    write_index_line(out, "cold_val_items", s.cold_val_items);
    write_index_line(out, "cold_test_items", s.cold_test_items);
    write_pair_line(out, "train", s.train);
    write_pair_line(out, "warm_val", s.warm_val);
    write_pair_line(out, "warm_test", s.warm_test);
    if (s.has_normal_cold) {
        write_pair_line(out, "known_cold", s.known_cold);
        write_pair_line(out, "unknown_cold", s.unknown_cold);
    }
    write_index_line(out, "users_without_train", s.users_without_train);
}

inline SplitSpec load_split_manifest(std::istream& in) {
    std::string header;
    std::getline(in, header);
    if (header != "firzen-split v1") throw std::runtime_error("bad split manifest header");
    SplitSpec s;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream is(line);
        std::string tag;
        is >> tag;
        auto read_idx = [&](std::vector<std::size_t>& v) {
            std::size_t x;
            while (is >> x) v.push_back(x);
        };
        auto read_pairs = [&](std::vector<Interaction>& v) {
            std::string tok;
            while (is >> tok) {
                std::size_t colon = tok.find(':');
                if (colon == std::string::npos)
                    throw std::runtime_error("bad interaction token " + tok);
                v.push_back({std::stoull(tok.substr(0, colon)), std::stoull(tok.substr(colon + 1))});
            }
        };
        if (tag == "seed")
            is >> s.seed;
        else if (tag == "warm_items")
            read_idx(s.warm_items);
        else if (tag == "cold_items")
            read_idx(s.cold_items);
        else if (tag == "cold_val_items")
            read_idx(s.cold_val_items);
        else if (tag == "cold_test_items")
            read_idx(s.cold_test_items);
        else if (tag == "train")
            read_pairs(s.train);
        else if (tag == "warm_val")
            read_pairs(s.warm_val);
        else if (tag == "warm_test")
            read_pairs(s.warm_test);
        else if (tag == "known_cold") {
            read_pairs(s.known_cold);
            s.has_normal_cold = true;
        } else if (tag == "unknown_cold") {
            read_pairs(s.unknown_cold);
            s.has_normal_cold = true;
        } else if (tag == "users_without_train")
            read_idx(s.users_without_train);
        else
            throw std::runtime_error("unknown manifest tag " + tag);
    }
    return s;
}

}  // namespace firzen

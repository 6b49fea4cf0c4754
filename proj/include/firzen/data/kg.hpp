#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "firzen/core/rng.hpp"
#include "firzen/data/interactions.hpp"

namespace firzen {

enum class EntityType { Item, Brand, Category, Word, External };

inline const char* entity_type_name(EntityType t) {
    switch (t) {
        case EntityType::Item: return "item";
        case EntityType::Brand: return "brand";
        case EntityType::Category: return "category";
        case EntityType::Word: return "word";
        case EntityType::External: return "external";
    }
    return "?";
}

struct Triple {
    std::size_t head;
    std::size_t relation;
    std::size_t tail;
    bool operator==(const Triple&) const = default;
    bool operator<(const Triple& o) const {
        if (head != o.head) return head < o.head;
        if (relation != o.relation) return relation < o.relation;
        return tail < o.tail;
    }
};

struct KnowledgeGraph {
    Vocab entities;
    std::vector<EntityType> entity_types;
    Vocab relations;
    std::vector<Triple> triples;
    std::vector<std::size_t> item_alignment;  // item index -> entity index

    std::size_t add_entity(const std::string& raw, EntityType type) {
        std::size_t before = entities.size();
        std::size_t idx = entities.intern(raw);
        if (idx == before) entity_types.push_back(type);
        return idx;
    }

    void validate() const {
        for (const auto& t : triples) {
            if (t.head >= entities.size() || t.tail >= entities.size())
                throw std::runtime_error("KG triple references unknown entity");
            if (t.relation >= relations.size())
                throw std::runtime_error("KG triple references unknown relation");
        }
        for (std::size_t e : item_alignment)
            if (e >= entities.size()) throw std::runtime_error("item alignment out of range");
    }
};

struct ItemMetadata {
    std::optional<std::string> brand;
    std::optional<std::string> category;
    std::string description;                  // free text, whitespace tokenized
    std::vector<std::size_t> also_bought;     // item indices
    std::vector<std::size_t> also_viewed;
    std::vector<std::size_t> bought_together;
};

namespace detail {

inline std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        if (std::isalnum(static_cast<unsigned char>(c)))
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        else if (!cur.empty()) {
            out.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

}  // namespace detail

// Emits described_by / belongs_to / produced_by / also_bought / also_viewed /
// bought_together triples. Word entities pass a corpus frequency window and a
// mean tf-idf threshold (raw tf x log(N/df), averaged over containing docs).
inline KnowledgeGraph construct_kg_from_metadata(std::size_t item_count,
                                                 const std::vector<ItemMetadata>& metadata,
                                                 std::size_t word_freq_lo, std::size_t word_freq_hi,
                                                 double tfidf_threshold) {
    if (metadata.size() != item_count)
        throw std::invalid_argument("construct_kg_from_metadata: metadata must cover all items");

    // corpus statistics for the word filter
    std::map<std::string, std::size_t> total_freq, doc_freq;
    std::vector<std::map<std::string, std::size_t>> doc_tf(item_count);
    std::size_t n_docs = 0;
    for (std::size_t i = 0; i < item_count; ++i) {
        auto toks = detail::tokenize(metadata[i].description);
        if (toks.empty()) continue;
        ++n_docs;
        for (const auto& w : toks) {
            ++total_freq[w];
            ++doc_tf[i][w];
        }
        for (const auto& [w, _] : doc_tf[i]) ++doc_freq[w];
    }
    std::set<std::string> kept_words;
    for (const auto& [w, freq] : total_freq) {
        if (freq < word_freq_lo || freq > word_freq_hi) continue;
        double idf = std::log(static_cast<double>(n_docs) / static_cast<double>(doc_freq[w]));
        double acc = 0.0;
        for (std::size_t i = 0; i < item_count; ++i) {
            auto it = doc_tf[i].find(w);
            if (it != doc_tf[i].end()) acc += static_cast<double>(it->second) * idf;
        }
        double mean_score = acc / static_cast<double>(doc_freq[w]);
        if (mean_score > tfidf_threshold) kept_words.insert(w);
    }

    KnowledgeGraph kg;
    std::size_t r_word = kg.relations.intern("described_by");
    std::size_t r_cat = kg.relations.intern("belongs_to");
    std::size_t r_brand = kg.relations.intern("produced_by");
    std::size_t r_ab = kg.relations.intern("also_bought");
    std::size_t r_av = kg.relations.intern("also_viewed");
    std::size_t r_bt = kg.relations.intern("bought_together");

    kg.item_alignment.resize(item_count);
    for (std::size_t i = 0; i < item_count; ++i)
        kg.item_alignment[i] = kg.add_entity("item:" + std::to_string(i), EntityType::Item);

    std::set<Triple> seen;
    auto emit = [&](std::size_t h, std::size_t r, std::size_t t) {
        Triple tr{h, r, t};
        if (seen.insert(tr).second) kg.triples.push_back(tr);
    };

    for (std::size_t i = 0; i < item_count; ++i) {
        const auto& md = metadata[i];
        std::size_t self = kg.item_alignment[i];
        if (md.brand) emit(self, r_brand, kg.add_entity("brand:" + *md.brand, EntityType::Brand));
        if (md.category)
            emit(self, r_cat, kg.add_entity("category:" + *md.category, EntityType::Category));
        for (const auto& [w, _] : doc_tf[i])
            if (kept_words.count(w)) emit(self, r_word, kg.add_entity("word:" + w, EntityType::Word));
        auto link_items = [&](const std::vector<std::size_t>& others, std::size_t rel) {
            for (std::size_t j : others) {
                if (j >= item_count)
                    throw std::out_of_range("metadata references unknown item index");
                if (j != i) emit(self, rel, kg.item_alignment[j]);
            }
        };
        link_items(md.also_bought, r_ab);
        link_items(md.also_viewed, r_av);
        link_items(md.bought_together, r_bt);
    }
    std::sort(kg.triples.begin(), kg.triples.end());
    return kg;
}

enum class NoiseMode { Outlier, Duplicate, Discrepancy };

inline NoiseMode parse_noise_mode(const std::string& s) {
    if (s == "outlier") return NoiseMode::Outlier;
    if (s == "duplicate") return NoiseMode::Duplicate;
    if (s == "discrepancy") return NoiseMode::Discrepancy;
    throw std::invalid_argument("unknown noise mode: " + s);
}

// Adds round(fraction x |triples|) triples. Outlier invents fresh tail
// entities; duplicate copies sampled triples verbatim; discrepancy swaps the
// tail for a different existing entity of the same type.
inline KnowledgeGraph inject_kg_noise(const KnowledgeGraph& kg, NoiseMode mode, double fraction,
                                      std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction <= 1.0))
        throw std::invalid_argument("inject_kg_noise: fraction must be in (0,1]");
    KnowledgeGraph out = kg;
    Rng rng(seed);
    std::size_t n_add = static_cast<std::size_t>(
        std::llround(fraction * static_cast<double>(kg.triples.size())));

    // entities grouped by type, for discrepancy tails
    std::vector<std::vector<std::size_t>> by_type(5);
    for (std::size_t e = 0; e < kg.entity_types.size(); ++e)
        by_type[static_cast<std::size_t>(kg.entity_types[e])].push_back(e);

    std::size_t added = 0, attempts = 0;
    while (added < n_add) {
        if (++attempts > n_add * 100 + 1000)
            throw std::runtime_error("inject_kg_noise: cannot place requested noise");
        const Triple& base = kg.triples[rng.uniform_index(kg.triples.size())];
        if (mode == NoiseMode::Outlier) {
            EntityType tail_type = kg.entity_types[base.tail];
            std::size_t fresh = out.add_entity(
                std::string("noise:") + entity_type_name(tail_type) + ":" + std::to_string(added),
                tail_type);
            out.triples.push_back({base.head, base.relation, fresh});
            ++added;
        } else if (mode == NoiseMode::Duplicate) {
            out.triples.push_back(base);
            ++added;
        } else {
            const auto& pool = by_type[static_cast<std::size_t>(kg.entity_types[base.tail])];
            if (pool.size() < 2) continue;  // nothing of this type to confuse with
            std::size_t alt = pool[rng.uniform_index(pool.size())];
            if (alt == base.tail) continue;
            out.triples.push_back({base.head, base.relation, alt});
            ++added;
        }
    }
    return out;
}

// ---- TSV serialization: head<TAB>relation<TAB>tail, ids carry type prefixes ----

inline void save_kg(const KnowledgeGraph& kg, std::ostream& out) {
    for (const auto& t : kg.triples)
        out << kg.entities.raw_of(t.head) << '\t' << kg.relations.raw_of(t.relation) << '\t'
            << kg.entities.raw_of(t.tail) << '\n';
}

inline EntityType entity_type_from_id(const std::string& raw) {
    auto colon = raw.find(':');
    std::string prefix = colon == std::string::npos ? "" : raw.substr(0, colon);
    if (prefix == "item") return EntityType::Item;
    if (prefix == "brand") return EntityType::Brand;
    if (prefix == "category") return EntityType::Category;
    if (prefix == "word") return EntityType::Word;
    if (prefix == "noise") {
        auto rest = raw.substr(colon + 1);
        return entity_type_from_id(rest);
    }
    return EntityType::External;
}

inline KnowledgeGraph load_kg(std::istream& in, std::size_t item_count,
                              const std::string& name = "<stream>") {
    KnowledgeGraph kg;
    kg.item_alignment.resize(item_count);
    for (std::size_t i = 0; i < item_count; ++i)
        kg.item_alignment[i] = kg.add_entity("item:" + std::to_string(i), EntityType::Item);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream is(line);
        std::string h, r, t;
        if (!std::getline(is, h, '\t') || !std::getline(is, r, '\t') || !std::getline(is, t))
            throw std::runtime_error(name + ":" + std::to_string(lineno) +
                                     ": expected head<TAB>relation<TAB>tail");
        std::size_t hi = kg.add_entity(h, entity_type_from_id(h));
        std::size_t ti = kg.add_entity(t, entity_type_from_id(t));
        kg.triples.push_back({hi, kg.relations.intern(r), ti});
    }
    kg.validate();
    return kg;
}

}  // namespace firzen

#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace firzen {

struct Interaction {
    std::size_t user;
    std::size_t item;
    bool operator==(const Interaction&) const = default;
    bool operator<(const Interaction& o) const {
        return user != o.user ? user < o.user : item < o.item;
    }
};

// Raw-id <-> dense-index map. Indices are assigned in first-seen order.
class Vocab {
public:
    std::size_t intern(const std::string& raw) {
        auto it = index_.find(raw);
        if (it != index_.end()) return it->second;
        std::size_t id = raw_.size();
        index_.emplace(raw, id);
        raw_.push_back(raw);
        return id;
    }
    bool contains(const std::string& raw) const { return index_.count(raw) > 0; }
    std::size_t index_of(const std::string& raw) const {
        auto it = index_.find(raw);
        if (it == index_.end()) throw std::out_of_range("Vocab: unknown id '" + raw + "'");
        return it->second;
    }
    const std::string& raw_of(std::size_t idx) const { return raw_.at(idx); }
    std::size_t size() const { return raw_.size(); }

private:
    std::map<std::string, std::size_t> index_;
    std::vector<std::string> raw_;
};

struct InteractionDataset {
    std::size_t user_count = 0;
    std::size_t item_count = 0;
    std::vector<Interaction> interactions;  // deduplicated, sorted
    Vocab user_vocab;
    Vocab item_vocab;

    std::vector<std::size_t> user_degrees() const {
        std::vector<std::size_t> deg(user_count, 0);
        for (const auto& x : interactions) ++deg[x.user];
        return deg;
    }
    std::vector<std::size_t> item_degrees() const {
        std::vector<std::size_t> deg(item_count, 0);
        for (const auto& x : interactions) ++deg[x.item];
        return deg;
    }
};

// UTF-8 TSV: user_id <TAB> item_id [<TAB> timestamp]. Duplicate pairs collapse.
inline InteractionDataset load_interactions(std::istream& in, const std::string& name = "<stream>") {
    InteractionDataset ds;
    std::set<Interaction> seen;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::size_t tab1 = line.find('\t');
        if (tab1 == std::string::npos || tab1 == 0)
            throw std::runtime_error(name + ":" + std::to_string(lineno) +
                                     ": expected user<TAB>item");
        std::size_t tab2 = line.find('\t', tab1 + 1);
        std::string user = line.substr(0, tab1);
        std::string item = tab2 == std::string::npos ? line.substr(tab1 + 1)
                                                     : line.substr(tab1 + 1, tab2 - tab1 - 1);
        if (item.empty())
            throw std::runtime_error(name + ":" + std::to_string(lineno) + ": empty item id");
        Interaction x{ds.user_vocab.intern(user), ds.item_vocab.intern(item)};
        if (seen.insert(x).second) ds.interactions.push_back(x);
    }
    if (ds.interactions.empty()) throw std::runtime_error(name + ": no interactions");
    ds.user_count = ds.user_vocab.size();
    ds.item_count = ds.item_vocab.size();
    std::sort(ds.interactions.begin(), ds.interactions.end());
    return ds;
}

inline InteractionDataset load_interactions_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return load_interactions(in, path);
}

inline void save_interactions(const InteractionDataset& ds, std::ostream& out) {
    for (const auto& x : ds.interactions)
        out << ds.user_vocab.raw_of(x.user) << '\t' << ds.item_vocab.raw_of(x.item) << '\n';
}

// Iteratively removes users with < k interactions until a fixed point.
// Items are kept regardless of degree; indices are re-densified.
inline InteractionDataset k_core_filter(const InteractionDataset& ds, std::size_t k) {
    if (k == 0) throw std::invalid_argument("k_core_filter: k must be >= 1");
    std::vector<bool> user_alive(ds.user_count, true);
    bool changed = true;
    while (changed) {
        changed = false;
        std::vector<std::size_t> deg(ds.user_count, 0);
        for (const auto& x : ds.interactions)
            if (user_alive[x.user]) ++deg[x.user];
        for (std::size_t u = 0; u < ds.user_count; ++u)
            if (user_alive[u] && deg[u] < k) {
                user_alive[u] = false;
                changed = true;
            }
    }
    // with user-only filtering one pass suffices, but keep the loop as the
    // definition in case item filtering is ever added

    InteractionDataset out;
    for (const auto& x : ds.interactions) {
        if (!user_alive[x.user]) continue;
        Interaction y{out.user_vocab.intern(ds.user_vocab.raw_of(x.user)),
                      out.item_vocab.intern(ds.item_vocab.raw_of(x.item))};
        out.interactions.push_back(y);
    }
    if (out.interactions.empty()) throw std::runtime_error("k_core_filter: empty result");
    out.user_count = out.user_vocab.size();
    out.item_count = out.item_vocab.size();
    std::sort(out.interactions.begin(), out.interactions.end());
    return out;
}

}  // namespace firzen

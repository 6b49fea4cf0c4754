#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "firzen/core/matrix.hpp"

namespace firzen {

struct MetricsReport {
    std::string setting;  // cold, warm, hm, normal_cold
    std::size_t k = 0;
    double recall = 0.0, precision = 0.0, hit = 0.0, mrr = 0.0, ndcg = 0.0;
    std::size_t evaluated_users = 0;
    std::size_t skipped_users = 0;  // empty ground truth
};

// Candidates ordered by descending score; ties broken by smaller item index.
inline std::vector<std::size_t> rank_candidates(const std::vector<double>& scores,
                                                const std::vector<std::size_t>& candidates) {
    std::vector<std::size_t> out = candidates;
    std::sort(out.begin(), out.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    });
    return out;
}

// Per-user top-K metrics with binary gains, averaged over users with
// nonempty ground truth; users without ground truth are skipped and counted.
inline MetricsReport metrics_at_k(const std::vector<std::vector<std::size_t>>& rankings,
                                  const std::vector<std::set<std::size_t>>& ground_truth,
                                  std::size_t k, const std::string& setting) {
    MetricsReport r;
    r.setting = setting;
    r.k = k;
    for (std::size_t u = 0; u < rankings.size(); ++u) {
        const auto& rel = ground_truth[u];
        if (rel.empty()) {
            ++r.skipped_users;
            continue;
        }
        const auto& ranked = rankings[u];
        std::size_t top = std::min(k, ranked.size());
        std::size_t hits = 0;
        double dcg = 0.0, first_rank = 0.0;
        for (std::size_t pos = 0; pos < top; ++pos) {
            if (rel.count(ranked[pos])) {
                ++hits;
                dcg += 1.0 / std::log2(static_cast<double>(pos) + 2.0);
                if (first_rank == 0.0) first_rank = static_cast<double>(pos) + 1.0;
            }
        }
        double idcg = 0.0;
        for (std::size_t pos = 0; pos < std::min(k, rel.size()); ++pos)
            idcg += 1.0 / std::log2(static_cast<double>(pos) + 2.0);
        r.recall += static_cast<double>(hits) / static_cast<double>(rel.size());
        r.precision += static_cast<double>(hits) / static_cast<double>(k);
        r.hit += hits > 0 ? 1.0 : 0.0;
        r.mrr += first_rank > 0.0 ? 1.0 / first_rank : 0.0;
        r.ndcg += idcg > 0.0 ? dcg / idcg : 0.0;
        ++r.evaluated_users;
    }
    if (r.evaluated_users > 0) {
        double n = static_cast<double>(r.evaluated_users);
        r.recall /= n;
        r.precision /= n;
        r.hit /= n;
        r.mrr /= n;
        r.ndcg /= n;
    }
    return r;
}

// HM = 2cw/(c+w) per metric; zero when either side is zero.
inline MetricsReport harmonic_mean(const MetricsReport& cold, const MetricsReport& warm) {
    if (cold.k != warm.k) throw std::invalid_argument("harmonic_mean: mismatched K");
    auto hm = [](double c, double w) { return (c == 0.0 || w == 0.0) ? 0.0 : 2.0 * c * w / (c + w); };
    MetricsReport r;
    r.setting = "hm";
    r.k = cold.k;
    r.recall = hm(cold.recall, warm.recall);
    r.precision = hm(cold.precision, warm.precision);
    r.hit = hm(cold.hit, warm.hit);
    r.mrr = hm(cold.mrr, warm.mrr);
    r.ndcg = hm(cold.ndcg, warm.ndcg);
    r.evaluated_users = std::min(cold.evaluated_users, warm.evaluated_users);
    return r;
}

// one metric per line: setting, metric, K, value (fraction; percent display is
// the consumer's concern)
inline void print_report(const MetricsReport& r, std::ostream& os) {
    os.precision(17);
    os << r.setting << " recall " << r.k << " " << r.recall << "\n";
    os << r.setting << " mrr " << r.k << " " << r.mrr << "\n";
    os << r.setting << " ndcg " << r.k << " " << r.ndcg << "\n";
    os << r.setting << " hit " << r.k << " " << r.hit << "\n";
    os << r.setting << " precision " << r.k << " " << r.precision << "\n";
    os << r.setting << " users " << r.k << " " << r.evaluated_users << "\n";
    os << r.setting << " skipped " << r.k << " " << r.skipped_users << "\n";
}

// machine-readable table: header + one row per report
inline void print_report_table(const std::vector<MetricsReport>& reports, std::ostream& os) {
    os.precision(17);
    os << "setting\tK\trecall\tmrr\tndcg\thit\tprecision\tusers\tskipped\n";
    for (const auto& r : reports)
        os << r.setting << '\t' << r.k << '\t' << r.recall << '\t' << r.mrr << '\t' << r.ndcg
           << '\t' << r.hit << '\t' << r.precision << '\t' << r.evaluated_users << '\t'
           << r.skipped_users << "\n";
}

}  // namespace firzen

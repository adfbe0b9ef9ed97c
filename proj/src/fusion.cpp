#include "graphdoc/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "graphdoc/error.hpp"

namespace graphdoc {

namespace {

/// Candidate -> normalized score for one system on one query. Candidates
/// missing from the system get its minimum (0 after min-max).
std::map<std::string, double> system_scores(const Ranking* ranking,
                                            const std::set<std::string>& pool,
                                            FusionNorm norm) {
    std::map<std::string, double> out;
    double lo = 0.0, hi = 0.0;
    if (ranking && !ranking->empty()) {
        lo = hi = ranking->front().score;
        for (const ScoredDoc& sd : *ranking) {
            lo = std::min(lo, sd.score);
            hi = std::max(hi, sd.score);
        }
    }
    for (const auto& doc_id : pool) out[doc_id] = lo;
    if (ranking)
        for (const ScoredDoc& sd : *ranking) out[sd.doc_id] = sd.score;
    if (norm == FusionNorm::MinMax) {
        const double range = hi - lo;
        for (auto& [doc_id, s] : out) s = range > 0.0 ? (s - lo) / range : 0.0;
    }
    return out;
}

} // namespace

Run fuse(const Run& dense, const Run& bm25, double w, std::size_t k,
         FusionNorm norm, const std::string& tag) {
    if (w < 0.0 || w > 1.0)
        throw usage_error("fuse: weight must lie in [0, 1]");
    if (k < 1) throw usage_error("fuse: k must be at least 1");
    Run fused;
    fused.tag = tag;
    std::set<std::string> qids;
    for (const auto& [qid, r] : dense.by_query) qids.insert(qid);
    for (const auto& [qid, r] : bm25.by_query) qids.insert(qid);
    for (const auto& qid : qids) {
        auto dit = dense.by_query.find(qid);
        auto bit = bm25.by_query.find(qid);
        const Ranking* dr = dit == dense.by_query.end() ? nullptr : &dit->second;
        const Ranking* br = bit == bm25.by_query.end() ? nullptr : &bit->second;
        std::set<std::string> pool;
        if (dr)
            for (const ScoredDoc& sd : *dr) pool.insert(sd.doc_id);
        if (br)
            for (const ScoredDoc& sd : *br) pool.insert(sd.doc_id);
        if (pool.empty()) continue;
        const auto ds = system_scores(dr, pool, norm);
        const auto bs = system_scores(br, pool, norm);
        Ranking ranking;
        ranking.reserve(pool.size());
        for (const auto& doc_id : pool)
            ranking.push_back({doc_id, w * ds.at(doc_id) + (1.0 - w) * bs.at(doc_id)});
        sort_and_truncate(ranking, k);
        fused.by_query[qid] = std::move(ranking);
    }
    return fused;
}

double tune_fusion_weight(const Run& dense, const Run& bm25, const RunMetric& metric,
                          std::size_t k, double step, FusionNorm norm) {
    if (step <= 0.0 || step > 1.0)
        throw usage_error("tune_fusion_weight: step must lie in (0, 1]");
    const std::size_t cells = static_cast<std::size_t>(std::lround(1.0 / step));
    double best_w = 0.0, best_score = -1.0;
    for (std::size_t i = 0; i <= cells; ++i) {
        const double w = static_cast<double>(i) / static_cast<double>(cells);
        const double s = metric(fuse(dense, bm25, w, k, norm));
        if (s > best_score) {
            best_score = s;
            best_w = w;
        }
    }
    return best_w;
}

} // namespace graphdoc

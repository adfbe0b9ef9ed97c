#include "graphdoc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>

#include "graphdoc/error.hpp"

namespace graphdoc {

namespace {

const Ranking kEmptyRanking;
const std::map<std::string, int> kEmptyGrades;

double mean_over_queries(
    const Run& run, const Qrels& qrels,
    const std::function<double(const Ranking&, const std::map<std::string, int>&)>& per_query) {
    std::set<std::string> qids;
    for (const auto& [qid, ranking] : run.by_query) qids.insert(qid);
    for (const auto& [qid, grades] : qrels) qids.insert(qid);
    if (qids.empty()) return 0.0;
    double total = 0.0;
    for (const auto& qid : qids) {
        auto rit = run.by_query.find(qid);
        auto git = qrels.find(qid);
        total += per_query(rit == run.by_query.end() ? kEmptyRanking : rit->second,
                           git == qrels.end() ? kEmptyGrades : git->second);
    }
    return total / static_cast<double>(qids.size());
}

int grade_of(const std::map<std::string, int>& grades, const std::string& doc_id) {
    auto it = grades.find(doc_id);
    return it == grades.end() ? 0 : it->second;
}

void require_k(std::size_t k) {
    if (k < 1) throw usage_error("metrics: k must be at least 1");
}

} // namespace

double precision_at_k(const Run& run, const Qrels& qrels, std::size_t k) {
    require_k(k);
    return mean_over_queries(run, qrels, [k](const Ranking& r, const auto& grades) {
        std::size_t hits = 0;
        for (std::size_t i = 0; i < r.size() && i < k; ++i)
            if (grade_of(grades, r[i].doc_id) > 0) ++hits;
        return static_cast<double>(hits) / static_cast<double>(k);
    });
}

double mrr_at_k(const Run& run, const Qrels& qrels, std::size_t k) {
    require_k(k);
    return mean_over_queries(run, qrels, [k](const Ranking& r, const auto& grades) {
        for (std::size_t i = 0; i < r.size() && i < k; ++i)
            if (grade_of(grades, r[i].doc_id) > 0)
                return 1.0 / static_cast<double>(i + 1);
        return 0.0;
    });
}

double ndcg_at_k(const Run& run, const Qrels& qrels, std::size_t k, NdcgGain gain) {
    require_k(k);
    auto gain_of = [gain](int grade) {
        return gain == NdcgGain::Grade
                   ? static_cast<double>(grade)
                   : std::pow(2.0, static_cast<double>(grade)) - 1.0;
    };
    return mean_over_queries(run, qrels, [&](const Ranking& r, const auto& grades) {
        double dcg = 0.0;
        for (std::size_t i = 0; i < r.size() && i < k; ++i)
            dcg += gain_of(grade_of(grades, r[i].doc_id)) /
                   std::log2(static_cast<double>(i + 2));
        std::vector<int> ideal;
        for (const auto& [doc_id, grade] : grades)
            if (grade > 0) ideal.push_back(grade);
        std::sort(ideal.begin(), ideal.end(), std::greater<>());
        double idcg = 0.0;
        for (std::size_t i = 0; i < ideal.size() && i < k; ++i)
            idcg += gain_of(ideal[i]) / std::log2(static_cast<double>(i + 2));
        return idcg == 0.0 ? 0.0 : dcg / idcg;
    });
}

} // namespace graphdoc

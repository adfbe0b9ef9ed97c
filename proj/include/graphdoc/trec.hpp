#pragma once

#include <map>
#include <string>
#include <vector>

namespace graphdoc {

struct ScoredDoc {
    std::string doc_id;
    double score = 0.0;
};

/// Ranked candidates for one query: descending score, ties broken by
/// ascending doc id.
using Ranking = std::vector<ScoredDoc>;

struct Run {
    std::string tag = "run";
    std::map<std::string, Ranking> by_query;
};

/// (query id, doc id) -> integer relevance grade >= 0.
using Qrels = std::map<std::string, std::map<std::string, int>>;

struct Query {
    std::string id;
    std::string text;
};

/// `qid Q0 docid rank score tag`, space separated, scores with 6 decimals.
void save_run(const Run& run, const std::string& path);
Run load_run(const std::string& path);

/// `qid 0 docid grade`.
void save_qrels(const Qrels& qrels, const std::string& path);
Qrels load_qrels(const std::string& path);

/// Tab separated `qid<TAB>text`; the text may itself contain tabs.
void save_queries(const std::vector<Query>& queries, const std::string& path);
std::vector<Query> load_queries(const std::string& path);

/// Sorts by (score descending, doc id ascending) and truncates to k.
void sort_and_truncate(Ranking& ranking, std::size_t k);

} // namespace graphdoc

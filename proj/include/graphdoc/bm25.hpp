#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "graphdoc/document.hpp"
#include "graphdoc/trec.hpp"

namespace graphdoc {

struct Bm25Params {
    double k1 = 0.9;
    double b = 0.4;
};

/// Lucene-style BM25 over whole documents (all passages concatenated):
/// score = sum_t idf(t) * tf / (tf + k1*(1 - b + b*dl/avgdl)) with
/// idf(t) = ln(1 + (N - df + 0.5)/(df + 0.5)).
class Bm25Index {
public:
    static Bm25Index build(const Corpus& corpus, Bm25Params params = {});

    double score(const std::vector<std::string>& query_terms,
                 const std::string& doc_id) const;
    Ranking search(const std::string& query_text, std::size_t k) const;
    Ranking search_terms(const std::vector<std::string>& terms, std::size_t k) const;

    std::size_t doc_count() const { return ids_.size(); }
    const std::vector<std::string>& doc_ids() const { return ids_; }
    double avg_doc_length() const { return avgdl_; }
    std::size_t doc_length(const std::string& doc_id) const;
    std::size_t df(const std::string& term) const;
    std::size_t tf(const std::string& term, const std::string& doc_id) const;
    const Bm25Params& params() const { return params_; }

    void save(const std::string& path) const;
    static Bm25Index load(const std::string& path);

private:
    std::size_t doc_pos(const std::string& doc_id) const;

    Bm25Params params_;
    std::vector<std::string> ids_;
    std::map<std::string, std::size_t> id_pos_;
    std::vector<std::size_t> doc_len_;
    double avgdl_ = 0.0;
    // term -> (doc position, term frequency), ascending doc position
    std::map<std::string, std::vector<std::pair<std::uint32_t, std::uint32_t>>> postings_;
};

} // namespace graphdoc

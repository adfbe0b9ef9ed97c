#include "graphdoc/bm25.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "graphdoc/error.hpp"
#include "graphdoc/text.hpp"

namespace graphdoc {

namespace {

std::vector<std::string> doc_terms(const Document& doc) {
    std::string full;
    for (const auto& section : doc.sections)
        for (const auto& passage : section) {
            if (!full.empty()) full += ' ';
            full += passage;
        }
    return tokenize_words(full);
}

} // namespace

Bm25Index Bm25Index::build(const Corpus& corpus, Bm25Params params) {
    if (corpus.empty()) throw data_error("bm25: empty corpus");
    Bm25Index index;
    index.params_ = params;
    std::size_t total_len = 0;
    for (const Document& doc : corpus) {
        if (index.id_pos_.count(doc.id))
            throw data_error("bm25: duplicate document id " + doc.id);
        const std::uint32_t pos = static_cast<std::uint32_t>(index.ids_.size());
        index.id_pos_[doc.id] = pos;
        index.ids_.push_back(doc.id);

        std::map<std::string, std::uint32_t> counts;
        const auto terms = doc_terms(doc);
        for (const auto& t : terms) ++counts[t];
        index.doc_len_.push_back(terms.size());
        total_len += terms.size();
        for (const auto& [term, tf] : counts)
            index.postings_[term].emplace_back(pos, tf);
    }
    if (total_len == 0) throw data_error("bm25: corpus has no tokens");
    index.avgdl_ = static_cast<double>(total_len) / static_cast<double>(corpus.size());
    return index;
}

std::size_t Bm25Index::doc_pos(const std::string& doc_id) const {
    auto it = id_pos_.find(doc_id);
    if (it == id_pos_.end()) throw data_error("bm25: unknown document id " + doc_id);
    return it->second;
}

std::size_t Bm25Index::doc_length(const std::string& doc_id) const {
    return doc_len_[doc_pos(doc_id)];
}

std::size_t Bm25Index::df(const std::string& term) const {
    auto it = postings_.find(term);
    return it == postings_.end() ? 0 : it->second.size();
}

std::size_t Bm25Index::tf(const std::string& term, const std::string& doc_id) const {
    const std::uint32_t pos = static_cast<std::uint32_t>(doc_pos(doc_id));
    auto it = postings_.find(term);
    if (it == postings_.end()) return 0;
    const auto& list = it->second;
    auto entry = std::lower_bound(list.begin(), list.end(), pos,
                                  [](const auto& p, std::uint32_t v) { return p.first < v; });
    return entry != list.end() && entry->first == pos ? entry->second : 0;
}

double Bm25Index::score(const std::vector<std::string>& query_terms,
                        const std::string& doc_id) const {
    const std::size_t pos = doc_pos(doc_id);
    const double dl = static_cast<double>(doc_len_[pos]);
    const double norm = params_.k1 * (1.0 - params_.b + params_.b * dl / avgdl_);
    const double n_docs = static_cast<double>(ids_.size());
    double total = 0.0;
    for (const auto& term : query_terms) {
        auto it = postings_.find(term);
        if (it == postings_.end()) continue;
        const auto& list = it->second;
        auto entry = std::lower_bound(
            list.begin(), list.end(), static_cast<std::uint32_t>(pos),
            [](const auto& p, std::uint32_t v) { return p.first < v; });
        if (entry == list.end() || entry->first != pos) continue;
        const double tf_d = static_cast<double>(entry->second);
        const double df_t = static_cast<double>(list.size());
        const double idf = std::log(1.0 + (n_docs - df_t + 0.5) / (df_t + 0.5));
        total += idf * tf_d / (tf_d + norm);
    }
    return total;
}

Ranking Bm25Index::search_terms(const std::vector<std::string>& terms,
                                std::size_t k) const {
    if (k < 1) throw usage_error("bm25: k must be at least 1");
    std::vector<std::uint32_t> candidates;
    for (const auto& term : terms) {
        auto it = postings_.find(term);
        if (it == postings_.end()) continue;
        for (const auto& [pos, tf] : it->second) candidates.push_back(pos);
    }
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()),
                     candidates.end());
    Ranking ranking;
    ranking.reserve(candidates.size());
    for (std::uint32_t pos : candidates)
        ranking.push_back({ids_[pos], score(terms, ids_[pos])});
    sort_and_truncate(ranking, k);
    return ranking;
}

Ranking Bm25Index::search(const std::string& query_text, std::size_t k) const {
    return search_terms(tokenize_words(query_text), k);
}

void Bm25Index::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot write " + path);
    char buf[64];
    out << "BM25v1\n";
    std::snprintf(buf, sizeof buf, "%.17g %.17g\n", params_.k1, params_.b);
    out << "params " << buf;
    out << "docs " << ids_.size() << '\n';
    for (std::size_t i = 0; i < ids_.size(); ++i)
        out << ids_[i] << ' ' << doc_len_[i] << '\n';
    out << "terms " << postings_.size() << '\n';
    for (const auto& [term, list] : postings_) {
        out << term << ' ' << list.size();
        for (const auto& [pos, tf] : list) out << ' ' << pos << ':' << tf;
        out << '\n';
    }
}

Bm25Index Bm25Index::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot read " + path);
    auto fail = [&](const std::string& what) -> data_error {
        return data_error(path + ": " + what);
    };
    std::string word;
    if (!(in >> word) || word != "BM25v1") throw fail("not a bm25 index file");
    Bm25Index index;
    std::size_t n_docs = 0, n_terms = 0;
    if (!(in >> word >> index.params_.k1 >> index.params_.b) || word != "params")
        throw fail("bad params line");
    if (!(in >> word >> n_docs) || word != "docs") throw fail("bad docs line");
    std::size_t total_len = 0;
    for (std::size_t i = 0; i < n_docs; ++i) {
        std::string id;
        std::size_t len;
        if (!(in >> id >> len)) throw fail("truncated doc table");
        index.id_pos_[id] = index.ids_.size();
        index.ids_.push_back(id);
        index.doc_len_.push_back(len);
        total_len += len;
    }
    if (index.id_pos_.size() != n_docs) throw fail("duplicate doc id");
    if (n_docs == 0 || total_len == 0) throw fail("empty index");
    index.avgdl_ = static_cast<double>(total_len) / static_cast<double>(n_docs);
    if (!(in >> word >> n_terms) || word != "terms") throw fail("bad terms line");
    for (std::size_t i = 0; i < n_terms; ++i) {
        std::string term;
        std::size_t df;
        if (!(in >> term >> df)) throw fail("truncated postings");
        auto& list = index.postings_[term];
        for (std::size_t j = 0; j < df; ++j) {
            std::uint32_t pos, tf;
            char colon;
            if (!(in >> pos >> colon >> tf) || colon != ':')
                throw fail("bad posting entry for term " + term);
            if (pos >= n_docs) throw fail("posting points past doc table");
            list.emplace_back(pos, tf);
        }
    }
    return index;
}

} // namespace graphdoc

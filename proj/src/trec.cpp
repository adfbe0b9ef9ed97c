#include "graphdoc/trec.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "graphdoc/error.hpp"

namespace graphdoc {

namespace {

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot write " + path);
    return out;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot read " + path);
    return in;
}

[[noreturn]] void bad_line(const std::string& path, std::size_t line_no,
                           const std::string& what) {
    throw data_error(path + ":" + std::to_string(line_no) + ": " + what);
}

} // namespace

void sort_and_truncate(Ranking& ranking, std::size_t k) {
    std::sort(ranking.begin(), ranking.end(), [](const ScoredDoc& a, const ScoredDoc& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.doc_id < b.doc_id;
    });
    if (ranking.size() > k) ranking.resize(k);
}

void save_run(const Run& run, const std::string& path) {
    std::ofstream out = open_out(path);
    char score_buf[32];
    for (const auto& [qid, ranking] : run.by_query) {
        std::size_t rank = 1;
        for (const ScoredDoc& sd : ranking) {
            std::snprintf(score_buf, sizeof score_buf, "%.6f", sd.score);
            out << qid << " Q0 " << sd.doc_id << ' ' << rank << ' ' << score_buf
                << ' ' << run.tag << '\n';
            ++rank;
        }
    }
}

Run load_run(const std::string& path) {
    std::ifstream in = open_in(path);
    Run run;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream f(line);
        std::string qid, q0, doc_id, tag;
        std::size_t rank;
        double score;
        if (!(f >> qid >> q0 >> doc_id >> rank >> score >> tag))
            bad_line(path, line_no, "expected `qid Q0 docid rank score tag`");
        Ranking& ranking = run.by_query[qid];
        if (rank != ranking.size() + 1)
            bad_line(path, line_no, "rank " + std::to_string(rank) +
                                        " breaks the 1..k sequence");
        ranking.push_back({doc_id, score});
        run.tag = tag;
    }
    return run;
}

void save_qrels(const Qrels& qrels, const std::string& path) {
    std::ofstream out = open_out(path);
    for (const auto& [qid, docs] : qrels)
        for (const auto& [doc_id, grade] : docs)
            out << qid << " 0 " << doc_id << ' ' << grade << '\n';
}

Qrels load_qrels(const std::string& path) {
    std::ifstream in = open_in(path);
    Qrels qrels;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream f(line);
        std::string qid, zero, doc_id;
        int grade;
        if (!(f >> qid >> zero >> doc_id >> grade))
            bad_line(path, line_no, "expected `qid 0 docid grade`");
        if (grade < 0) bad_line(path, line_no, "negative relevance grade");
        qrels[qid][doc_id] = grade;
    }
    return qrels;
}

void save_queries(const std::vector<Query>& queries, const std::string& path) {
    std::ofstream out = open_out(path);
    for (const Query& q : queries) out << q.id << '\t' << q.text << '\n';
}

std::vector<Query> load_queries(const std::string& path) {
    std::ifstream in = open_in(path);
    std::vector<Query> queries;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::size_t tab = line.find('\t');
        if (tab == std::string::npos)
            bad_line(path, line_no, "expected `qid<TAB>text`");
        queries.push_back({line.substr(0, tab), line.substr(tab + 1)});
    }
    return queries;
}

} // namespace graphdoc

#include "graphdoc/dense.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "graphdoc/error.hpp"

namespace graphdoc {

DenseIndex build_dense_index(const GraphDocModel& model, const Corpus& corpus,
                             std::size_t threads) {
    std::set<std::string> seen;
    for (const Document& doc : corpus)
        if (!seen.insert(doc.id).second)
            throw data_error("dense index: duplicate document id " + doc.id);

    DenseIndex index;
    index.ids.reserve(corpus.size());
    for (const Document& doc : corpus) index.ids.push_back(doc.id);
    const std::size_t d = model.config().d_model;
    index.embeddings = Tensor::zeros({corpus.size(), d});

    auto encode_range = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            Tensor emb = model.embed_document(corpus[i], EncodeMode::Infer);
            for (std::size_t j = 0; j < d; ++j) index.embeddings.at(i, j) = emb.at(j);
        }
    };
    if (threads <= 1 || corpus.size() < 2) {
        encode_range(0, corpus.size());
    } else {
        const std::size_t workers = std::min(threads, corpus.size());
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            const std::size_t begin = corpus.size() * w / workers;
            const std::size_t end = corpus.size() * (w + 1) / workers;
            pool.emplace_back(encode_range, begin, end);
        }
        for (auto& t : pool) t.join();
    }
    return index;
}

Ranking dense_search(const DenseIndex& index, const Tensor& query_vec, std::size_t k) {
    if (k < 1) throw usage_error("dense search: k must be at least 1");
    const std::size_t d = index.embeddings.cols();
    if (query_vec.size() != d)
        throw dim_error("dense search: query dimension " +
                        std::to_string(query_vec.size()) + " != index dimension " +
                        std::to_string(d));
    Ranking ranking;
    ranking.reserve(index.ids.size());
    for (std::size_t i = 0; i < index.ids.size(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < d; ++j)
            s += index.embeddings.at(i, j) * query_vec.at(j);
        ranking.push_back({index.ids[i], s});
    }
    sort_and_truncate(ranking, k);
    return ranking;
}

void save_dense_index(const DenseIndex& index, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot write " + path);
    char buf[32];
    for (std::size_t i = 0; i < index.ids.size(); ++i) {
        out << index.ids[i];
        for (std::size_t j = 0; j < index.embeddings.cols(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", index.embeddings.at(i, j));
            out << '\t' << buf;
        }
        out << '\n';
    }
}

DenseIndex load_dense_index(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot read " + path);
    std::vector<std::string> ids;
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    std::set<std::string> seen;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream f(line);
        std::string id, field;
        if (!std::getline(f, id, '\t'))
            throw data_error(path + ":" + std::to_string(line_no) + ": missing id");
        if (!seen.insert(id).second)
            throw data_error(path + ":" + std::to_string(line_no) +
                             ": duplicate document id " + id);
        std::vector<double> row;
        while (std::getline(f, field, '\t')) {
            try {
                row.push_back(std::stod(field));
            } catch (const std::exception&) {
                throw data_error(path + ":" + std::to_string(line_no) +
                                 ": bad number `" + field + "`");
            }
        }
        if (row.empty() || (!rows.empty() && row.size() != rows[0].size()))
            throw data_error(path + ":" + std::to_string(line_no) +
                             ": inconsistent embedding width");
        ids.push_back(id);
        rows.push_back(std::move(row));
    }
    if (ids.empty()) throw data_error(path + ": empty dense index");
    DenseIndex index;
    index.ids = std::move(ids);
    index.embeddings = Tensor::zeros({rows.size(), rows[0].size()});
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            index.embeddings.at(i, j) = rows[i][j];
    return index;
}

} // namespace graphdoc

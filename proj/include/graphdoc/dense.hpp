#pragma once

#include <string>
#include <vector>

#include "graphdoc/document.hpp"
#include "graphdoc/model.hpp"
#include "graphdoc/tensor.hpp"
#include "graphdoc/trec.hpp"

namespace graphdoc {

/// Doc ids with their embedding rows, aligned by position.
struct DenseIndex {
    std::vector<std::string> ids;
    Tensor embeddings; // [M x d]
};

/// Encodes every document (inference truncation budget). Rows may be
/// computed on `threads` workers; the result is identical either way.
DenseIndex build_dense_index(const GraphDocModel& model, const Corpus& corpus,
                             std::size_t threads = 1);

/// Exhaustive top-k by dot product, ties broken by ascending doc id.
Ranking dense_search(const DenseIndex& index, const Tensor& query_vec, std::size_t k);

/// TSV `id<TAB>v0<TAB>v1...` with round-trippable float formatting.
void save_dense_index(const DenseIndex& index, const std::string& path);
DenseIndex load_dense_index(const std::string& path);

} // namespace graphdoc

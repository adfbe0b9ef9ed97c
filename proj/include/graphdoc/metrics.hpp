#pragma once

#include <cstddef>

#include "graphdoc/trec.hpp"

namespace graphdoc {

/// nDCG gain: the raw grade (trec_eval convention) or 2^grade - 1.
enum class NdcgGain { Grade, Exp };

/// All metrics are means over the union of query ids in the run and the
/// qrels; a query with no relevant documents contributes 0.
double precision_at_k(const Run& run, const Qrels& qrels, std::size_t k);
double mrr_at_k(const Run& run, const Qrels& qrels, std::size_t k);
double ndcg_at_k(const Run& run, const Qrels& qrels, std::size_t k,
                 NdcgGain gain = NdcgGain::Grade);

} // namespace graphdoc

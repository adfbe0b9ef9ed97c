#pragma once

#include <functional>
#include <string>

#include "graphdoc/trec.hpp"

namespace graphdoc {

/// Per-query, per-system min-max normalization before averaging, or raw
/// score averaging.
enum class FusionNorm { MinMax, Raw };

/// fused = w * dense + (1 - w) * bm25 over the per-query candidate union;
/// a candidate missing from one system takes that system's minimum score.
Run fuse(const Run& dense, const Run& bm25, double w, std::size_t k,
         FusionNorm norm = FusionNorm::MinMax, const std::string& tag = "fused");

using RunMetric = std::function<double(const Run&)>;

/// Best weight on a {0, step, 2*step, ..., 1} grid; ties go to the smaller
/// weight. `metric` evaluates a fused run (qrels already bound).
double tune_fusion_weight(const Run& dense, const Run& bm25, const RunMetric& metric,
                          std::size_t k, double step = 0.05,
                          FusionNorm norm = FusionNorm::MinMax);

} // namespace graphdoc

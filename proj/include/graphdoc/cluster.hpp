#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "graphdoc/document.hpp"
#include "graphdoc/model.hpp"
#include "graphdoc/tensor.hpp"

namespace graphdoc {

struct ClusterAssignment {
    std::vector<std::size_t> assignments;
    Tensor centroids; // [k x d]
    double inertia = 0.0;
    std::vector<double> inertia_history; // one entry per assignment pass
};

/// Lloyd's algorithm with k-means++ seeding; empty clusters are reseeded to
/// the point farthest from its centroid. Deterministic for a fixed seed.
ClusterAssignment kmeans(const Tensor& points, std::size_t k,
                         std::size_t max_iters = 100, std::uint64_t seed = 0);

/// Nearest-centroid assignment (L2, ties to the lower centroid index).
std::vector<std::size_t> assign_to_centroids(const Tensor& centroids,
                                             const Tensor& points);

enum class NmiNorm { Sqrt, Arithmetic };

/// Normalized mutual information between a clustering and string labels
/// (natural logs). If both entropies vanish the partitions coincide and the
/// score is 1; if only one vanishes it is 0.
double nmi(const std::vector<std::size_t>& clusters,
           const std::vector<std::string>& labels, NmiNorm norm = NmiNorm::Sqrt);

/// Fraction of items covered by each cluster's majority label.
double purity(const std::vector<std::size_t>& clusters,
              const std::vector<std::string>& labels);

struct ClusterScores {
    double nmi = 0.0;
    double purity = 0.0;
};

struct ClusterEvalOptions {
    std::size_t k = 0; // 0 = number of distinct train labels
    std::size_t max_iters = 100;
    std::uint64_t seed = 0;
    bool normalize_embeddings = false; // L2-normalize before clustering
    std::size_t threads = 1;
};

/// Fits k-means on the train-corpus embeddings, assigns the test corpus to
/// the fitted centroids and scores against the test labels (labels are
/// never seen by the clustering itself).
ClusterScores cluster_eval(const GraphDocModel& model, const Corpus& train,
                           const Corpus& test, const ClusterEvalOptions& opts = {});

} // namespace graphdoc

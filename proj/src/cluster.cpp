#include "graphdoc/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "graphdoc/dense.hpp"
#include "graphdoc/error.hpp"
#include "graphdoc/rng.hpp"

namespace graphdoc {

namespace {

double sq_dist(const Tensor& a, std::size_t i, const Tensor& b, std::size_t j) {
    double s = 0.0;
    for (std::size_t c = 0; c < a.cols(); ++c) {
        const double d = a.at(i, c) - b.at(j, c);
        s += d * d;
    }
    return s;
}

} // namespace

std::vector<std::size_t> assign_to_centroids(const Tensor& centroids,
                                             const Tensor& points) {
    if (centroids.cols() != points.cols())
        throw dim_error("cluster: centroid and point dimensions differ");
    std::vector<std::size_t> out(points.rows());
    for (std::size_t i = 0; i < points.rows(); ++i) {
        std::size_t best = 0;
        double best_d = sq_dist(points, i, centroids, 0);
        for (std::size_t j = 1; j < centroids.rows(); ++j) {
            const double d = sq_dist(points, i, centroids, j);
            if (d < best_d) {
                best_d = d;
                best = j;
            }
        }
        out[i] = best;
    }
    return out;
}

ClusterAssignment kmeans(const Tensor& points, std::size_t k, std::size_t max_iters,
                         std::uint64_t seed) {
    const std::size_t m = points.rows(), d = points.cols();
    if (k < 1) throw usage_error("kmeans: k must be at least 1");
    if (m < k)
        throw data_error("kmeans: " + std::to_string(m) + " points for k = " +
                         std::to_string(k));

    Rng rng(seed);
    ClusterAssignment res;
    res.centroids = Tensor::zeros({k, d});

    // k-means++ seeding.
    std::vector<std::size_t> chosen;
    chosen.push_back(static_cast<std::size_t>(rng.uniform_int(m)));
    std::vector<double> dist2(m, 0.0);
    while (chosen.size() < k) {
        double total = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            double best = sq_dist(points, i, points, chosen[0]);
            for (std::size_t j = 1; j < chosen.size(); ++j)
                best = std::min(best, sq_dist(points, i, points, chosen[j]));
            dist2[i] = best;
            total += best;
        }
        if (total == 0.0) {
            chosen.push_back(static_cast<std::size_t>(rng.uniform_int(m)));
            continue;
        }
        const double r = rng.uniform() * total;
        double acc = 0.0;
        std::size_t pick = m - 1;
        for (std::size_t i = 0; i < m; ++i) {
            acc += dist2[i];
            if (r < acc) {
                pick = i;
                break;
            }
        }
        chosen.push_back(pick);
    }
    for (std::size_t j = 0; j < k; ++j)
        for (std::size_t c = 0; c < d; ++c)
            res.centroids.at(j, c) = points.at(chosen[j], c);

    std::vector<std::size_t> assign;
    for (std::size_t iter = 0; iter < max_iters; ++iter) {
        std::vector<std::size_t> next = assign_to_centroids(res.centroids, points);
        double inertia = 0.0;
        for (std::size_t i = 0; i < m; ++i)
            inertia += sq_dist(points, i, res.centroids, next[i]);
        res.inertia_history.push_back(inertia);
        res.inertia = inertia;
        const bool stable = iter > 0 && next == assign;
        assign = std::move(next);
        if (stable) break;

        // Recompute centroids as cluster means.
        Tensor sums = Tensor::zeros({k, d});
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < m; ++i) {
            ++counts[assign[i]];
            for (std::size_t c = 0; c < d; ++c)
                sums.at(assign[i], c) += points.at(i, c);
        }
        for (std::size_t j = 0; j < k; ++j) {
            if (counts[j] == 0) continue;
            for (std::size_t c = 0; c < d; ++c)
                res.centroids.at(j, c) = sums.at(j, c) / static_cast<double>(counts[j]);
        }
        // Empty clusters grab the point farthest from its own centroid.
        for (std::size_t j = 0; j < k; ++j) {
            if (counts[j] != 0) continue;
            std::size_t far = 0;
            double far_d = -1.0;
            for (std::size_t i = 0; i < m; ++i) {
                const double dd = sq_dist(points, i, res.centroids, assign[i]);
                if (dd > far_d) {
                    far_d = dd;
                    far = i;
                }
            }
            for (std::size_t c = 0; c < d; ++c)
                res.centroids.at(j, c) = points.at(far, c);
        }
    }
    res.assignments = std::move(assign);
    return res;
}

namespace {

double entropy(const std::vector<std::size_t>& counts, double total) {
    double h = 0.0;
    for (std::size_t c : counts)
        if (c > 0) {
            const double p = static_cast<double>(c) / total;
            h -= p * std::log(p);
        }
    return h;
}

void require_aligned(std::size_t a, std::size_t b, const char* where) {
    if (a != b)
        throw dim_error(std::string(where) + ": " + std::to_string(a) +
                        " cluster ids vs " + std::to_string(b) + " labels");
    if (a == 0) throw data_error(std::string(where) + ": empty input");
}

} // namespace

double nmi(const std::vector<std::size_t>& clusters,
           const std::vector<std::string>& labels, NmiNorm norm) {
    require_aligned(clusters.size(), labels.size(), "nmi");
    const double m = static_cast<double>(clusters.size());

    std::map<std::size_t, std::size_t> cluster_ids;
    for (std::size_t c : clusters) cluster_ids.emplace(c, cluster_ids.size());
    std::map<std::string, std::size_t> label_ids;
    for (const auto& l : labels) label_ids.emplace(l, label_ids.size());

    std::vector<std::size_t> nc(cluster_ids.size(), 0), nl(label_ids.size(), 0);
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> joint;
    for (std::size_t i = 0; i < clusters.size(); ++i) {
        const std::size_t ci = cluster_ids.at(clusters[i]);
        const std::size_t li = label_ids.at(labels[i]);
        ++nc[ci];
        ++nl[li];
        ++joint[{ci, li}];
    }
    const double hc = entropy(nc, m), hl = entropy(nl, m);
    if (hc == 0.0 && hl == 0.0) return 1.0; // both single-block partitions
    if (hc == 0.0 || hl == 0.0) return 0.0;

    double mi = 0.0;
    for (const auto& [cl, n] : joint) {
        const double pxy = static_cast<double>(n) / m;
        const double px = static_cast<double>(nc[cl.first]) / m;
        const double py = static_cast<double>(nl[cl.second]) / m;
        mi += pxy * std::log(pxy / (px * py));
    }
    const double denom = norm == NmiNorm::Sqrt ? std::sqrt(hc * hl) : 0.5 * (hc + hl);
    const double value = mi / denom;
    return std::clamp(value, 0.0, 1.0);
}

double purity(const std::vector<std::size_t>& clusters,
              const std::vector<std::string>& labels) {
    require_aligned(clusters.size(), labels.size(), "purity");
    std::map<std::size_t, std::map<std::string, std::size_t>> table;
    for (std::size_t i = 0; i < clusters.size(); ++i) ++table[clusters[i]][labels[i]];
    std::size_t covered = 0;
    for (const auto& [cluster, counts] : table) {
        std::size_t best = 0;
        for (const auto& [label, n] : counts) best = std::max(best, n);
        covered += best;
    }
    return static_cast<double>(covered) / static_cast<double>(clusters.size());
}

ClusterScores cluster_eval(const GraphDocModel& model, const Corpus& train,
                           const Corpus& test, const ClusterEvalOptions& opts) {
    if (train.empty() || test.empty())
        throw data_error("cluster_eval: empty corpus");
    std::set<std::string> train_labels;
    for (const Document& doc : train) train_labels.insert(doc.label);
    std::vector<std::string> test_labels;
    for (const Document& doc : test) {
        if (doc.label.empty())
            throw data_error("cluster_eval: unlabeled test document " + doc.id);
        test_labels.push_back(doc.label);
    }
    const std::size_t k = opts.k != 0 ? opts.k : train_labels.size();

    Tensor train_emb = build_dense_index(model, train, opts.threads).embeddings;
    Tensor test_emb = build_dense_index(model, test, opts.threads).embeddings;
    if (opts.normalize_embeddings) {
        for (Tensor* t : {&train_emb, &test_emb})
            for (std::size_t i = 0; i < t->rows(); ++i) {
                double n2 = 0.0;
                for (std::size_t c = 0; c < t->cols(); ++c)
                    n2 += t->at(i, c) * t->at(i, c);
                const double inv = 1.0 / std::max(std::sqrt(n2), 1e-12);
                for (std::size_t c = 0; c < t->cols(); ++c) t->at(i, c) *= inv;
            }
    }
    ClusterAssignment fit = kmeans(train_emb, k, opts.max_iters, opts.seed);
    const auto test_assign = assign_to_centroids(fit.centroids, test_emb);
    return {nmi(test_assign, test_labels), purity(test_assign, test_labels)};
}

} // namespace graphdoc

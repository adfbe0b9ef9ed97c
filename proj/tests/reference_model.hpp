#pragma once

// Test-only reference forward pass: straight-line dense arithmetic with no
// tape involvement, kept independent of the library's execution path so it
// can serve as an oracle for encode_document.

#include <cmath>
#include <vector>

#include "graphdoc/document.hpp"
#include "graphdoc/graph.hpp"
#include "graphdoc/model.hpp"
#include "graphdoc/text.hpp"

namespace refmodel {

using Matrix = std::vector<std::vector<double>>;

inline std::vector<double> ref_encode_passage(const graphdoc::ModelConfig& cfg,
                                              const graphdoc::ParamStore& ps,
                                              const std::vector<std::uint64_t>& tokens) {
    const auto& table = ps.value("encoder.token_table");
    const auto& w = ps.value("encoder.proj_w");
    const auto& b = ps.value("encoder.proj_b");
    std::vector<double> pooled(cfg.d_tok, 0.0);
    if (!tokens.empty()) {
        for (auto id : tokens)
            for (std::size_t j = 0; j < cfg.d_tok; ++j)
                pooled[j] += table.at(static_cast<std::size_t>(id), j);
        for (double& v : pooled) v /= static_cast<double>(tokens.size());
    }
    std::vector<double> out(cfg.d_model);
    for (std::size_t i = 0; i < cfg.d_model; ++i) {
        double s = b.at(i);
        for (std::size_t j = 0; j < cfg.d_tok; ++j) s += w.at(i, j) * pooled[j];
        out[i] = std::tanh(s);
    }
    return out;
}

inline Matrix ref_gat_layer(const graphdoc::ParamStore& ps, std::size_t layer,
                            std::size_t heads, const graphdoc::DocumentGraph& g,
                            const Matrix& states) {
    const std::size_t n = states.size();
    const std::size_t d_model = states[0].size();
    const std::size_t d_head = d_model / heads;
    Matrix merged(n, std::vector<double>(d_model, 0.0));
    for (std::size_t h = 0; h < heads; ++h) {
        const auto& w = ps.value(graphdoc::GraphDocModel::head_w_path(layer, h));
        const auto& a = ps.value(graphdoc::GraphDocModel::head_a_path(layer, h));
        Matrix proj(n, std::vector<double>(d_head, 0.0));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t r = 0; r < d_head; ++r)
                for (std::size_t c = 0; c < d_model; ++c)
                    proj[i][r] += states[i][c] * w.at(r, c);
        std::vector<double> u(n, 0.0), v(n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t r = 0; r < d_head; ++r) {
                u[i] += a.at(r) * proj[i][r];
                v[i] += a.at(d_head + r) * proj[i][r];
            }
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> logits(n, 0.0);
            double mx = -1e300;
            for (std::size_t j = 0; j < n; ++j) {
                if (!g.adjacent(i, j)) continue;
                double e = u[i] + v[j];
                logits[j] = e > 0 ? e : 0.2 * e;
                mx = std::max(mx, logits[j]);
            }
            double z = 0.0;
            for (std::size_t j = 0; j < n; ++j)
                if (g.adjacent(i, j)) z += std::exp(logits[j] - mx);
            for (std::size_t j = 0; j < n; ++j) {
                if (!g.adjacent(i, j)) continue;
                const double alpha = std::exp(logits[j] - mx) / z;
                for (std::size_t r = 0; r < d_head; ++r)
                    merged[i][h * d_head + r] += alpha * proj[j][r];
            }
        }
    }
    Matrix out(n, std::vector<double>(d_model));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < d_model; ++c) {
            const double e = merged[i][c];
            out[i][c] = (e > 0 ? e : std::expm1(e)) + states[i][c];
        }
    return out;
}

inline std::vector<double> ref_encode_document(const graphdoc::ModelConfig& cfg,
                                               const graphdoc::ParamStore& ps,
                                               const graphdoc::Document& doc,
                                               std::size_t max_passages) {
    const graphdoc::Document kept = doc.truncated(max_passages);
    const graphdoc::DocumentGraph g =
        graphdoc::build_graph(kept, cfg.topology, cfg.section_clique);
    const std::size_t n = kept.passage_count();
    Matrix states(n + 1, std::vector<double>(cfg.d_model, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        states[i + 1] = ref_encode_passage(
            cfg, ps, graphdoc::tokenize(kept.passage(i), cfg.vocab_buckets, cfg.max_tokens));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < cfg.d_model; ++c)
            states[0][c] += states[i + 1][c] / static_cast<double>(n);
    for (std::size_t t = 0; t < cfg.layers; ++t)
        states = ref_gat_layer(ps, t, cfg.heads, g, states);
    return states[0];
}

} // namespace refmodel

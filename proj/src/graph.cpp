#include "graphdoc/graph.hpp"

#include <vector>

#include "graphdoc/error.hpp"

namespace graphdoc {

std::size_t DocumentGraph::edge_count() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < node_count; ++i)
        for (std::size_t j = i + 1; j < node_count; ++j)
            if (adjacent(i, j)) ++n;
    return n;
}

std::size_t DocumentGraph::self_loop_count() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < node_count; ++i)
        if (adjacent(i, i)) ++n;
    return n;
}

bool DocumentGraph::symmetric() const {
    for (std::size_t i = 0; i < node_count; ++i)
        for (std::size_t j = 0; j < node_count; ++j)
            if (adjacent(i, j) != adjacent(j, i)) return false;
    return true;
}

bool DocumentGraph::connected() const {
    if (node_count == 0) return false;
    std::vector<std::uint8_t> seen(node_count, 0);
    std::vector<std::size_t> stack = {0};
    seen[0] = 1;
    std::size_t visited = 1;
    while (!stack.empty()) {
        const std::size_t i = stack.back();
        stack.pop_back();
        for (std::size_t j = 0; j < node_count; ++j) {
            if (j != i && adjacent(i, j) && !seen[j]) {
                seen[j] = 1;
                ++visited;
                stack.push_back(j);
            }
        }
    }
    return visited == node_count;
}

DocumentGraph build_graph(const Document& doc, GraphTopology topology, bool section_clique) {
    const std::size_t n = doc.passage_count();
    if (n == 0) throw data_error("build_graph: document " + doc.id + " has no passages");
    DocumentGraph g;
    g.node_count = n + 1;
    g.adj.assign(g.node_count * g.node_count, 0);
    auto connect = [&](std::size_t i, std::size_t j) {
        g.adj[i * g.node_count + j] = 1;
        g.adj[j * g.node_count + i] = 1;
    };
    for (std::size_t i = 0; i < g.node_count; ++i) connect(i, i);

    if (topology == GraphTopology::FullyConnected) {
        for (std::size_t i = 0; i < g.node_count; ++i)
            for (std::size_t j = i + 1; j < g.node_count; ++j) connect(i, j);
    } else {
        // Node index of each section's first passage, plus per-section cliques.
        std::vector<std::size_t> leads;
        std::size_t base = 1;
        for (const auto& sec : doc.sections) {
            if (sec.empty()) continue;
            leads.push_back(base);
            for (std::size_t a = 0; a < sec.size(); ++a)
                for (std::size_t b = a + 1; b < sec.size(); ++b)
                    connect(base + a, base + b);
            base += sec.size();
        }
        for (std::size_t lead : leads) connect(0, lead);
        if (section_clique)
            for (std::size_t a = 0; a < leads.size(); ++a)
                for (std::size_t b = a + 1; b < leads.size(); ++b)
                    connect(leads[a], leads[b]);
    }

    if (!g.connected())
        throw data_error("build_graph: disconnected graph for document " + doc.id);
    return g;
}

} // namespace graphdoc

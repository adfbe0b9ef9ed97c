#pragma once

#include <cstdint>
#include <vector>

#include "graphdoc/document.hpp"

namespace graphdoc {

enum class GraphTopology { FullyConnected, Section };

/// Undirected graph over a document: node 0 is the document node, nodes
/// 1..n its passages in document order. Stored as a dense symmetric
/// adjacency with self-loops on every node.
struct DocumentGraph {
    std::size_t node_count = 0;
    std::vector<std::uint8_t> adj; // row-major node_count x node_count

    bool adjacent(std::size_t i, std::size_t j) const {
        return adj[i * node_count + j] != 0;
    }

    /// Undirected edges excluding self-loops.
    std::size_t edge_count() const;
    std::size_t self_loop_count() const;
    bool symmetric() const;
    bool connected() const;

    /// Row-major (i,j) -> adjacent mask for attention over closed
    /// neighborhoods.
    const std::vector<std::uint8_t>& mask() const { return adj; }
};

/// FullyConnected: clique over all nodes. Section: passages cliqued within
/// each section; with section_clique the document node and every section's
/// first passage form a mutual clique, otherwise a star centered on the
/// document node. Self-loops everywhere.
DocumentGraph build_graph(const Document& doc, GraphTopology topology,
                          bool section_clique = true);

} // namespace graphdoc

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace graphdoc {

/// A document: ordered sections of ordered passage texts. Passages are
/// addressed by their global index in section-major order.
struct Document {
    std::string id;
    std::string label; // empty = unlabeled
    std::string title;
    std::vector<std::vector<std::string>> sections;

    std::size_t passage_count() const {
        std::size_t n = 0;
        for (const auto& s : sections) n += s.size();
        return n;
    }

    const std::string& passage(std::size_t index) const;
    std::size_t section_of(std::size_t index) const;

    /// All passages flattened in section-major order.
    std::vector<std::string> passages() const;

    /// Sub-document over the given passage indices (ascending). Section
    /// assignment is inherited; sections left empty vanish.
    Document subset(std::span<const std::size_t> indices) const;

    /// Keeps the first max_passages passages, preserving sections.
    Document truncated(std::size_t max_passages) const;
};

using Corpus = std::vector<Document>;

} // namespace graphdoc

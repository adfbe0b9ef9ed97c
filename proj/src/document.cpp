#include "graphdoc/document.hpp"

#include "graphdoc/error.hpp"

namespace graphdoc {

const std::string& Document::passage(std::size_t index) const {
    for (const auto& s : sections) {
        if (index < s.size()) return s[index];
        index -= s.size();
    }
    throw data_error("Document::passage: index out of range in " + id);
}

std::size_t Document::section_of(std::size_t index) const {
    for (std::size_t si = 0; si < sections.size(); ++si) {
        if (index < sections[si].size()) return si;
        index -= sections[si].size();
    }
    throw data_error("Document::section_of: index out of range in " + id);
}

std::vector<std::string> Document::passages() const {
    std::vector<std::string> out;
    out.reserve(passage_count());
    for (const auto& s : sections) out.insert(out.end(), s.begin(), s.end());
    return out;
}

Document Document::subset(std::span<const std::size_t> indices) const {
    Document out;
    out.id = id;
    out.label = label;
    out.title = title;
    out.sections.resize(sections.size());
    std::size_t prev = 0;
    for (std::size_t k = 0; k < indices.size(); ++k) {
        const std::size_t i = indices[k];
        if (k > 0 && i <= prev)
            throw data_error("Document::subset: indices must be strictly ascending");
        out.sections[section_of(i)].push_back(passage(i));
        prev = i;
    }
    std::erase_if(out.sections, [](const auto& s) { return s.empty(); });
    return out;
}

Document Document::truncated(std::size_t max_passages) const {
    if (passage_count() <= max_passages) return *this;
    Document out;
    out.id = id;
    out.label = label;
    out.title = title;
    std::size_t kept = 0;
    for (const auto& s : sections) {
        if (kept >= max_passages) break;
        std::vector<std::string> sec;
        for (const auto& p : s) {
            if (kept >= max_passages) break;
            sec.push_back(p);
            ++kept;
        }
        if (!sec.empty()) out.sections.push_back(std::move(sec));
    }
    return out;
}

} // namespace graphdoc

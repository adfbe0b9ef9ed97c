#pragma once

#include <string>

#include "graphdoc/document.hpp"

namespace graphdoc {

/// Reads a JSONL corpus, one document object per line:
///   {"id": str, "label"?: str, "title"?: str, "sections": [[str, ...], ...]}
/// or {"id": str, "label"?: str, "title"?: str, "text": str}
/// Raw text is packed into ~passage_target_words passages in one section;
/// section documents are taken verbatim. Input order is preserved.
Corpus load_corpus(const std::string& path, std::size_t passage_target_words = 100);

/// Writes the sections form, one object per line, deterministic bytes.
void save_corpus(const Corpus& corpus, const std::string& path);

} // namespace graphdoc

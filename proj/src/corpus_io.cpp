#include "graphdoc/corpus_io.hpp"

#include <fstream>
#include <set>
#include <string>

#include "json.hpp"

#include "graphdoc/error.hpp"
#include "graphdoc/text.hpp"

namespace graphdoc {

namespace {

using ordered_json = nlohmann::ordered_json;

[[noreturn]] void bad_line(const std::string& path, std::size_t line_no,
                           const std::string& message) {
    throw data_error(path + ":" + std::to_string(line_no) + ": " + message);
}

} // namespace

Corpus load_corpus(const std::string& path, std::size_t passage_target_words) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot read " + path);
    Corpus corpus;
    std::set<std::string> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            bad_line(path, line_no, std::string("malformed JSON: ") + e.what());
        }
        if (!obj.is_object()) bad_line(path, line_no, "expected a JSON object");
        if (!obj.contains("id") || !obj["id"].is_string())
            bad_line(path, line_no, "missing string field `id`");
        Document doc;
        doc.id = obj["id"].get<std::string>();
        if (!seen.insert(doc.id).second)
            bad_line(path, line_no, "duplicate document id `" + doc.id + "`");
        if (obj.contains("label")) {
            if (!obj["label"].is_string()) bad_line(path, line_no, "`label` must be a string");
            doc.label = obj["label"].get<std::string>();
        }
        if (obj.contains("title")) {
            if (!obj["title"].is_string()) bad_line(path, line_no, "`title` must be a string");
            doc.title = obj["title"].get<std::string>();
        }
        const bool has_sections = obj.contains("sections");
        const bool has_text = obj.contains("text");
        if (has_sections == has_text)
            bad_line(path, line_no, "need exactly one of `sections` and `text`");
        if (has_sections) {
            if (!obj["sections"].is_array())
                bad_line(path, line_no, "`sections` must be an array of string arrays");
            for (const auto& sec : obj["sections"]) {
                if (!sec.is_array())
                    bad_line(path, line_no, "`sections` must be an array of string arrays");
                std::vector<std::string> passages;
                for (const auto& p : sec) {
                    if (!p.is_string())
                        bad_line(path, line_no, "passages must be strings");
                    passages.push_back(p.get<std::string>());
                }
                doc.sections.push_back(std::move(passages));
            }
        } else {
            if (!obj["text"].is_string())
                bad_line(path, line_no, "`text` must be a string");
            doc.sections.push_back(split_into_passages(obj["text"].get<std::string>(),
                                                       passage_target_words));
        }
        bool any_content = false;
        for (const auto& sec : doc.sections)
            for (const auto& p : sec)
                if (count_words(p) > 0) any_content = true;
        if (!any_content)
            bad_line(path, line_no,
                     "document `" + doc.id + "` has no non-empty passage");
        corpus.push_back(std::move(doc));
    }
    return corpus;
}

void save_corpus(const Corpus& corpus, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot write " + path);
    for (const Document& doc : corpus) {
        ordered_json obj;
        obj["id"] = doc.id;
        if (!doc.label.empty()) obj["label"] = doc.label;
        if (!doc.title.empty()) obj["title"] = doc.title;
        obj["sections"] = doc.sections;
        out << obj.dump() << '\n';
    }
    if (!out) throw data_error("cannot write " + path);
}

} // namespace graphdoc

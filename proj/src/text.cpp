#include "graphdoc/text.hpp"

#include <cctype>

#include "graphdoc/error.hpp"

namespace graphdoc {

std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 14695981039346656037ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    return h;
}

namespace {

bool is_token_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0;
}

template <typename Emit>
void for_each_token(std::string_view text, Emit&& emit) {
    std::string token;
    for (char c : text) {
        if (is_token_char(c)) {
            token.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        } else if (!token.empty()) {
            emit(token);
            token.clear();
        }
    }
    if (!token.empty()) emit(token);
}

} // namespace

std::vector<std::uint64_t> tokenize(std::string_view text, std::size_t vocab_buckets,
                                    std::size_t max_tokens) {
    if (vocab_buckets == 0) throw usage_error("tokenize: vocab_buckets == 0");
    std::vector<std::uint64_t> ids;
    for_each_token(text, [&](const std::string& tok) {
        if (ids.size() < max_tokens) ids.push_back(fnv1a64(tok) % vocab_buckets);
    });
    return ids;
}

std::vector<std::string> tokenize_words(std::string_view text) {
    std::vector<std::string> words;
    for_each_token(text, [&](const std::string& tok) { words.push_back(tok); });
    return words;
}

std::vector<std::string> split_sentences(std::string_view text) {
    std::vector<std::string> sentences;
    std::string cur;
    bool in_terminator = false;
    auto flush = [&] {
        std::size_t b = cur.find_first_not_of(" \t\r\n");
        if (b != std::string::npos) {
            std::size_t e = cur.find_last_not_of(" \t\r\n");
            sentences.push_back(cur.substr(b, e - b + 1));
        }
        cur.clear();
    };
    for (char c : text) {
        if (in_terminator && std::isspace(static_cast<unsigned char>(c))) {
            flush();
            in_terminator = false;
            continue;
        }
        cur.push_back(c);
        if (c == '.' || c == '!' || c == '?')
            in_terminator = true;
        else if (!std::isspace(static_cast<unsigned char>(c)))
            in_terminator = false;
    }
    flush();
    return sentences;
}

std::size_t count_words(std::string_view text) {
    std::size_t n = 0;
    bool in_word = false;
    for (char c : text) {
        const bool space = std::isspace(static_cast<unsigned char>(c)) != 0;
        if (!space && !in_word) ++n;
        in_word = !space;
    }
    return n;
}

namespace {

std::vector<std::string> words_of(std::string_view text) {
    std::vector<std::string> words;
    std::string cur;
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!cur.empty()) {
                words.push_back(cur);
                cur.clear();
            }
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) words.push_back(cur);
    return words;
}

std::string join_words(const std::vector<std::string>& words, std::size_t begin,
                       std::size_t end) {
    std::string out;
    for (std::size_t i = begin; i < end; ++i) {
        if (i > begin) out.push_back(' ');
        out += words[i];
    }
    return out;
}

} // namespace

std::vector<std::string> split_into_passages(std::string_view text,
                                             std::size_t target_words) {
    if (target_words < 1) throw usage_error("split_into_passages: target_words < 1");
    std::vector<std::string> passages;
    std::vector<std::string> current; // words of the open passage

    auto close = [&] {
        if (!current.empty()) {
            passages.push_back(join_words(current, 0, current.size()));
            current.clear();
        }
    };

    for (const std::string& sentence : split_sentences(text)) {
        std::vector<std::string> words = words_of(sentence);
        if (words.empty()) continue;
        if (words.size() > 2 * target_words) {
            // Oversized sentence: emit standalone chunks of target_words.
            close();
            for (std::size_t b = 0; b < words.size(); b += target_words) {
                const std::size_t e = std::min(b + target_words, words.size());
                passages.push_back(join_words(words, b, e));
            }
            continue;
        }
        if (!current.empty() && current.size() + words.size() > target_words) close();
        current.insert(current.end(), words.begin(), words.end());
    }
    close();
    return passages;
}

} // namespace graphdoc

#include "graphdoc/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "graphdoc/error.hpp"

namespace graphdoc {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr char kMagic[4] = {'G', 'D', 'M', '1'};
constexpr std::uint32_t kVersion = 1;

void append_u32_le(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t read_u32_le(const std::string& bytes, std::size_t at) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
        v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[at + i]))
             << (8 * i);
    return v;
}

const char* topology_name(GraphTopology t) {
    return t == GraphTopology::FullyConnected ? "fully_connected" : "section";
}

GraphTopology topology_from(const std::string& name) {
    if (name == "fully_connected") return GraphTopology::FullyConnected;
    if (name == "section") return GraphTopology::Section;
    throw data_error("checkpoint: unknown topology `" + name + "`");
}

ordered_json config_json(const ModelConfig& cfg) {
    ordered_json j;
    j["d_model"] = cfg.d_model;
    j["heads"] = cfg.heads;
    j["layers"] = cfg.layers;
    j["d_tok"] = cfg.d_tok;
    j["vocab_buckets"] = cfg.vocab_buckets;
    j["max_tokens"] = cfg.max_tokens;
    j["passage_target_words"] = cfg.passage_target_words;
    j["max_passages_train"] = cfg.max_passages_train;
    j["max_passages_infer"] = cfg.max_passages_infer;
    j["topology"] = topology_name(cfg.topology);
    j["section_clique"] = cfg.section_clique;
    return j;
}

ModelConfig config_from(const nlohmann::json& j) {
    ModelConfig cfg;
    try {
        cfg.d_model = j.at("d_model").get<std::size_t>();
        cfg.heads = j.at("heads").get<std::size_t>();
        cfg.layers = j.at("layers").get<std::size_t>();
        cfg.d_tok = j.at("d_tok").get<std::size_t>();
        cfg.vocab_buckets = j.at("vocab_buckets").get<std::size_t>();
        cfg.max_tokens = j.at("max_tokens").get<std::size_t>();
        cfg.passage_target_words = j.at("passage_target_words").get<std::size_t>();
        cfg.max_passages_train = j.at("max_passages_train").get<std::size_t>();
        cfg.max_passages_infer = j.at("max_passages_infer").get<std::size_t>();
        cfg.topology = topology_from(j.at("topology").get<std::string>());
        cfg.section_clique = j.at("section_clique").get<bool>();
    } catch (const nlohmann::json::exception& e) {
        throw data_error(std::string("checkpoint: bad config header: ") + e.what());
    }
    return cfg;
}

} // namespace

void save_checkpoint(const GraphDocModel& model, const std::string& path) {
    const ParamStore& ps = model.params();
    if (ps.values.empty()) throw data_error("checkpoint: model has no parameters");

    ordered_json manifest = ordered_json::array();
    std::string payload;
    std::size_t offset = 0; // in elements
    for (const auto& [param_path, t] : ps.values) {
        ordered_json entry;
        entry["path"] = param_path;
        entry["shape"] = t.shape;
        entry["offset"] = offset;
        manifest.push_back(std::move(entry));
        for (double x : t.data)
            append_u32_le(payload, std::bit_cast<std::uint32_t>(static_cast<float>(x)));
        offset += t.size();
    }
    ordered_json header;
    header["config"] = config_json(model.config());
    header["params"] = std::move(manifest);
    const std::string header_bytes = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot write " + path);
    std::string prefix(kMagic, 4);
    append_u32_le(prefix, kVersion);
    append_u32_le(prefix, static_cast<std::uint32_t>(header_bytes.size()));
    out.write(prefix.data(), static_cast<std::streamsize>(prefix.size()));
    out.write(header_bytes.data(), static_cast<std::streamsize>(header_bytes.size()));
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!out) throw data_error("cannot write " + path);
}

GraphDocModel load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot read " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
    if (bytes.size() < 12 || bytes.compare(0, 4, kMagic, 4) != 0)
        throw data_error("checkpoint: " + path + " is not a checkpoint file (bad magic)");
    const std::uint32_t version = read_u32_le(bytes, 4);
    if (version != kVersion)
        throw data_error("checkpoint: unsupported version " + std::to_string(version));
    const std::size_t header_len = read_u32_le(bytes, 8);
    if (bytes.size() < 12 + header_len)
        throw data_error("checkpoint: truncated header in " + path);
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.substr(12, header_len));
    } catch (const nlohmann::json::parse_error& e) {
        throw data_error(std::string("checkpoint: malformed header: ") + e.what());
    }
    if (!header.contains("config") || !header.contains("params"))
        throw data_error("checkpoint: header lacks config or parameter manifest");

    GraphDocModel model(config_from(header["config"]), 0);
    ParamStore& ps = model.params();

    std::size_t total_elems = 0;
    std::size_t manifest_entries = 0;
    const std::size_t payload_at = 12 + header_len;
    for (const auto& entry : header["params"]) {
        std::string param_path;
        std::vector<std::size_t> shape;
        std::size_t elem_offset = 0;
        try {
            param_path = entry.at("path").get<std::string>();
            shape = entry.at("shape").get<std::vector<std::size_t>>();
            elem_offset = entry.at("offset").get<std::size_t>();
        } catch (const nlohmann::json::exception& e) {
            throw data_error(std::string("checkpoint: bad manifest entry: ") + e.what());
        }
        if (!ps.has(param_path))
            throw data_error("checkpoint: parameter " + param_path +
                             " does not belong to the declared config");
        Tensor& t = ps.value(param_path);
        if (t.shape != shape)
            throw data_error("checkpoint: shape mismatch for " + param_path);
        const std::size_t at = payload_at + elem_offset * 4;
        if (at + t.size() * 4 > bytes.size())
            throw data_error("checkpoint: payload too short for " + param_path);
        for (std::size_t i = 0; i < t.size(); ++i)
            t.data[i] = static_cast<double>(
                std::bit_cast<float>(read_u32_le(bytes, at + i * 4)));
        total_elems += t.size();
        ++manifest_entries;
    }
    if (manifest_entries != ps.values.size())
        throw data_error("checkpoint: manifest covers " +
                         std::to_string(manifest_entries) + " of " +
                         std::to_string(ps.values.size()) + " model parameters");
    if (payload_at + total_elems * 4 != bytes.size())
        throw data_error("checkpoint: payload holds " +
                         std::to_string(bytes.size() - payload_at) +
                         " bytes, manifest needs " + std::to_string(total_elems * 4));
    return model;
}

} // namespace graphdoc

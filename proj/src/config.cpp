#include "graphdoc/config.hpp"

#include <algorithm>
#include <fstream>

#include "graphdoc/error.hpp"

namespace graphdoc {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

[[noreturn]] void bad_value(const std::string& section, const std::string& key,
                            const std::string& value, const char* expected) {
    throw usage_error("config: [" + section + "] " + key + ": expected " + expected +
                      ", got `" + value + "`");
}

} // namespace

const std::vector<std::string>& Config::section_order() {
    static const std::vector<std::string> order = {"model", "pretrain", "finetune",
                                                   "retrieval", "eval"};
    return order;
}

Config Config::defaults() {
    Config c;
    const ModelConfig m;
    auto& model = c.values_["model"];
    model["seed"] = "0";
    model["d_model"] = std::to_string(m.d_model);
    model["heads"] = std::to_string(m.heads);
    model["layers"] = std::to_string(m.layers);
    model["d_tok"] = std::to_string(m.d_tok);
    model["vocab_buckets"] = std::to_string(m.vocab_buckets);
    model["max_tokens"] = std::to_string(m.max_tokens);
    model["passage_target_words"] = std::to_string(m.passage_target_words);
    model["max_passages_train"] = std::to_string(m.max_passages_train);
    model["max_passages_infer"] = std::to_string(m.max_passages_infer);
    model["topology"] = "fully_connected";
    model["section_clique"] = "true";

    const PretrainConfig p;
    auto& pre = c.values_["pretrain"];
    pre["seed"] = "0";
    pre["mode"] = "even";
    pre["one_sided"] = "false";
    pre["batch_size"] = std::to_string(p.batch_size);
    pre["epochs"] = std::to_string(p.epochs);
    pre["base_lr"] = "5e-5";
    pre["warmup_rate"] = "0.1";
    pre["weight_decay"] = "0";
    pre["schedule"] = "linear";
    pre["max_passages"] = std::to_string(p.max_passages);
    pre["first_passage_prob"] = "0.5";
    pre["cosine"] = "false";
    pre["temp"] = "1";
    pre["checkpoint_every"] = "0";

    const ClassificationConfig f;
    auto& fin = c.values_["finetune"];
    fin["seed"] = "0";
    fin["batch_size"] = std::to_string(f.batch_size);
    fin["epochs"] = std::to_string(f.epochs);
    fin["base_lr"] = "1e-4";
    fin["warmup_rate"] = "0.1";
    fin["weight_decay"] = "0.01";
    fin["schedule"] = "linear";
    fin["val_fraction"] = "0.1";
    fin["freeze_encoder"] = "false";

    const RetrievalFinetuneConfig r;
    auto& ret = c.values_["retrieval"];
    ret["seed"] = "0";
    ret["k1"] = "0.9";
    ret["b"] = "0.4";
    ret["batch_size"] = std::to_string(r.batch_size);
    ret["epochs"] = std::to_string(r.epochs);
    ret["base_lr"] = "5e-5";
    ret["warmup_rate"] = "0.1";
    ret["weight_decay"] = "0";
    ret["schedule"] = "linear";
    ret["negative_pool"] = std::to_string(r.negative_pool);

    auto& ev = c.values_["eval"];
    ev["seed"] = "0";
    ev["k"] = "10";
    ev["gain"] = "grade";
    ev["nmi_norm"] = "sqrt";
    ev["clusters"] = "0";
    ev["max_iters"] = "100";
    ev["normalize_embeddings"] = "false";
    ev["fusion_step"] = "0.05";
    return c;
}

Config Config::load(const std::string& path) {
    Config c = defaults();
    c.apply_file(path);
    return c;
}

void Config::apply_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot read " + path);
    std::string line, section;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']')
                throw usage_error(path + ":" + std::to_string(line_no) +
                                  ": malformed section header");
            section = trim(t.substr(1, t.size() - 2));
            if (!values_.count(section))
                throw usage_error(path + ":" + std::to_string(line_no) +
                                  ": unknown section [" + section + "]");
            continue;
        }
        const std::size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw usage_error(path + ":" + std::to_string(line_no) +
                              ": expected key = value");
        if (section.empty())
            throw usage_error(path + ":" + std::to_string(line_no) +
                              ": key outside of any section");
        set(section, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
}

void Config::set(const std::string& section, const std::string& key,
                 const std::string& value) {
    auto sec = values_.find(section);
    if (sec == values_.end())
        throw usage_error("config: unknown section [" + section + "]");
    auto it = sec->second.find(key);
    if (it == sec->second.end())
        throw usage_error("config: unknown key `" + key + "` in [" + section + "]");
    it->second = value;
}

void Config::set_dotted(const std::string& dotted, const std::string& value) {
    const std::size_t dot = dotted.find('.');
    if (dot == std::string::npos)
        throw usage_error("config: override `" + dotted +
                          "` must look like section.key");
    set(dotted.substr(0, dot), dotted.substr(dot + 1), value);
}

void Config::set_all_seeds(std::uint64_t seed) {
    for (auto& [section, keys] : values_) keys["seed"] = std::to_string(seed);
}

const std::string& Config::get(const std::string& section,
                               const std::string& key) const {
    auto sec = values_.find(section);
    if (sec == values_.end())
        throw usage_error("config: unknown section [" + section + "]");
    auto it = sec->second.find(key);
    if (it == sec->second.end())
        throw usage_error("config: unknown key `" + key + "` in [" + section + "]");
    return it->second;
}

std::size_t Config::get_size(const std::string& section, const std::string& key) const {
    return static_cast<std::size_t>(get_u64(section, key));
}

std::uint64_t Config::get_u64(const std::string& section, const std::string& key) const {
    const std::string& v = get(section, key);
    try {
        std::size_t used = 0;
        const std::uint64_t n = std::stoull(v, &used);
        if (used != v.size() || v[0] == '-') bad_value(section, key, v, "a count");
        return n;
    } catch (const std::logic_error&) {
        bad_value(section, key, v, "a count");
    }
}

double Config::get_double(const std::string& section, const std::string& key) const {
    const std::string& v = get(section, key);
    try {
        std::size_t used = 0;
        const double x = std::stod(v, &used);
        if (used != v.size()) bad_value(section, key, v, "a number");
        return x;
    } catch (const std::logic_error&) {
        bad_value(section, key, v, "a number");
    }
}

bool Config::get_bool(const std::string& section, const std::string& key) const {
    const std::string& v = get(section, key);
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    bad_value(section, key, v, "true or false");
}

std::string Config::resolved() const {
    std::string out;
    for (const std::string& section : section_order()) {
        out += "[" + section + "]\n";
        for (const auto& [key, value] : values_.at(section))
            out += key + " = " + value + "\n";
        out += "\n";
    }
    return out;
}

std::vector<std::string> Config::keys(const std::string& section) const {
    auto sec = values_.find(section);
    if (sec == values_.end())
        throw usage_error("config: unknown section [" + section + "]");
    std::vector<std::string> out;
    for (const auto& [key, value] : sec->second) out.push_back(key);
    return out;
}

ModelConfig Config::model() const {
    ModelConfig m;
    m.d_model = get_size("model", "d_model");
    m.heads = get_size("model", "heads");
    m.layers = get_size("model", "layers");
    m.d_tok = get_size("model", "d_tok");
    m.vocab_buckets = get_size("model", "vocab_buckets");
    m.max_tokens = get_size("model", "max_tokens");
    m.passage_target_words = get_size("model", "passage_target_words");
    m.max_passages_train = get_size("model", "max_passages_train");
    m.max_passages_infer = get_size("model", "max_passages_infer");
    const std::string& topo = get("model", "topology");
    if (topo == "fully_connected") m.topology = GraphTopology::FullyConnected;
    else if (topo == "section") m.topology = GraphTopology::Section;
    else bad_value("model", "topology", topo, "fully_connected or section");
    m.section_clique = get_bool("model", "section_clique");
    return m;
}

namespace {

LrSchedule schedule_from(const Config& c, const std::string& section) {
    const std::string& s = c.get(section, "schedule");
    if (s == "constant") return LrSchedule::Constant;
    if (s == "linear") return LrSchedule::LinearDecay;
    bad_value(section, "schedule", s, "constant or linear");
}

} // namespace

SplitMode Config::pretrain_mode() const {
    const std::string& m = get("pretrain", "mode");
    if (m == "even") return SplitMode::Even;
    if (m == "ict") return SplitMode::Ict;
    bad_value("pretrain", "mode", m, "even or ict");
}

PretrainConfig Config::pretrain() const {
    PretrainConfig p;
    p.split = pretrain_mode();
    p.one_sided = get_bool("pretrain", "one_sided");
    p.batch_size = get_size("pretrain", "batch_size");
    p.epochs = get_size("pretrain", "epochs");
    p.base_lr = get_double("pretrain", "base_lr");
    p.warmup_rate = get_double("pretrain", "warmup_rate");
    p.weight_decay = get_double("pretrain", "weight_decay");
    p.schedule = schedule_from(*this, "pretrain");
    p.max_passages = get_size("pretrain", "max_passages");
    p.first_passage_prob = get_double("pretrain", "first_passage_prob");
    p.score.cosine = get_bool("pretrain", "cosine");
    p.score.temp = get_double("pretrain", "temp");
    p.seed = get_u64("pretrain", "seed");
    p.checkpoint_every = get_size("pretrain", "checkpoint_every");
    return p;
}

ClassificationConfig Config::finetune() const {
    ClassificationConfig f;
    f.batch_size = get_size("finetune", "batch_size");
    f.epochs = get_size("finetune", "epochs");
    f.base_lr = get_double("finetune", "base_lr");
    f.warmup_rate = get_double("finetune", "warmup_rate");
    f.weight_decay = get_double("finetune", "weight_decay");
    f.schedule = schedule_from(*this, "finetune");
    f.val_fraction = get_double("finetune", "val_fraction");
    f.freeze_encoder = get_bool("finetune", "freeze_encoder");
    f.seed = get_u64("finetune", "seed");
    return f;
}

RetrievalFinetuneConfig Config::retrieval() const {
    RetrievalFinetuneConfig r;
    r.batch_size = get_size("retrieval", "batch_size");
    r.epochs = get_size("retrieval", "epochs");
    r.base_lr = get_double("retrieval", "base_lr");
    r.warmup_rate = get_double("retrieval", "warmup_rate");
    r.weight_decay = get_double("retrieval", "weight_decay");
    r.schedule = schedule_from(*this, "retrieval");
    r.negative_pool = get_size("retrieval", "negative_pool");
    r.seed = get_u64("retrieval", "seed");
    return r;
}

Bm25Params Config::bm25() const {
    Bm25Params b;
    b.k1 = get_double("retrieval", "k1");
    b.b = get_double("retrieval", "b");
    return b;
}

NdcgGain Config::eval_gain() const {
    const std::string& g = get("eval", "gain");
    if (g == "grade") return NdcgGain::Grade;
    if (g == "exp") return NdcgGain::Exp;
    bad_value("eval", "gain", g, "grade or exp");
}

NmiNorm Config::eval_nmi_norm() const {
    const std::string& n = get("eval", "nmi_norm");
    if (n == "sqrt") return NmiNorm::Sqrt;
    if (n == "arithmetic") return NmiNorm::Arithmetic;
    bad_value("eval", "nmi_norm", n, "sqrt or arithmetic");
}

} // namespace graphdoc

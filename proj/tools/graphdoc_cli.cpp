// graphdoc: single entry point for corpus generation, pretraining,
// finetuning, retrieval, clustering and diagnostics. Every subcommand is
// deterministic for a fixed config + seed and echoes the effective
// configuration into its output directory as config.resolved.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "graphdoc/bm25.hpp"
#include "graphdoc/checkpoint.hpp"
#include "graphdoc/classify.hpp"
#include "graphdoc/cluster.hpp"
#include "graphdoc/config.hpp"
#include "graphdoc/contrastive.hpp"
#include "graphdoc/corpus_io.hpp"
#include "graphdoc/dense.hpp"
#include "graphdoc/error.hpp"
#include "graphdoc/fusion.hpp"
#include "graphdoc/gradcheck.hpp"
#include "graphdoc/metrics.hpp"
#include "graphdoc/model.hpp"
#include "graphdoc/retrieval_train.hpp"
#include "graphdoc/synthetic.hpp"
#include "graphdoc/trec.hpp"

using namespace graphdoc;

namespace {

// ------------------------------------------------------------- plumbing

struct ConfigArgs {
    std::string file;
    std::optional<std::uint64_t> seed;
    std::vector<std::pair<std::string, std::string>> overrides;
};

std::string g_cmdline; // echoed into config.resolved

void add_config_options(CLI::App* cmd, ConfigArgs& args) {
    cmd->add_option("--config", args.file, "configuration file (key = value sections)");
    cmd->add_option_function<std::uint64_t>(
        "--seed", [&args](std::uint64_t s) { args.seed = s; },
        "seed written into every config section");
    const Config def = Config::defaults();
    for (const std::string& section : Config::section_order())
        for (const std::string& key : def.keys(section)) {
            const std::string dotted = section + "." + key;
            cmd->add_option_function<std::string>(
                   "--" + dotted,
                   [&args, dotted](const std::string& v) {
                       args.overrides.emplace_back(dotted, v);
                   },
                   "override [" + section + "] " + key)
                ->group("Config overrides");
        }
}

Config resolve_config(const ConfigArgs& args) {
    Config cfg = args.file.empty() ? Config::defaults() : Config::load(args.file);
    if (args.seed) cfg.set_all_seeds(*args.seed);
    for (const auto& [dotted, value] : args.overrides) cfg.set_dotted(dotted, value);
    return cfg;
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw data_error("cannot create directory " + dir + ": " + ec.message());
}

void write_text(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot write " + path);
    out << content;
    if (!out) throw data_error("cannot write " + path);
}

void echo_config(const Config& cfg, const std::string& dir) {
    write_text(dir + "/config.resolved", "# cmd: " + g_cmdline + "\n" + cfg.resolved());
}

void write_metrics(const std::string& dir,
                   const std::vector<std::pair<std::string, double>>& metrics) {
    nlohmann::ordered_json j;
    for (const auto& [name, value] : metrics) j[name] = value;
    write_text(dir + "/metrics.json", j.dump(2) + "\n");
}

GraphDocModel model_from(const Config& cfg, const std::string& ckpt_path) {
    if (ckpt_path.empty()) return GraphDocModel(cfg.model(), cfg.model_seed());
    return load_checkpoint(ckpt_path);
}

std::ofstream open_loss_log(const std::string& dir) {
    std::ofstream log(dir + "/loss.tsv", std::ios::binary);
    if (!log) throw data_error("cannot write " + dir + "/loss.tsv");
    return log;
}

/// `<name>@<k>` with name in {ndcg, p, mrr}.
struct MetricSpec {
    std::string name;
    std::size_t k = 10;
};

MetricSpec parse_metric(const std::string& text) {
    const std::size_t at = text.find('@');
    if (at == std::string::npos)
        throw usage_error("metric `" + text + "` must look like ndcg@10, p@5 or mrr@10");
    MetricSpec spec;
    spec.name = text.substr(0, at);
    if (spec.name != "ndcg" && spec.name != "p" && spec.name != "mrr")
        throw usage_error("unknown metric `" + spec.name + "` (want ndcg, p or mrr)");
    const std::string ks = text.substr(at + 1);
    try {
        std::size_t used = 0;
        spec.k = std::stoull(ks, &used);
        if (used != ks.size() || spec.k < 1) throw std::invalid_argument(ks);
    } catch (const std::logic_error&) {
        throw usage_error("metric cutoff `" + ks + "` must be a positive integer");
    }
    return spec;
}

double eval_metric(const MetricSpec& spec, const Run& run, const Qrels& qrels,
                   NdcgGain gain) {
    if (spec.name == "ndcg") return ndcg_at_k(run, qrels, spec.k, gain);
    if (spec.name == "p") return precision_at_k(run, qrels, spec.k);
    return mrr_at_k(run, qrels, spec.k);
}

Corpus load_corpus_for(const Config& cfg, const std::string& path) {
    return load_corpus(path, cfg.model().passage_target_words);
}

// ---------------------------------------------------------- subcommands

struct SynthOpts {
    ConfigArgs config;
    std::string out;
    SyntheticConfig gen;
};

void run_synth(const SynthOpts& opts) {
    Config cfg = resolve_config(opts.config);
    SyntheticConfig gen = opts.gen;
    if (opts.config.seed) gen.seed = *opts.config.seed;
    SyntheticData data = generate_synthetic(gen);
    ensure_dir(opts.out);
    save_corpus(data.train, opts.out + "/corpus.jsonl");
    if (!data.test.empty()) save_corpus(data.test, opts.out + "/test.jsonl");
    if (!data.queries.empty()) {
        save_queries(data.queries, opts.out + "/queries.tsv");
        save_qrels(data.qrels, opts.out + "/qrels.txt");
    }
    echo_config(cfg, opts.out);
    std::cout << "wrote " << data.train.size() << " train / " << data.test.size()
              << " test docs, " << data.queries.size() << " queries to " << opts.out
              << "\n";
}

struct PretrainOpts {
    ConfigArgs config;
    std::string corpus, out, mode;
};

void run_pretrain(const PretrainOpts& opts) {
    Config cfg = resolve_config(opts.config);
    if (!opts.mode.empty()) cfg.set("pretrain", "mode", opts.mode);
    const Corpus corpus = load_corpus_for(cfg, opts.corpus);
    GraphDocModel model(cfg.model(), cfg.model_seed());
    ensure_dir(opts.out);
    std::ofstream loss_log = open_loss_log(opts.out);
    const PretrainConfig pc = cfg.pretrain();
    CheckpointFn on_checkpoint = nullptr;
    if (pc.checkpoint_every > 0)
        on_checkpoint = [&opts](std::size_t step, const GraphDocModel& m) {
            save_checkpoint(m, opts.out + "/model_step" + std::to_string(step) +
                                   ".ckpt");
        };
    PretrainResult res = pretrain(corpus, model, pc, &loss_log, on_checkpoint);
    save_checkpoint(model, opts.out + "/model.ckpt");
    echo_config(cfg, opts.out);
    std::cout << "pretrained " << res.losses.size() << " steps ("
              << res.steps_per_epoch << " per epoch), final loss "
              << (res.losses.empty() ? 0.0 : res.losses.back()) << "\n";
}

struct FinetuneClsOpts {
    ConfigArgs config;
    std::string corpus, ckpt, out;
    bool freeze = false;
};

void run_finetune_cls(const FinetuneClsOpts& opts) {
    Config cfg = resolve_config(opts.config);
    if (opts.freeze) cfg.set("finetune", "freeze_encoder", "true");
    const Corpus corpus = load_corpus_for(cfg, opts.corpus);
    std::set<std::string> distinct;
    for (const Document& doc : corpus) {
        if (doc.label.empty())
            throw data_error("document " + doc.id + " has no label");
        distinct.insert(doc.label);
    }
    GraphDocModel model = model_from(cfg, opts.ckpt);
    const ClassificationConfig fc = cfg.finetune();
    ClassifierHead head = ClassifierHead::init({distinct.begin(), distinct.end()},
                                               model.config().d_model);
    ensure_dir(opts.out);
    std::ofstream loss_log = open_loss_log(opts.out);
    ClassificationResult res = finetune_classification(model, head, corpus, fc,
                                                       &loss_log);
    save_checkpoint(model, opts.out + "/model.ckpt");
    save_classifier_head(head, opts.out + "/head.json");
    std::string val;
    for (std::size_t e = 0; e < res.val_accuracy.size(); ++e) {
        char line[64];
        std::snprintf(line, sizeof line, "%zu\t%.10g\n", e, res.val_accuracy[e]);
        val += line;
    }
    write_text(opts.out + "/val.tsv", val);
    echo_config(cfg, opts.out);
    std::cout << "finetuned " << res.losses.size() << " steps";
    if (!res.val_accuracy.empty())
        std::cout << ", final val accuracy " << res.val_accuracy.back();
    std::cout << "\n";
}

struct EvalClsOpts {
    ConfigArgs config;
    std::string corpus, ckpt, head, out;
};

void run_eval_cls(const EvalClsOpts& opts) {
    Config cfg = resolve_config(opts.config);
    const Corpus corpus = load_corpus_for(cfg, opts.corpus);
    const GraphDocModel model = load_checkpoint(opts.ckpt);
    const ClassifierHead head = load_classifier_head(opts.head);
    std::string predictions;
    std::vector<std::string> pred_labels, gold_labels;
    for (const Document& doc : corpus) {
        const std::string label = classify_doc(model, head, doc);
        predictions += doc.id + "\t" + label + "\n";
        if (!doc.label.empty()) {
            pred_labels.push_back(label);
            gold_labels.push_back(doc.label);
        }
    }
    if (gold_labels.empty())
        throw data_error("no labeled documents in " + opts.corpus);
    ensure_dir(opts.out);
    write_text(opts.out + "/predictions.tsv", predictions);
    const double acc = accuracy(pred_labels, gold_labels);
    write_metrics(opts.out, {{"accuracy", acc}});
    echo_config(cfg, opts.out);
    std::cout << "accuracy " << acc << " over " << gold_labels.size()
              << " labeled docs\n";
}

struct FinetuneRetOpts {
    ConfigArgs config;
    std::string corpus, queries, qrels, ckpt, out;
};

void run_finetune_ret(const FinetuneRetOpts& opts) {
    Config cfg = resolve_config(opts.config);
    const Corpus corpus = load_corpus_for(cfg, opts.corpus);
    const std::vector<Query> queries = load_queries(opts.queries);
    const Qrels qrels = load_qrels(opts.qrels);
    std::vector<TrainPair> pairs;
    for (const Query& query : queries) {
        auto it = qrels.find(query.id);
        if (it == qrels.end() || it->second.empty())
            throw data_error("query " + query.id + " has no relevant documents");
        // The positive is the highest-graded document (ties: first id).
        const auto best = std::max_element(
            it->second.begin(), it->second.end(),
            [](const auto& a, const auto& b) { return a.second < b.second; });
        pairs.push_back({query.id, query.text, best->first});
    }
    GraphDocModel model = model_from(cfg, opts.ckpt);
    ensure_dir(opts.out);
    std::ofstream loss_log = open_loss_log(opts.out);
    FinetuneResult res =
        finetune_retrieval(model, corpus, pairs, qrels, cfg.retrieval(), &loss_log);
    save_checkpoint(model, opts.out + "/model.ckpt");
    echo_config(cfg, opts.out);
    std::cout << "finetuned " << res.losses.size() << " steps ("
              << res.steps_per_epoch << " per epoch)\n";
}

struct IndexBm25Opts {
    ConfigArgs config;
    std::string corpus, out;
};

void run_index_bm25(const IndexBm25Opts& opts) {
    Config cfg = resolve_config(opts.config);
    const Corpus corpus = load_corpus_for(cfg, opts.corpus);
    Bm25Index index = Bm25Index::build(corpus, cfg.bm25());
    ensure_dir(opts.out);
    index.save(opts.out + "/bm25.idx");
    echo_config(cfg, opts.out);
    std::cout << "indexed " << index.doc_count() << " docs\n";
}

struct EncodeOpts {
    ConfigArgs config;
    std::string corpus, ckpt, out;
    std::size_t threads = 1;
};

void run_encode(const EncodeOpts& opts) {
    Config cfg = resolve_config(opts.config);
    const Corpus corpus = load_corpus_for(cfg, opts.corpus);
    const GraphDocModel model = load_checkpoint(opts.ckpt);
    DenseIndex index = build_dense_index(model, corpus, opts.threads);
    ensure_dir(opts.out);
    save_dense_index(index, opts.out + "/dense.tsv");
    echo_config(cfg, opts.out);
    std::cout << "encoded " << index.ids.size() << " docs\n";
}

struct SearchOpts {
    ConfigArgs config;
    std::string system, queries, out, index_path, dense_path, ckpt, tag = "graphdoc";
    double w = 0.5;
    std::size_t k = 0; // 0 = [eval] k
    std::size_t threads = 1;
};

Run dense_run_for(const SearchOpts& opts, const std::vector<Query>& queries,
                  std::size_t k) {
    if (opts.dense_path.empty() || opts.ckpt.empty())
        throw usage_error("dense search needs --dense and --ckpt");
    const DenseIndex index = load_dense_index(opts.dense_path);
    const GraphDocModel model = load_checkpoint(opts.ckpt);
    Run run;
    run.tag = opts.tag;
    std::vector<Ranking> rankings(queries.size());
    const std::size_t workers = std::max<std::size_t>(1, opts.threads);
    auto encode_range = [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i)
            rankings[i] = dense_search(index, model.embed_query(queries[i].text), k);
    };
    if (workers == 1 || queries.size() <= 1) {
        encode_range(0, queries.size());
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (queries.size() + workers - 1) / workers;
        for (std::size_t lo = 0; lo < queries.size(); lo += chunk)
            pool.emplace_back(encode_range, lo,
                              std::min(queries.size(), lo + chunk));
        for (auto& t : pool) t.join();
    }
    for (std::size_t i = 0; i < queries.size(); ++i)
        run.by_query[queries[i].id] = std::move(rankings[i]);
    return run;
}

Run bm25_run_for(const SearchOpts& opts, const std::vector<Query>& queries,
                 std::size_t k) {
    if (opts.index_path.empty()) throw usage_error("bm25 search needs --index");
    const Bm25Index index = Bm25Index::load(opts.index_path);
    Run run;
    run.tag = opts.tag;
    for (const Query& query : queries)
        run.by_query[query.id] = index.search(query.text, k);
    return run;
}

void run_search(const SearchOpts& opts) {
    Config cfg = resolve_config(opts.config);
    const std::vector<Query> queries = load_queries(opts.queries);
    const std::size_t k = opts.k ? opts.k : cfg.get_size("eval", "k");
    Run run;
    if (opts.system == "bm25") {
        run = bm25_run_for(opts, queries, k);
    } else if (opts.system == "dense") {
        run = dense_run_for(opts, queries, k);
    } else if (opts.system == "hybrid") {
        if (opts.w < 0.0 || opts.w > 1.0)
            throw usage_error("--w must lie in [0, 1]");
        // At the endpoints the fused ranking equals a component ranking;
        // emit the component scores so the run files match exactly.
        if (opts.w == 0.0) run = bm25_run_for(opts, queries, k);
        else if (opts.w == 1.0) run = dense_run_for(opts, queries, k);
        else
            run = fuse(dense_run_for(opts, queries, k),
                       bm25_run_for(opts, queries, k), opts.w, k, FusionNorm::MinMax,
                       opts.tag);
    } else {
        throw usage_error("--system must be bm25, dense or hybrid");
    }
    ensure_dir(opts.out);
    save_run(run, opts.out + "/run.trec");
    echo_config(cfg, opts.out);
    std::cout << "ranked " << run.by_query.size() << " queries (k = " << k << ")\n";
}

struct TuneFusionOpts {
    ConfigArgs config;
    std::string dense_run, bm25_run, qrels, metric = "mrr@10";
};

void run_tune_fusion(const TuneFusionOpts& opts) {
    Config cfg = resolve_config(opts.config);
    const MetricSpec spec = parse_metric(opts.metric);
    const Run dense = load_run(opts.dense_run);
    const Run bm25 = load_run(opts.bm25_run);
    const Qrels qrels = load_qrels(opts.qrels);
    const NdcgGain gain = cfg.eval_gain();
    const double step = cfg.get_double("eval", "fusion_step");
    const RunMetric metric = [&](const Run& run) {
        return eval_metric(spec, run, qrels, gain);
    };
    const double w = tune_fusion_weight(dense, bm25, metric, spec.k, step);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g\n", w);
    std::cout << buf;
}

struct EvalRetOpts {
    ConfigArgs config;
    std::string run, qrels, metric, out;
};

void run_eval_ret(const EvalRetOpts& opts) {
    Config cfg = resolve_config(opts.config);
    const MetricSpec spec = parse_metric(opts.metric);
    const Run run = load_run(opts.run);
    const Qrels qrels = load_qrels(opts.qrels);
    const double value = eval_metric(spec, run, qrels, cfg.eval_gain());
    ensure_dir(opts.out);
    write_metrics(opts.out, {{spec.name + "@" + std::to_string(spec.k), value}});
    echo_config(cfg, opts.out);
    std::cout << opts.metric << " = " << value << "\n";
}

struct ClusterOpts {
    ConfigArgs config;
    std::string train, test, ckpt, out;
    std::size_t threads = 1;
};

void run_cluster(const ClusterOpts& opts) {
    Config cfg = resolve_config(opts.config);
    const Corpus train = load_corpus_for(cfg, opts.train);
    const Corpus test = load_corpus_for(cfg, opts.test);
    const GraphDocModel model = load_checkpoint(opts.ckpt);
    ClusterEvalOptions co;
    co.k = cfg.get_size("eval", "clusters");
    co.max_iters = cfg.get_size("eval", "max_iters");
    co.seed = cfg.get_u64("eval", "seed");
    co.normalize_embeddings = cfg.get_bool("eval", "normalize_embeddings");
    co.threads = opts.threads;
    ClusterScores scores = cluster_eval(model, train, test, co);
    ensure_dir(opts.out);
    write_metrics(opts.out, {{"nmi", scores.nmi}, {"purity", scores.purity}});
    echo_config(cfg, opts.out);
    std::cout << "nmi " << scores.nmi << ", purity " << scores.purity << "\n";
}

struct ExportEmbOpts {
    ConfigArgs config;
    std::string corpus, ckpt, out;
    std::size_t threads = 1;
};

void run_export_emb(const ExportEmbOpts& opts) {
    Config cfg = resolve_config(opts.config);
    const Corpus corpus = load_corpus_for(cfg, opts.corpus);
    const GraphDocModel model = load_checkpoint(opts.ckpt);
    DenseIndex index = build_dense_index(model, corpus, opts.threads);
    ensure_dir(opts.out);
    save_dense_index(index, opts.out + "/embeddings.tsv");
    echo_config(cfg, opts.out);
    std::cout << "exported " << index.ids.size() << " embeddings\n";
}

struct ExportAttOpts {
    ConfigArgs config;
    std::string corpus, ckpt, doc_id, out;
};

void run_export_att(const ExportAttOpts& opts) {
    Config cfg = resolve_config(opts.config);
    const Corpus corpus = load_corpus_for(cfg, opts.corpus);
    const GraphDocModel model = load_checkpoint(opts.ckpt);
    const Document* doc = nullptr;
    for (const Document& d : corpus)
        if (d.id == opts.doc_id) doc = &d;
    if (!doc) throw data_error("document " + opts.doc_id + " not in " + opts.corpus);
    const Tensor attn = model.export_attention(*doc);
    std::string csv;
    for (std::size_t i = 0; i < attn.rows(); ++i) {
        for (std::size_t j = 0; j < attn.cols(); ++j) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.17g", attn.at(i, j));
            if (j) csv += ',';
            csv += buf;
        }
        csv += '\n';
    }
    ensure_dir(opts.out);
    write_text(opts.out + "/attention.csv", csv);
    echo_config(cfg, opts.out);
    std::cout << "exported a " << attn.rows() << "x" << attn.cols()
              << " attention matrix\n";
}

struct GradcheckOpts {
    ConfigArgs config;
    double tolerance = 1e-4;
};

void run_gradcheck(const GradcheckOpts& opts) {
    // Small fixed setup: 3 documents x 4 passages through the full
    // two-sided contrastive loss, every parameter checked.
    ModelConfig mc;
    mc.d_model = 8;
    mc.heads = 2;
    mc.layers = 2;
    mc.d_tok = 4;
    mc.vocab_buckets = 64;
    mc.max_tokens = 12;
    GraphDocModel model(mc, 1);
    Corpus corpus;
    static const char* words[4] = {"alpha", "beta", "gamma", "delta"};
    for (std::size_t i = 0; i < 3; ++i) {
        Document d;
        d.id = "d" + std::to_string(i);
        d.sections.push_back({});
        for (std::size_t p = 0; p < 4; ++p)
            d.sections[0].push_back(std::string(words[(i + p) % 4]) + " " +
                                    words[(i * 2 + p) % 4] + " item" +
                                    std::to_string(i * 4 + p));
        corpus.push_back(std::move(d));
    }
    auto loss_fn = [&](Tape& tape, const ParamStore& ps) {
        GraphDocModel m = model;
        m.params() = ps;
        Rng rng(7);
        std::vector<Var> a_rows, b_rows;
        for (const Document& doc : corpus) {
            auto pair = split_even(doc, rng);
            a_rows.push_back(m.encode_document(tape, doc.subset(pair->a),
                                               EncodeMode::Train));
            b_rows.push_back(m.encode_document(tape, doc.subset(pair->b),
                                               EncodeMode::Train));
        }
        return nce_loss(tape, tape.vstack(a_rows), tape.vstack(b_rows));
    };
    ParamStore ps = model.params();
    const double err = check_gradients(loss_fn, ps);
    char buf[64];
    std::snprintf(buf, sizeof buf, "max relative error %.6g\n", err);
    std::cout << buf;
    if (!(err < opts.tolerance)) {
        char msg[96];
        std::snprintf(msg, sizeof msg, "gradient check failed: %.6g >= %.6g", err,
                      opts.tolerance);
        throw check_error(msg);
    }
}

std::string join_args(int argc, char** argv) {
    std::string s;
    for (int i = 0; i < argc; ++i) {
        if (i) s += ' ';
        s += argv[i];
    }
    return s;
}

} // namespace

int main(int argc, char** argv) {
    g_cmdline = join_args(argc, argv);
    CLI::App app{"graph-attention document representations: training, retrieval "
                 "and evaluation"};
    app.require_subcommand(1);

    SynthOpts synth;
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic topic corpus");
    synth_cmd->add_option("--out", synth.out, "output directory")->required();
    synth_cmd->add_option("--topics", synth.gen.topics, "number of topics");
    synth_cmd->add_option("--topic-vocab", synth.gen.topic_vocab, "words per topic");
    synth_cmd->add_option("--shared-vocab", synth.gen.shared_vocab,
                          "shared background words");
    synth_cmd->add_option("--train-docs", synth.gen.train_docs, "train documents");
    synth_cmd->add_option("--test-docs", synth.gen.test_docs, "test documents");
    synth_cmd->add_option("--min-passages", synth.gen.min_passages,
                          "min passages per doc");
    synth_cmd->add_option("--max-passages", synth.gen.max_passages,
                          "max passages per doc");
    synth_cmd->add_option("--words", synth.gen.words_per_passage,
                          "words per passage");
    synth_cmd->add_option("--queries", synth.gen.queries, "retrieval queries");
    synth_cmd->add_option("--topic-word-prob", synth.gen.topic_word_prob,
                          "probability of drawing a topic word");
    add_config_options(synth_cmd, synth.config);
    synth_cmd->callback([&] { run_synth(synth); });

    PretrainOpts pre;
    auto* pre_cmd = app.add_subcommand("pretrain", "contrastive pretraining");
    pre_cmd->add_option("--corpus", pre.corpus, "corpus JSONL")->required();
    pre_cmd->add_option("--out", pre.out, "output directory")->required();
    pre_cmd->add_option("--mode", pre.mode, "sub-document split: even or ict");
    add_config_options(pre_cmd, pre.config);
    pre_cmd->callback([&] { run_pretrain(pre); });

    FinetuneClsOpts fcls;
    auto* fcls_cmd = app.add_subcommand("finetune-cls",
                                        "classification finetuning");
    fcls_cmd->add_option("--corpus", fcls.corpus, "labeled corpus JSONL")->required();
    fcls_cmd->add_option("--ckpt", fcls.ckpt,
                         "initial checkpoint (default: fresh random init)");
    fcls_cmd->add_option("--out", fcls.out, "output directory")->required();
    fcls_cmd->add_flag("--freeze", fcls.freeze, "train the head only");
    add_config_options(fcls_cmd, fcls.config);
    fcls_cmd->callback([&] { run_finetune_cls(fcls); });

    EvalClsOpts ecls;
    auto* ecls_cmd = app.add_subcommand("eval-cls", "classification evaluation");
    ecls_cmd->add_option("--corpus", ecls.corpus, "labeled corpus JSONL")->required();
    ecls_cmd->add_option("--ckpt", ecls.ckpt, "model checkpoint")->required();
    ecls_cmd->add_option("--head", ecls.head, "classifier head JSON")->required();
    ecls_cmd->add_option("--out", ecls.out, "output directory")->required();
    add_config_options(ecls_cmd, ecls.config);
    ecls_cmd->callback([&] { run_eval_cls(ecls); });

    FinetuneRetOpts fret;
    auto* fret_cmd = app.add_subcommand("finetune-ret",
                                        "retrieval finetuning with staged negatives");
    fret_cmd->add_option("--corpus", fret.corpus, "corpus JSONL")->required();
    fret_cmd->add_option("--queries", fret.queries, "queries TSV")->required();
    fret_cmd->add_option("--qrels", fret.qrels, "relevance judgments")->required();
    fret_cmd->add_option("--ckpt", fret.ckpt,
                         "initial checkpoint (default: fresh random init)");
    fret_cmd->add_option("--out", fret.out, "output directory")->required();
    add_config_options(fret_cmd, fret.config);
    fret_cmd->callback([&] { run_finetune_ret(fret); });

    IndexBm25Opts ib;
    auto* ib_cmd = app.add_subcommand("index-bm25", "build a BM25 index");
    ib_cmd->add_option("--corpus", ib.corpus, "corpus JSONL")->required();
    ib_cmd->add_option("--out", ib.out, "output directory")->required();
    add_config_options(ib_cmd, ib.config);
    ib_cmd->callback([&] { run_index_bm25(ib); });

    EncodeOpts enc;
    auto* enc_cmd = app.add_subcommand("encode", "embed a corpus into a dense index");
    enc_cmd->add_option("--corpus", enc.corpus, "corpus JSONL")->required();
    enc_cmd->add_option("--ckpt", enc.ckpt, "model checkpoint")->required();
    enc_cmd->add_option("--out", enc.out, "output directory")->required();
    enc_cmd->add_option("--threads", enc.threads, "encoding workers");
    add_config_options(enc_cmd, enc.config);
    enc_cmd->callback([&] { run_encode(enc); });

    SearchOpts srch;
    auto* srch_cmd = app.add_subcommand("search", "rank queries against a corpus");
    srch_cmd->add_option("--system", srch.system, "bm25, dense or hybrid")->required();
    srch_cmd->add_option("--queries", srch.queries, "queries TSV")->required();
    srch_cmd->add_option("--out", srch.out, "output directory")->required();
    srch_cmd->add_option("--index", srch.index_path, "BM25 index file");
    srch_cmd->add_option("--dense", srch.dense_path, "dense index TSV");
    srch_cmd->add_option("--ckpt", srch.ckpt, "model checkpoint (dense/hybrid)");
    srch_cmd->add_option("--w", srch.w, "hybrid dense weight in [0, 1]");
    srch_cmd->add_option("--k", srch.k, "result depth (default: [eval] k)");
    srch_cmd->add_option("--threads", srch.threads, "query encoding workers");
    srch_cmd->add_option("--tag", srch.tag, "run tag in the output file");
    add_config_options(srch_cmd, srch.config);
    srch_cmd->callback([&] { run_search(srch); });

    TuneFusionOpts tf;
    auto* tf_cmd = app.add_subcommand("tune-fusion",
                                      "grid-search the hybrid fusion weight");
    tf_cmd->add_option("--dense-run", tf.dense_run, "dense TREC run")->required();
    tf_cmd->add_option("--bm25-run", tf.bm25_run, "BM25 TREC run")->required();
    tf_cmd->add_option("--qrels", tf.qrels, "relevance judgments")->required();
    tf_cmd->add_option("--metric", tf.metric, "tuning metric, e.g. mrr@10");
    add_config_options(tf_cmd, tf.config);
    tf_cmd->callback([&] { run_tune_fusion(tf); });

    EvalRetOpts eret;
    auto* eret_cmd = app.add_subcommand("eval-ret", "score a TREC run");
    eret_cmd->add_option("--run", eret.run, "TREC run file")->required();
    eret_cmd->add_option("--qrels", eret.qrels, "relevance judgments")->required();
    eret_cmd->add_option("--metric", eret.metric, "ndcg@k, p@k or mrr@k")->required();
    eret_cmd->add_option("--out", eret.out, "output directory")->required();
    add_config_options(eret_cmd, eret.config);
    eret_cmd->callback([&] { run_eval_ret(eret); });

    ClusterOpts clus;
    auto* clus_cmd = app.add_subcommand("cluster",
                                        "k-means over embeddings, scored on test");
    clus_cmd->add_option("--train", clus.train, "train corpus JSONL")->required();
    clus_cmd->add_option("--test", clus.test, "labeled test corpus JSONL")->required();
    clus_cmd->add_option("--ckpt", clus.ckpt, "model checkpoint")->required();
    clus_cmd->add_option("--out", clus.out, "output directory")->required();
    clus_cmd->add_option("--threads", clus.threads, "encoding workers");
    add_config_options(clus_cmd, clus.config);
    clus_cmd->callback([&] { run_cluster(clus); });

    ExportEmbOpts emb;
    auto* emb_cmd = app.add_subcommand("export-emb", "write document embeddings TSV");
    emb_cmd->add_option("--corpus", emb.corpus, "corpus JSONL")->required();
    emb_cmd->add_option("--ckpt", emb.ckpt, "model checkpoint")->required();
    emb_cmd->add_option("--out", emb.out, "output directory")->required();
    emb_cmd->add_option("--threads", emb.threads, "encoding workers");
    add_config_options(emb_cmd, emb.config);
    emb_cmd->callback([&] { run_export_emb(emb); });

    ExportAttOpts att;
    auto* att_cmd = app.add_subcommand("export-att",
                                       "write one document's attention matrix CSV");
    att_cmd->add_option("--corpus", att.corpus, "corpus JSONL")->required();
    att_cmd->add_option("--ckpt", att.ckpt, "model checkpoint")->required();
    att_cmd->add_option("--doc", att.doc_id, "document id")->required();
    att_cmd->add_option("--out", att.out, "output directory")->required();
    add_config_options(att_cmd, att.config);
    att_cmd->callback([&] { run_export_att(att); });

    GradcheckOpts gc;
    auto* gc_cmd = app.add_subcommand("gradcheck",
                                      "finite-difference check of the training loss");
    gc_cmd->add_option("--tolerance", gc.tolerance, "failure threshold");
    add_config_options(gc_cmd, gc.config);
    gc_cmd->callback([&] { run_gradcheck(gc); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    } catch (const usage_error& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const data_error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const check_error& e) {
        std::cerr << "check failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

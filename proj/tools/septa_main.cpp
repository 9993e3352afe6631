// septa command line: ingest, sample, align, build-db, answer, eval,
// ablate, sweep, gen-benchmark. Thin shell over the C API in
// include/septa/septa.h; every command honors --seed determinism and
// exits nonzero with a one-line error on failure.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <algorithm>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "septa/septa.h"

namespace {

[[noreturn]] void die() {
    std::fprintf(stderr, "error: %s\n", septa_last_error());
    std::exit(1);
}

void check(int rc) {
    if (rc != SEPTA_OK) die();
}

[[noreturn]] void die_message(const std::string& message) {
    std::fprintf(stderr, "error: %s\n", message.c_str());
    std::exit(1);
}

int resolve_threads(int flag_value) {
    if (const char* env = std::getenv("SEPTA_KIT_THREADS")) {
        int n = std::atoi(env);
        if (n >= 1) return n;
    }
    if (flag_value >= 1) return flag_value;
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

// Expands `--config FILE` into `--key=value` tokens inserted right after
// the subcommand name. Explicit flags are parsed later and take
// precedence (options keep the last value seen).
std::vector<std::string> expand_config(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    std::string config_path;
    for (size_t i = 0; i < args.size();) {
        if (args[i] == "--config") {
            if (i + 1 >= args.size()) die_message("--config needs a file argument");
            config_path = args[i + 1];
            args.erase(args.begin() + static_cast<long>(i),
                       args.begin() + static_cast<long>(i) + 2);
        } else if (args[i].rfind("--config=", 0) == 0) {
            config_path = args[i].substr(9);
            args.erase(args.begin() + static_cast<long>(i));
        } else {
            ++i;
        }
    }
    if (config_path.empty()) return args;
    if (args.empty() || args[0].rfind("-", 0) == 0)
        die_message("--config requires a subcommand");

    std::ifstream in(config_path);
    if (!in) die_message("cannot open config file: " + config_path);
    std::vector<std::string> injected;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            die_message(config_path + " line " + std::to_string(line_no) +
                        ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            die_message(config_path + " line " + std::to_string(line_no) + ": empty key");
        injected.push_back("--" + key + "=" + value);
    }
    args.insert(args.begin() + 1, injected.begin(), injected.end());
    return args;
}

struct GraphArgs {
    std::string triples;
    std::string templates;

    void attach(CLI::App* cmd) {
        cmd->add_option("--triples", triples, "Triples TSV file")->required();
        cmd->add_option("--templates", templates, "Relation templates TSV file")->required();
    }

    septa_graph* load() const {
        septa_graph* g = nullptr;
        check(septa_graph_load(triples.c_str(), templates.c_str(), &g));
        return g;
    }
};

struct SamplerArgs {
    septa_sampler_config cfg;

    explicit SamplerArgs() { septa_sampler_config_default(&cfg); }

    void attach(CLI::App* cmd, const std::string& prefix = "") {
        cmd->add_option("--" + prefix + "p", cfg.p, "Neighbor selection probability");
        cmd->add_option("--" + prefix + "depth", cfg.depth, "Max hops from the center");
        cmd->add_option("--" + prefix + "max-nodes", cfg.max_nodes, "Subgraph node cap");
        cmd->add_option("--" + prefix + "sample-seed", cfg.seed, "Sampler seed");
    }
};

struct AlignArgs {
    septa_align_config cfg;

    explicit AlignArgs() { septa_align_config_default(&cfg); }

    void attach(CLI::App* cmd) {
        cmd->add_option("--dim-text", cfg.dim_text, "Text embedder dim");
        cmd->add_option("--dim-hidden", cfg.dim_hidden, "Graph encoder dim");
        cmd->add_option("--dim-shared", cfg.dim_shared, "Projected space dim");
        cmd->add_option("--layers", cfg.layers, "Graph encoder layers");
        cmd->add_option("--batch-size", cfg.batch_size, "Alignment batch size");
        cmd->add_option("--lr", cfg.learning_rate, "Alignment learning rate");
        cmd->add_option("--epochs", cfg.epochs, "Alignment epochs");
        cmd->add_option("--temperature", cfg.temperature, "InfoNCE temperature");
        cmd->add_option("--pairs", cfg.pair_count, "Graph-text pairs to sample");
        cmd->add_option("--holdout", cfg.holdout_fraction, "Held-out fraction");
        cmd->add_option("--embed-seed", cfg.embed_seed, "Hash embedder seed");
        cmd->add_option("--max-sentences", cfg.max_sentences,
                        "Description sentence cap (0 = unlimited)");
        cmd->add_option("--seed", cfg.seed, "Training seed");
    }
};

struct FusionArgs {
    septa_fusion_config cfg;

    explicit FusionArgs() { septa_fusion_config_default(&cfg); }

    void attach(CLI::App* cmd) {
        cmd->add_option("--heads", cfg.heads, "Attention heads");
        cmd->add_option("--lambda", cfg.lambda, "Knowledge/context balance");
        cmd->add_option("--k", cfg.retrieve_k, "Retrieved subgraph vectors per query");
        cmd->add_option("--K", cfg.triplet_top_k, "Fact triplets per query");
        cmd->add_option("--fusion-lr", cfg.learning_rate, "Head learning rate");
        cmd->add_option("--fusion-epochs", cfg.epochs, "Head training epochs");
        cmd->add_option("--patience", cfg.patience, "Early stopping patience");
        cmd->add_option("--fusion-batch", cfg.batch_size, "Head batch size");
        cmd->add_option("--fusion-seed", cfg.seed, "Head training seed");
    }
};

septa_variant parse_variant(const std::string& name) {
    if (name == "full") return SEPTA_VARIANT_FULL;
    if (name == "no-alignment") return SEPTA_VARIANT_NO_ALIGNMENT;
    if (name == "no-subgraph") return SEPTA_VARIANT_NO_SUBGRAPH;
    if (name == "no-triplets") return SEPTA_VARIANT_NO_TRIPLETS;
    if (name == "lambda-1.0") return SEPTA_VARIANT_LAMBDA_ONLY;
    die_message("unknown variant '" + name +
                "' (expected full, no-alignment, no-subgraph, no-triplets, lambda-1.0)");
}

septa_model* load_model_for(const GraphArgs& graph_args, septa_graph* graph,
                            const std::string& model_path, uint64_t embed_seed) {
    septa_model* model = nullptr;
    check(septa_model_load(model_path.c_str(), embed_seed, &model));
    int32_t dim_text = 0;
    check(septa_model_dims(model, &dim_text, nullptr, nullptr));
    check(septa_graph_prepare_features(graph, dim_text, embed_seed));
    (void)graph_args;
    return model;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"septa: subgraph-retrieval engine with graph-text alignment"};
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.fallthrough(true);
    app.require_subcommand(1);
    int threads_flag = 0;
    app.add_option("--threads", threads_flag,
                   "Worker threads (default: cores; env SEPTA_KIT_THREADS overrides)");
    std::string config_doc_sink;
    auto add_config_doc = [&config_doc_sink](CLI::App* cmd) {
        cmd->add_option("--config", config_doc_sink,
                        "Config file with key = value lines (explicit flags take precedence)");
    };

    // ---- ingest -------------------------------------------------------
    auto* ingest = app.add_subcommand("ingest", "Load a graph and report its size");
    add_config_doc(ingest);
    GraphArgs ingest_graph;
    ingest_graph.attach(ingest);
    bool ingest_json = false;
    ingest->add_flag("--json", ingest_json, "Emit the summary as JSON");

    // ---- sample -------------------------------------------------------
    auto* sample = app.add_subcommand("sample", "Dump one sampled subgraph");
    add_config_doc(sample);
    GraphArgs sample_graph;
    sample_graph.attach(sample);
    SamplerArgs sample_sampler;
    sample_sampler.attach(sample);
    std::string sample_center;
    sample->add_option("--center", sample_center, "Center node uri")->required();

    // ---- align --------------------------------------------------------
    auto* align = app.add_subcommand("align", "Train the graph-text alignment model");
    add_config_doc(align);
    GraphArgs align_graph;
    align_graph.attach(align);
    AlignArgs align_cfg;
    align_cfg.attach(align);
    SamplerArgs align_sampler;
    align_sampler.attach(align);
    std::string model_out, log_out, pairs_out;
    align->add_option("--model-out", model_out, "Model file to write")->required();
    align->add_option("--log-out", log_out, "Training log (JSONL)");
    align->add_option("--pairs-out", pairs_out, "Sampled pair dataset (JSONL)");

    // ---- build-db -----------------------------------------------------
    auto* build_db = app.add_subcommand("build-db", "Build the subgraph vector database");
    add_config_doc(build_db);
    GraphArgs db_graph;
    db_graph.attach(build_db);
    SamplerArgs db_sampler;
    db_sampler.attach(build_db);
    std::string db_model_path, db_out;
    uint64_t db_embed_seed = 0;
    septa_align_config db_defaults;
    septa_align_config_default(&db_defaults);
    db_embed_seed = db_defaults.embed_seed;
    int32_t db_max_sentences = 0;
    build_db->add_option("--model", db_model_path, "Trained model file")->required();
    build_db->add_option("--db-out", db_out, "Database file to write")->required();
    build_db->add_option("--embed-seed", db_embed_seed, "Hash embedder seed");
    build_db->add_option("--max-sentences", db_max_sentences,
                         "Description sentence cap (0 = unlimited)");

    // ---- answer -------------------------------------------------------
    auto* answer = app.add_subcommand("answer", "Answer a QA file and write predictions");
    add_config_doc(answer);
    GraphArgs answer_graph;
    answer_graph.attach(answer);
    FusionArgs answer_fusion;
    answer_fusion.attach(answer);
    std::string answer_model, answer_db, answer_qa, answer_pred_out;
    std::string answer_head_in, answer_train, answer_dev, answer_head_out;
    std::string answer_variant = "full";
    uint64_t answer_embed_seed = db_defaults.embed_seed;
    answer->add_option("--model", answer_model, "Trained model file")->required();
    answer->add_option("--db", answer_db, "Database file")->required();
    answer->add_option("--qa", answer_qa, "QA file to answer")->required();
    answer->add_option("--predictions-out", answer_pred_out, "Predictions file to write")
        ->required();
    answer->add_option("--head", answer_head_in, "Trained fusion head file");
    answer->add_option("--train", answer_train, "Labeled QA file to train the head on");
    answer->add_option("--dev", answer_dev, "Labeled QA file for early stopping");
    answer->add_option("--head-out", answer_head_out, "Where to save a freshly trained head");
    answer->add_option("--variant", answer_variant, "Pipeline variant");
    answer->add_option("--embed-seed", answer_embed_seed, "Hash embedder seed");

    // ---- eval ---------------------------------------------------------
    auto* eval = app.add_subcommand("eval", "Score a predictions file against labels");
    add_config_doc(eval);
    std::string eval_qa, eval_pred;
    eval->add_option("--qa", eval_qa, "Labeled QA file")->required();
    eval->add_option("--predictions", eval_pred, "Predictions file")->required();

    // ---- ablate -------------------------------------------------------
    auto* ablate = app.add_subcommand("ablate", "Train and evaluate every ablation variant");
    add_config_doc(ablate);
    GraphArgs ablate_graph;
    ablate_graph.attach(ablate);
    AlignArgs ablate_align;
    ablate_align.attach(ablate);
    SamplerArgs ablate_pair_sampler;
    ablate_pair_sampler.attach(ablate);
    SamplerArgs ablate_db_sampler;
    ablate_db_sampler.attach(ablate, "db-");
    FusionArgs ablate_fusion;
    ablate_fusion.attach(ablate);
    std::string ablate_train, ablate_dev, ablate_test, ablate_json_out;
    int32_t ablate_db_max_sentences = 0;
    ablate->add_option("--db-max-sentences", ablate_db_max_sentences,
                       "Record description sentence cap (0 = unlimited)");
    ablate->add_option("--train", ablate_train, "Training QA file")->required();
    ablate->add_option("--dev", ablate_dev, "Dev QA file")->required();
    ablate->add_option("--test", ablate_test, "Test QA file")->required();
    ablate->add_option("--report-out", ablate_json_out, "Write the JSON report here");

    // ---- sweep --------------------------------------------------------
    auto* sweep = app.add_subcommand("sweep", "Accuracy grid over k, n, or lambda");
    add_config_doc(sweep);
    GraphArgs sweep_graph;
    sweep_graph.attach(sweep);
    AlignArgs sweep_align;
    sweep_align.attach(sweep);
    SamplerArgs sweep_pair_sampler;
    sweep_pair_sampler.attach(sweep);
    SamplerArgs sweep_db_sampler;
    sweep_db_sampler.attach(sweep, "db-");
    FusionArgs sweep_fusion;
    sweep_fusion.attach(sweep);
    std::string sweep_param, sweep_train, sweep_dev, sweep_test, sweep_csv_out;
    int32_t sweep_db_max_sentences = 0;
    sweep->add_option("--db-max-sentences", sweep_db_max_sentences,
                      "Record description sentence cap (0 = unlimited)");
    std::vector<double> sweep_values;
    sweep->add_option("--param", sweep_param, "k, n, or lambda")->required();
    sweep->add_option("--values", sweep_values, "Sweep values")
        ->required()
        ->delimiter(',')
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
    sweep->add_option("--train", sweep_train, "Training QA file")->required();
    sweep->add_option("--dev", sweep_dev, "Dev QA file")->required();
    sweep->add_option("--test", sweep_test, "Test QA file")->required();
    sweep->add_option("--csv-out", sweep_csv_out, "Write the CSV here");

    // ---- gen-benchmark --------------------------------------------------
    auto* gen = app.add_subcommand("gen-benchmark", "Generate a synthetic graph + QA set");
    add_config_doc(gen);
    septa_benchmark_config bench_cfg;
    septa_benchmark_config_default(&bench_cfg);
    std::string gen_out_dir;
    std::vector<int64_t> gen_split;
    gen->add_option("--nodes", bench_cfg.nodes, "Node count");
    gen->add_option("--relations", bench_cfg.relations, "Relation count");
    gen->add_option("--instances", bench_cfg.instances, "QA instance count");
    gen->add_option("--choices", bench_cfg.choices, "Choices per instance");
    gen->add_option("--seed", bench_cfg.seed, "Generation seed");
    gen->add_option("--out-dir", gen_out_dir, "Output directory")->required();
    gen->add_option("--split", gen_split, "train,dev,test counts")
        ->delimiter(',')
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);

    try {
        std::vector<std::string> args = expand_config(argc, argv);
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }
    const int threads = resolve_threads(threads_flag);

    if (*ingest) {
        septa_graph* g = ingest_graph.load();
        int64_t nodes = 0, relations = 0, triples = 0;
        check(septa_graph_counts(g, &nodes, &relations, &triples));
        if (ingest_json) {
            nlohmann::json j{{"nodes", nodes}, {"relations", relations}, {"triples", triples}};
            std::cout << j.dump() << "\n";
        } else {
            std::cout << "nodes: " << nodes << "\nrelations: " << relations
                      << "\ntriples: " << triples << "\n";
        }
        septa_graph_free(g);
        return 0;
    }

    if (*sample) {
        septa_graph* g = sample_graph.load();
        int64_t center = -1;
        check(septa_graph_find_node(g, sample_center.c_str(), &center));
        if (center < 0) die_message("unknown node uri '" + sample_center + "'");
        char* dump = nullptr;
        check(septa_sample_dump(g, center, &sample_sampler.cfg, &dump));
        std::cout << dump;
        septa_string_free(dump);
        septa_graph_free(g);
        return 0;
    }

    if (*align) {
        septa_graph* g = align_graph.load();
        check(septa_graph_prepare_features(g, align_cfg.cfg.dim_text, align_cfg.cfg.embed_seed));
        septa_model* model = nullptr;
        check(septa_model_train(g, &align_cfg.cfg, &align_sampler.cfg,
                                log_out.empty() ? nullptr : log_out.c_str(),
                                pairs_out.empty() ? nullptr : pairs_out.c_str(), &model));
        check(septa_model_save(model, model_out.c_str()));
        std::cout << "model written to " << model_out << "\n";
        septa_model_free(model);
        septa_graph_free(g);
        return 0;
    }

    if (*build_db) {
        septa_graph* g = db_graph.load();
        septa_model* model = load_model_for(db_graph, g, db_model_path, db_embed_seed);
        septa_database* db = nullptr;
        check(septa_db_build(g, model, &db_sampler.cfg, threads, db_max_sentences, &db));
        check(septa_db_save(db, db_out.c_str()));
        int64_t records = 0;
        check(septa_db_info(db, nullptr, &records));
        std::cout << "database written to " << db_out << " (" << records << " records)\n";
        septa_db_free(db);
        septa_model_free(model);
        septa_graph_free(g);
        return 0;
    }

    if (*answer) {
        if (answer_head_in.empty() && answer_train.empty())
            die_message("answer needs either --head or --train");
        answer_fusion.cfg.threads = threads;
        septa_variant variant = parse_variant(answer_variant);
        septa_graph* g = answer_graph.load();
        septa_model* model = load_model_for(answer_graph, g, answer_model, answer_embed_seed);
        septa_database* db = nullptr;
        check(septa_db_load(answer_db.c_str(), &db));
        septa_head* head = nullptr;
        if (!answer_head_in.empty()) {
            check(septa_head_load(answer_head_in.c_str(), &head));
        } else {
            check(septa_head_train(g, model, db, answer_train.c_str(),
                                   answer_dev.empty() ? nullptr : answer_dev.c_str(),
                                   &answer_fusion.cfg, variant, &head));
            if (!answer_head_out.empty()) check(septa_head_save(head, answer_head_out.c_str()));
        }
        check(septa_answer_file(g, model, db, head, answer_qa.c_str(), &answer_fusion.cfg,
                                variant, answer_pred_out.c_str()));
        std::cout << "predictions written to " << answer_pred_out << "\n";
        septa_head_free(head);
        septa_db_free(db);
        septa_model_free(model);
        septa_graph_free(g);
        return 0;
    }

    if (*eval) {
        double acc = 0.0;
        int64_t correct = 0, total = 0;
        check(septa_eval(eval_qa.c_str(), eval_pred.c_str(), &acc, &correct, &total));
        std::printf("accuracy: %.4f (%lld/%lld)\n", acc, static_cast<long long>(correct),
                    static_cast<long long>(total));
        return 0;
    }

    if (*ablate) {
        ablate_fusion.cfg.threads = threads;
        septa_graph* g = ablate_graph.load();
        check(septa_graph_prepare_features(g, ablate_align.cfg.dim_text,
                                           ablate_align.cfg.embed_seed));
        char* report = nullptr;
        check(septa_ablate(g, &ablate_align.cfg, &ablate_pair_sampler.cfg,
                           &ablate_db_sampler.cfg, ablate_db_max_sentences, &ablate_fusion.cfg,
                           ablate_train.c_str(), ablate_dev.c_str(), ablate_test.c_str(),
                           threads, &report));
        auto rows = nlohmann::json::parse(report);
        double full_acc = 0.0;
        for (const auto& row : rows)
            if (row["variant"] == "full") full_acc = row["test_accuracy"].get<double>();
        std::printf("%-14s %12s %12s %8s\n", "variant", "dev-acc", "test-acc", "delta");
        for (const auto& row : rows) {
            double test = row["test_accuracy"].get<double>();
            std::printf("%-14s %12.4f %12.4f %+8.4f\n",
                        row["variant"].get<std::string>().c_str(),
                        row["dev_accuracy"].get<double>(), test, test - full_acc);
        }
        if (!ablate_json_out.empty()) {
            std::ofstream out(ablate_json_out, std::ios::binary);
            if (!out) die_message("cannot open for writing: " + ablate_json_out);
            out << report << "\n";
        }
        septa_string_free(report);
        septa_graph_free(g);
        return 0;
    }

    if (*sweep) {
        sweep_fusion.cfg.threads = threads;
        septa_graph* g = sweep_graph.load();
        check(septa_graph_prepare_features(g, sweep_align.cfg.dim_text,
                                           sweep_align.cfg.embed_seed));
        char* csv = nullptr;
        check(septa_sweep(g, &sweep_align.cfg, &sweep_pair_sampler.cfg, &sweep_db_sampler.cfg,
                          sweep_db_max_sentences, &sweep_fusion.cfg, sweep_train.c_str(),
                          sweep_dev.c_str(), sweep_test.c_str(), sweep_param.c_str(),
                          sweep_values.data(), static_cast<int32_t>(sweep_values.size()),
                          threads, &csv));
        std::cout << csv;
        if (!sweep_csv_out.empty()) {
            std::ofstream out(sweep_csv_out, std::ios::binary);
            if (!out) die_message("cannot open for writing: " + sweep_csv_out);
            out << csv;
        }
        septa_string_free(csv);
        septa_graph_free(g);
        return 0;
    }

    if (*gen) {
        char* summary = nullptr;
        const int64_t* split = nullptr;
        if (!gen_split.empty()) {
            if (gen_split.size() != 3) die_message("--split needs exactly train,dev,test counts");
            split = gen_split.data();
        }
        check(septa_gen_benchmark(&bench_cfg, gen_out_dir.c_str(), split, &summary));
        std::cout << summary << "\n";
        septa_string_free(summary);
        return 0;
    }

    return 0;
}

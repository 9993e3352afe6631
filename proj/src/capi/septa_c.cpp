#include "septa/septa.h"

#include <cstring>
#include <exception>
#include <memory>
#include <string>

#include <json.hpp>

#include "core/alignment.hpp"
#include "core/benchmark.hpp"
#include "core/fusion.hpp"
#include "core/kg.hpp"
#include "core/pipeline.hpp"
#include "core/qa.hpp"
#include "core/sampler.hpp"
#include "core/textualize.hpp"
#include "core/vectordb.hpp"

struct septa_graph {
    septa::KnowledgeGraph graph;
};
struct septa_model {
    septa::AlignmentModel model;
};
struct septa_database {
    septa::VectorDatabase db;
};
struct septa_head {
    septa::FusionHead head;
};

namespace {

thread_local std::string g_last_error;

int fail(int code, const std::string& message) {
    g_last_error = message;
    return code;
}

template <typename Fn>
int guarded(Fn&& fn) {
    try {
        fn();
        g_last_error.clear();
        return SEPTA_OK;
    } catch (const std::invalid_argument& ex) {
        return fail(SEPTA_ERR_INVALID_ARGUMENT, ex.what());
    } catch (const std::out_of_range& ex) {
        return fail(SEPTA_ERR_INVALID_ARGUMENT, ex.what());
    } catch (const std::exception& ex) {
        const std::string what = ex.what();
        const bool io = what.find("cannot open") != std::string::npos ||
                        what.find("write failed") != std::string::npos ||
                        what.find("truncated") != std::string::npos;
        return fail(io ? SEPTA_ERR_IO : SEPTA_ERR_RUNTIME, what);
    } catch (...) {
        return fail(SEPTA_ERR_RUNTIME, "unknown error");
    }
}

char* dup_string(const std::string& s) {
    char* out = new char[s.size() + 1];
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

int64_t* dup_ids(const std::vector<int64_t>& ids) {
    auto* out = new int64_t[ids.empty() ? 1 : ids.size()];
    std::memcpy(out, ids.data(), ids.size() * sizeof(int64_t));
    return out;
}

void require(bool cond, const char* message) {
    if (!cond) throw std::invalid_argument(message);
}

septa::SamplerConfig to_core(const septa_sampler_config& c) {
    septa::SamplerConfig out;
    out.p = c.p;
    out.depth = c.depth;
    out.max_nodes = c.max_nodes;
    out.seed = c.seed;
    return out;
}

septa::AlignmentConfig to_core(const septa_align_config& c) {
    septa::AlignmentConfig out;
    out.batch_size = static_cast<size_t>(c.batch_size);
    out.temperature = c.temperature;
    out.learning_rate = c.learning_rate;
    out.epochs = static_cast<size_t>(c.epochs);
    out.seed = c.seed;
    out.holdout_fraction = c.holdout_fraction;
    out.pair_count = static_cast<size_t>(c.pair_count);
    out.layers = static_cast<size_t>(c.layers);
    out.dim_text = static_cast<size_t>(c.dim_text);
    out.dim_hidden = static_cast<size_t>(c.dim_hidden);
    out.dim_shared = static_cast<size_t>(c.dim_shared);
    out.embed_seed = c.embed_seed;
    out.eval_top_k = static_cast<size_t>(c.eval_top_k);
    out.max_sentences = static_cast<size_t>(c.max_sentences);
    return out;
}

septa::FusionConfig to_core(const septa_fusion_config& c) {
    septa::FusionConfig out;
    out.heads = static_cast<size_t>(c.heads);
    out.lambda = c.lambda;
    out.retrieve_k = static_cast<size_t>(c.retrieve_k);
    out.triplet_top_k = static_cast<size_t>(c.triplet_top_k);
    out.learning_rate = c.learning_rate;
    out.epochs = static_cast<size_t>(c.epochs);
    out.patience = static_cast<size_t>(c.patience);
    out.batch_size = static_cast<size_t>(c.batch_size);
    out.seed = c.seed;
    out.threads = c.threads < 1 ? 1u : static_cast<unsigned>(c.threads);
    return out;
}

septa::Variant to_core(septa_variant v) {
    switch (v) {
        case SEPTA_VARIANT_FULL: return septa::Variant::full;
        case SEPTA_VARIANT_NO_ALIGNMENT: return septa::Variant::no_alignment;
        case SEPTA_VARIANT_NO_SUBGRAPH: return septa::Variant::no_subgraph;
        case SEPTA_VARIANT_NO_TRIPLETS: return septa::Variant::no_triplets;
        case SEPTA_VARIANT_LAMBDA_ONLY: return septa::Variant::lambda_only;
    }
    throw std::invalid_argument("invalid variant value");
}

}  // namespace

extern "C" {

const char* septa_version(void) { return "0.1.0"; }

const char* septa_last_error(void) { return g_last_error.c_str(); }

void septa_string_free(char* s) { delete[] s; }
void septa_ids_free(int64_t* ids) { delete[] ids; }

void septa_sampler_config_default(septa_sampler_config* cfg) {
    if (!cfg) return;
    cfg->p = 0.5;
    cfg->depth = 2;
    cfg->max_nodes = 32;
    cfg->seed = 0;
}

void septa_align_config_default(septa_align_config* cfg) {
    if (!cfg) return;
    septa::AlignmentConfig d;
    cfg->batch_size = static_cast<int32_t>(d.batch_size);
    cfg->temperature = d.temperature;
    cfg->learning_rate = d.learning_rate;
    cfg->epochs = static_cast<int32_t>(d.epochs);
    cfg->seed = d.seed;
    cfg->holdout_fraction = d.holdout_fraction;
    cfg->pair_count = static_cast<int64_t>(d.pair_count);
    cfg->layers = static_cast<int32_t>(d.layers);
    cfg->dim_text = static_cast<int32_t>(d.dim_text);
    cfg->dim_hidden = static_cast<int32_t>(d.dim_hidden);
    cfg->dim_shared = static_cast<int32_t>(d.dim_shared);
    cfg->embed_seed = d.embed_seed;
    cfg->eval_top_k = static_cast<int32_t>(d.eval_top_k);
    cfg->max_sentences = static_cast<int32_t>(d.max_sentences);
}

void septa_fusion_config_default(septa_fusion_config* cfg) {
    if (!cfg) return;
    septa::FusionConfig d;
    cfg->heads = static_cast<int32_t>(d.heads);
    cfg->lambda = d.lambda;
    cfg->retrieve_k = static_cast<int32_t>(d.retrieve_k);
    cfg->triplet_top_k = static_cast<int32_t>(d.triplet_top_k);
    cfg->learning_rate = d.learning_rate;
    cfg->epochs = static_cast<int32_t>(d.epochs);
    cfg->patience = static_cast<int32_t>(d.patience);
    cfg->batch_size = static_cast<int32_t>(d.batch_size);
    cfg->seed = d.seed;
    cfg->threads = 1;
}

void septa_benchmark_config_default(septa_benchmark_config* cfg) {
    if (!cfg) return;
    septa::BenchmarkConfig d;
    cfg->nodes = static_cast<int64_t>(d.nodes);
    cfg->relations = static_cast<int32_t>(d.relations);
    cfg->instances = static_cast<int64_t>(d.instances);
    cfg->choices = static_cast<int32_t>(d.choices);
    cfg->seed = d.seed;
}

int septa_graph_load(const char* triples_path, const char* templates_path, septa_graph** out) {
    return guarded([&] {
        require(triples_path && templates_path && out, "null argument");
        auto handle = std::make_unique<septa_graph>();
        handle->graph = septa::KnowledgeGraph::load(triples_path, templates_path);
        *out = handle.release();
    });
}

void septa_graph_free(septa_graph* graph) { delete graph; }

int septa_graph_counts(const septa_graph* graph, int64_t* nodes, int64_t* relations,
                       int64_t* triples) {
    return guarded([&] {
        require(graph != nullptr, "null graph");
        if (nodes) *nodes = static_cast<int64_t>(graph->graph.node_count());
        if (relations) *relations = static_cast<int64_t>(graph->graph.relation_count());
        if (triples) *triples = static_cast<int64_t>(graph->graph.triple_count());
    });
}

int septa_graph_prepare_features(septa_graph* graph, int32_t dim, uint64_t embed_seed) {
    return guarded([&] {
        require(graph != nullptr, "null graph");
        require(dim >= 1, "feature dim must be >= 1");
        septa::HashTextEmbedder embedder(static_cast<size_t>(dim), embed_seed);
        graph->graph.set_features(septa::default_node_features(graph->graph, embedder));
    });
}

int septa_graph_find_node(const septa_graph* graph, const char* uri, int64_t* id) {
    return guarded([&] {
        require(graph && uri && id, "null argument");
        auto found = graph->graph.find_node(uri);
        *id = found ? *found : -1;
    });
}

int septa_graph_node_uri(const septa_graph* graph, int64_t id, char** uri) {
    return guarded([&] {
        require(graph && uri, "null argument");
        *uri = dup_string(graph->graph.node(id).uri);
    });
}

int septa_graph_link_entities(const septa_graph* graph, const char* text, int64_t** ids,
                              size_t* count) {
    return guarded([&] {
        require(graph && text && ids && count, "null argument");
        auto found = graph->graph.link_entities(text);
        *ids = dup_ids(found);
        *count = found.size();
    });
}

int septa_graph_triples_touching(const septa_graph* graph, const int64_t* entities,
                                 size_t entity_count, int64_t** triple_indices, size_t* count) {
    return guarded([&] {
        require(graph && triple_indices && count, "null argument");
        require(entities != nullptr || entity_count == 0, "null entity list");
        std::vector<int64_t> ids(entities, entities + entity_count);
        auto found = graph->graph.triples_touching(ids);
        *triple_indices = dup_ids(found);
        *count = found.size();
    });
}

int septa_graph_triple_text(const septa_graph* graph, int64_t triple_index, char** text) {
    return guarded([&] {
        require(graph && text, "null argument");
        *text = dup_string(septa::textualize_triple(graph->graph,
                                                    graph->graph.triple(triple_index)));
    });
}

int septa_sample_dump(const septa_graph* graph, int64_t center,
                      const septa_sampler_config* cfg, char** dump) {
    return guarded([&] {
        require(graph && cfg && dump, "null argument");
        septa::SamplerConfig config = to_core(*cfg);
        septa::Rng rng(config.seed ^ static_cast<uint64_t>(center));
        septa::Subgraph sub = septa::bfs_sample(graph->graph, center, config, rng);
        *dump = dup_string(septa::debug_dump(graph->graph, sub));
    });
}

int septa_model_init(const septa_graph* graph, const septa_align_config* cfg,
                     septa_model** out) {
    return guarded([&] {
        require(graph && cfg && out, "null argument");
        auto handle = std::make_unique<septa_model>();
        handle->model =
            septa::AlignmentModel::init(to_core(*cfg), graph->graph.relation_count());
        *out = handle.release();
    });
}

int septa_model_train(const septa_graph* graph, const septa_align_config* cfg,
                      const septa_sampler_config* sampler, const char* log_path,
                      const char* pairs_path, septa_model** out) {
    return guarded([&] {
        require(graph && cfg && sampler && out, "null argument");
        septa::AlignmentConfig acfg = to_core(*cfg);
        septa::SamplerConfig scfg = to_core(*sampler);
        auto result = septa::train_alignment(graph->graph, acfg, scfg);
        if (log_path) septa::write_training_log(result.log, log_path);
        if (pairs_path) {
            auto pairs = septa::build_pair_dataset(graph->graph, scfg, acfg.pair_count,
                                                   septa::derive_seed(acfg.seed, 1),
                                                   acfg.max_sentences);
            septa::write_pairs_jsonl(pairs, pairs_path);
        }
        auto handle = std::make_unique<septa_model>();
        handle->model = std::move(result.model);
        *out = handle.release();
    });
}

int septa_model_save(const septa_model* model, const char* path) {
    return guarded([&] {
        require(model && path, "null argument");
        septa::save_model(model->model, path);
    });
}

int septa_model_load(const char* path, uint64_t embed_seed, septa_model** out) {
    return guarded([&] {
        require(path && out, "null argument");
        auto handle = std::make_unique<septa_model>();
        handle->model = septa::load_model(path, embed_seed);
        *out = handle.release();
    });
}

void septa_model_free(septa_model* model) { delete model; }

int septa_model_dims(const septa_model* model, int32_t* dim_text, int32_t* dim_hidden,
                     int32_t* dim_shared) {
    return guarded([&] {
        require(model != nullptr, "null model");
        if (dim_text) *dim_text = static_cast<int32_t>(model->model.encoder.dim_in);
        if (dim_hidden) *dim_hidden = static_cast<int32_t>(model->model.encoder.dim_hidden);
        if (dim_shared) *dim_shared = static_cast<int32_t>(model->model.shared_dim());
    });
}

int septa_model_embed_text(const septa_model* model, const char* text, double* out,
                           int32_t dim) {
    return guarded([&] {
        require(model && text && out, "null argument");
        require(dim == static_cast<int32_t>(model->model.shared_dim()),
                "dim must equal the model's shared dim");
        septa::Vec v = model->model.embed_project_text(text);
        std::memcpy(out, v.data(), v.size() * sizeof(double));
    });
}

int septa_db_build(const septa_graph* graph, const septa_model* model,
                   const septa_sampler_config* sampler, int32_t threads,
                   int32_t max_sentences, septa_database** out) {
    return guarded([&] {
        require(graph && model && sampler && out, "null argument");
        auto handle = std::make_unique<septa_database>();
        handle->db = septa::build_database(graph->graph, model->model, to_core(*sampler),
                                           threads < 1 ? 1u : static_cast<unsigned>(threads),
                                           static_cast<size_t>(max_sentences));
        *out = handle.release();
    });
}

int septa_db_save(const septa_database* db, const char* path) {
    return guarded([&] {
        require(db && path, "null argument");
        db->db.save(path);
    });
}

int septa_db_load(const char* path, septa_database** out) {
    return guarded([&] {
        require(path && out, "null argument");
        auto handle = std::make_unique<septa_database>();
        handle->db = septa::VectorDatabase::load(path);
        *out = handle.release();
    });
}

void septa_db_free(septa_database* db) { delete db; }

int septa_db_info(const septa_database* db, int32_t* dim, int64_t* records) {
    return guarded([&] {
        require(db != nullptr, "null database");
        if (dim) *dim = static_cast<int32_t>(db->db.dim());
        if (records) *records = static_cast<int64_t>(db->db.size());
    });
}

int septa_db_top_k(const septa_database* db, const double* query, int32_t dim, int32_t k,
                   int32_t threads, int64_t* indices, double* sims, int32_t* count) {
    return guarded([&] {
        require(db && query && indices && sims && count, "null argument");
        septa::Vec q(query, query + dim);
        auto hits = db->db.top_k(q, static_cast<size_t>(k),
                                 threads < 1 ? 1u : static_cast<unsigned>(threads));
        for (size_t i = 0; i < hits.size(); ++i) {
            indices[i] = hits[i].index;
            sims[i] = hits[i].similarity;
        }
        *count = static_cast<int32_t>(hits.size());
    });
}

int septa_head_train(const septa_graph* graph, const septa_model* model,
                     const septa_database* db, const char* train_qa_path,
                     const char* dev_qa_path, const septa_fusion_config* cfg,
                     septa_variant variant, septa_head** out) {
    return guarded([&] {
        require(graph && model && db && train_qa_path && cfg && out, "null argument");
        septa::FusionConfig fcfg = to_core(*cfg);
        septa::Variant var = to_core(variant);
        auto train = septa::load_qa_jsonl(train_qa_path);
        std::vector<septa::QAInstance> dev;
        if (dev_qa_path) dev = septa::load_qa_jsonl(dev_qa_path);
        if (var == septa::Variant::lambda_only) fcfg.lambda = 1.0;
        auto ftrain = septa::featurize(graph->graph, model->model, db->db, train, fcfg, var);
        auto fdev = septa::featurize(graph->graph, model->model, db->db, dev, fcfg, var);
        auto result = septa::train_fusion(ftrain, fdev, fcfg);
        auto handle = std::make_unique<septa_head>();
        handle->head = std::move(result.head);
        *out = handle.release();
    });
}

int septa_head_save(const septa_head* head, const char* path) {
    return guarded([&] {
        require(head && path, "null argument");
        septa::save_head(head->head, path);
    });
}

int septa_head_load(const char* path, septa_head** out) {
    return guarded([&] {
        require(path && out, "null argument");
        auto handle = std::make_unique<septa_head>();
        handle->head = septa::load_head(path);
        *out = handle.release();
    });
}

void septa_head_free(septa_head* head) { delete head; }

int septa_answer_file(const septa_graph* graph, const septa_model* model,
                      const septa_database* db, const septa_head* head, const char* qa_path,
                      const septa_fusion_config* cfg, septa_variant variant,
                      const char* predictions_path) {
    return guarded([&] {
        require(graph && model && db && head && qa_path && cfg && predictions_path,
                "null argument");
        auto instances = septa::load_qa_jsonl(qa_path);
        auto features = septa::featurize(graph->graph, model->model, db->db, instances,
                                         to_core(*cfg), to_core(variant));
        auto rows = septa::answer_instances(head->head, features);
        septa::write_predictions_jsonl(rows, predictions_path);
    });
}

int septa_predict(const septa_graph* graph, const septa_model* model,
                  const septa_database* db, const septa_head* head, const char* question,
                  const char* const* choices, int32_t n_choices,
                  const septa_fusion_config* cfg, septa_variant variant, int32_t* predicted,
                  char** detail_json) {
    return guarded([&] {
        require(graph && model && db && head && question && choices && cfg && predicted,
                "null argument");
        require(n_choices >= 2, "need at least 2 choices");
        septa::QAInstance inst;
        inst.id = "adhoc";
        inst.question = question;
        for (int32_t i = 0; i < n_choices; ++i) inst.choices.emplace_back(choices[i]);
        inst.validate();
        auto features = septa::build_instance_features(graph->graph, model->model, db->db, inst,
                                                       to_core(*cfg), to_core(variant));
        auto pred = septa::predict_from_features(head->head, features);
        *predicted = pred.choice;
        if (detail_json) {
            nlohmann::json j;
            j["predicted"] = pred.choice;
            nlohmann::json scores = nlohmann::json::array();
            for (const auto& s : pred.scores)
                scores.push_back({{"p_hat", s.p_hat}, {"p_tilde", s.p_tilde}, {"p", s.p}});
            j["scores"] = std::move(scores);
            nlohmann::json retrieved = nlohmann::json::array();
            for (const auto& cf : features.choices) retrieved.push_back(cf.retrieved_centers);
            j["retrieved"] = std::move(retrieved);
            *detail_json = dup_string(j.dump());
        }
    });
}

int septa_eval(const char* qa_path, const char* predictions_path, double* accuracy,
               int64_t* correct, int64_t* total) {
    return guarded([&] {
        require(qa_path && predictions_path, "null argument");
        auto report = septa::evaluate_predictions(qa_path, predictions_path);
        if (accuracy) *accuracy = report.accuracy;
        if (correct) *correct = static_cast<int64_t>(report.correct);
        if (total) *total = static_cast<int64_t>(report.total);
    });
}

int septa_ablate(const septa_graph* graph, const septa_align_config* align_cfg,
                 const septa_sampler_config* pair_sampler,
                 const septa_sampler_config* db_sampler, int32_t db_max_sentences,
                 const septa_fusion_config* fusion_cfg, const char* train_qa,
                 const char* dev_qa, const char* test_qa, int32_t threads,
                 char** report_json) {
    return guarded([&] {
        require(graph && align_cfg && pair_sampler && db_sampler && fusion_cfg && train_qa &&
                    dev_qa && test_qa && report_json,
                "null argument");
        auto rows = septa::run_ablation(
            graph->graph, to_core(*align_cfg), to_core(*pair_sampler), to_core(*db_sampler),
            static_cast<size_t>(db_max_sentences), to_core(*fusion_cfg),
            septa::load_qa_jsonl(train_qa), septa::load_qa_jsonl(dev_qa),
            septa::load_qa_jsonl(test_qa), threads < 1 ? 1u : static_cast<unsigned>(threads));
        nlohmann::json j = nlohmann::json::array();
        for (const auto& row : rows) {
            j.push_back({{"variant", septa::variant_name(row.variant)},
                         {"dev_accuracy", row.dev_accuracy},
                         {"test_accuracy", row.test_accuracy}});
        }
        *report_json = dup_string(j.dump());
    });
}

int septa_sweep(const septa_graph* graph, const septa_align_config* align_cfg,
                const septa_sampler_config* pair_sampler,
                const septa_sampler_config* db_sampler, int32_t db_max_sentences,
                const septa_fusion_config* fusion_cfg, const char* train_qa,
                const char* dev_qa, const char* test_qa, const char* param,
                const double* values, int32_t n_values, int32_t threads, char** csv) {
    return guarded([&] {
        require(graph && align_cfg && pair_sampler && db_sampler && fusion_cfg && train_qa &&
                    dev_qa && test_qa && param && values && csv,
                "null argument");
        require(n_values >= 1, "need at least one sweep value");
        auto points = septa::run_sweep(
            graph->graph, to_core(*align_cfg), to_core(*pair_sampler), to_core(*db_sampler),
            static_cast<size_t>(db_max_sentences), to_core(*fusion_cfg),
            septa::load_qa_jsonl(train_qa), septa::load_qa_jsonl(dev_qa),
            septa::load_qa_jsonl(test_qa), septa::sweep_param_from_name(param),
            std::vector<double>(values, values + n_values),
            threads < 1 ? 1u : static_cast<unsigned>(threads));
        std::string out = "param,value,dev_accuracy,test_accuracy\n";
        for (const auto& p : points) {
            nlohmann::json value = p.value, dev = p.dev_accuracy, test = p.test_accuracy;
            out += std::string(param) + "," + value.dump() + "," + dev.dump() + "," +
                   test.dump() + "\n";
        }
        *csv = dup_string(out);
    });
}

int septa_gen_benchmark(const septa_benchmark_config* cfg, const char* out_dir,
                        const int64_t* split, char** summary_json) {
    return guarded([&] {
        require(cfg && out_dir, "null argument");
        septa::BenchmarkConfig bcfg;
        bcfg.nodes = static_cast<size_t>(cfg->nodes);
        bcfg.relations = static_cast<size_t>(cfg->relations);
        bcfg.instances = static_cast<size_t>(cfg->instances);
        bcfg.choices = static_cast<size_t>(cfg->choices);
        bcfg.seed = cfg->seed;
        auto bench = septa::generate_benchmark(bcfg);
        std::vector<size_t> split_vec;
        if (split) {
            split_vec = {static_cast<size_t>(split[0]), static_cast<size_t>(split[1]),
                         static_cast<size_t>(split[2])};
        }
        septa::write_benchmark(bench, out_dir, split_vec);
        if (summary_json) {
            nlohmann::json j;
            j["nodes"] = bench.node_count;
            j["edges"] = bench.edge_count;
            j["instances"] = bench.instances.size();
            *summary_json = dup_string(j.dump());
        }
    });
}

}  // extern "C"

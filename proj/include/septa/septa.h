/* septa — knowledge-graph subgraph retrieval with graph-text alignment.
 *
 * C interface over the core library. All functions return SEPTA_OK or an
 * error code; septa_last_error() describes the most recent failure on
 * the calling thread. Objects are opaque handles released with their
 * _free function. Strings and id buffers returned through out-params are
 * owned by the caller and released with septa_string_free /
 * septa_ids_free.
 */
#ifndef SEPTA_H
#define SEPTA_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#define SEPTA_OK 0
#define SEPTA_ERR_INVALID_ARGUMENT 1
#define SEPTA_ERR_IO 2
#define SEPTA_ERR_RUNTIME 3

const char* septa_version(void);

/* Message for the last failing call on this thread; empty if none. */
const char* septa_last_error(void);

void septa_string_free(char* s);
void septa_ids_free(int64_t* ids);

typedef struct septa_graph septa_graph;
typedef struct septa_model septa_model;
typedef struct septa_database septa_database;
typedef struct septa_head septa_head;

/* ---- configuration -------------------------------------------------- */

typedef struct septa_sampler_config {
    double p;           /* neighbor selection probability in [0, 1] */
    int32_t depth;      /* max hops from the center */
    int32_t max_nodes;  /* subgraph node cap */
    uint64_t seed;
} septa_sampler_config;
void septa_sampler_config_default(septa_sampler_config* cfg);

typedef struct septa_align_config {
    int32_t batch_size;
    double temperature;
    double learning_rate;
    int32_t epochs;
    uint64_t seed;
    double holdout_fraction;
    int64_t pair_count;
    int32_t layers;
    int32_t dim_text;    /* embedder dim; node features share it */
    int32_t dim_hidden;  /* graph encoder dim */
    int32_t dim_shared;  /* projected space dim */
    uint64_t embed_seed;
    int32_t eval_top_k;
    int32_t max_sentences; /* 0 = unlimited description length */
} septa_align_config;
void septa_align_config_default(septa_align_config* cfg);

typedef struct septa_fusion_config {
    int32_t heads;
    double lambda;
    int32_t retrieve_k;    /* subgraph vectors per query */
    int32_t triplet_top_k; /* fact triplets per query */
    double learning_rate;
    int32_t epochs;
    int32_t patience;
    int32_t batch_size;
    uint64_t seed;
    int32_t threads;
} septa_fusion_config;
void septa_fusion_config_default(septa_fusion_config* cfg);

typedef enum septa_variant {
    SEPTA_VARIANT_FULL = 0,
    SEPTA_VARIANT_NO_ALIGNMENT = 1,
    SEPTA_VARIANT_NO_SUBGRAPH = 2,
    SEPTA_VARIANT_NO_TRIPLETS = 3,
    SEPTA_VARIANT_LAMBDA_ONLY = 4
} septa_variant;

/* ---- knowledge graph ------------------------------------------------- */

int septa_graph_load(const char* triples_path, const char* templates_path, septa_graph** out);
void septa_graph_free(septa_graph* graph);

int septa_graph_counts(const septa_graph* graph, int64_t* nodes, int64_t* relations,
                       int64_t* triples);

/* Assigns default node features: the hash embedder applied to each
 * node's surface form. Required before training or database builds. */
int septa_graph_prepare_features(septa_graph* graph, int32_t dim, uint64_t embed_seed);

/* Sets *id to -1 when the uri is unknown. */
int septa_graph_find_node(const septa_graph* graph, const char* uri, int64_t* id);
int septa_graph_node_uri(const septa_graph* graph, int64_t id, char** uri);

int septa_graph_link_entities(const septa_graph* graph, const char* text, int64_t** ids,
                              size_t* count);
int septa_graph_triples_touching(const septa_graph* graph, const int64_t* entities,
                                 size_t entity_count, int64_t** triple_indices, size_t* count);
int septa_graph_triple_text(const septa_graph* graph, int64_t triple_index, char** text);

/* Text dump of one sampled subgraph (center, nodes with depths, edges). */
int septa_sample_dump(const septa_graph* graph, int64_t center,
                      const septa_sampler_config* cfg, char** dump);

/* ---- alignment model ------------------------------------------------- */

/* Randomly initialized, untrained model (the w/o-alignment baseline). */
int septa_model_init(const septa_graph* graph, const septa_align_config* cfg,
                     septa_model** out);

/* Contrastive training on sampled graph-text pairs. log_path and
 * pairs_path are optional (NULL to skip writing). */
int septa_model_train(const septa_graph* graph, const septa_align_config* cfg,
                      const septa_sampler_config* sampler, const char* log_path,
                      const char* pairs_path, septa_model** out);

int septa_model_save(const septa_model* model, const char* path);
int septa_model_load(const char* path, uint64_t embed_seed, septa_model** out);
void septa_model_free(septa_model* model);
int septa_model_dims(const septa_model* model, int32_t* dim_text, int32_t* dim_hidden,
                     int32_t* dim_shared);

/* Projected text embedding; out must hold dim_shared doubles. */
int septa_model_embed_text(const septa_model* model, const char* text, double* out,
                           int32_t dim);

/* ---- subgraph vector database ---------------------------------------- */

int septa_db_build(const septa_graph* graph, const septa_model* model,
                   const septa_sampler_config* sampler, int32_t threads,
                   int32_t max_sentences, septa_database** out);
int septa_db_save(const septa_database* db, const char* path);
int septa_db_load(const char* path, septa_database** out);
void septa_db_free(septa_database* db);
int septa_db_info(const septa_database* db, int32_t* dim, int64_t* records);

/* Exact top-k cosine search. indices/sims must hold k entries; *count
 * receives min(k, record count). */
int septa_db_top_k(const septa_database* db, const double* query, int32_t dim, int32_t k,
                   int32_t threads, int64_t* indices, double* sims, int32_t* count);

/* ---- fusion head and answering --------------------------------------- */

int septa_head_train(const septa_graph* graph, const septa_model* model,
                     const septa_database* db, const char* train_qa_path,
                     const char* dev_qa_path, const septa_fusion_config* cfg,
                     septa_variant variant, septa_head** out);
int septa_head_save(const septa_head* head, const char* path);
int septa_head_load(const char* path, septa_head** out);
void septa_head_free(septa_head* head);

/* Answers every instance in qa_path and writes one JSON line per
 * instance to predictions_path. */
int septa_answer_file(const septa_graph* graph, const septa_model* model,
                      const septa_database* db, const septa_head* head, const char* qa_path,
                      const septa_fusion_config* cfg, septa_variant variant,
                      const char* predictions_path);

/* Single-instance prediction; detail_json (optional) receives per-choice
 * scores and retrieved centers. */
int septa_predict(const septa_graph* graph, const septa_model* model,
                  const septa_database* db, const septa_head* head, const char* question,
                  const char* const* choices, int32_t n_choices,
                  const septa_fusion_config* cfg, septa_variant variant, int32_t* predicted,
                  char** detail_json);

int septa_eval(const char* qa_path, const char* predictions_path, double* accuracy,
               int64_t* correct, int64_t* total);

/* Trains/evaluates every ablation variant; report_json is a JSON array
 * of {variant, dev_accuracy, test_accuracy}. */
int septa_ablate(const septa_graph* graph, const septa_align_config* align_cfg,
                 const septa_sampler_config* pair_sampler,
                 const septa_sampler_config* db_sampler, int32_t db_max_sentences,
                 const septa_fusion_config* fusion_cfg, const char* train_qa,
                 const char* dev_qa, const char* test_qa, int32_t threads,
                 char** report_json);

/* Accuracy grid over k, n, or lambda; csv receives
 * "param,value,dev_accuracy,test_accuracy" rows. */
int septa_sweep(const septa_graph* graph, const septa_align_config* align_cfg,
                const septa_sampler_config* pair_sampler,
                const septa_sampler_config* db_sampler, int32_t db_max_sentences,
                const septa_fusion_config* fusion_cfg, const char* train_qa,
                const char* dev_qa, const char* test_qa, const char* param,
                const double* values, int32_t n_values, int32_t threads, char** csv);

/* ---- synthetic benchmark --------------------------------------------- */

typedef struct septa_benchmark_config {
    int64_t nodes;
    int32_t relations;
    int64_t instances;
    int32_t choices;
    uint64_t seed;
} septa_benchmark_config;
void septa_benchmark_config_default(septa_benchmark_config* cfg);

/* Writes triples.tsv, templates.tsv and qa.jsonl under out_dir; split is
 * an optional int64[3] of train/dev/test counts producing qa_train /
 * qa_dev / qa_test slices. summary_json is optional. */
int septa_gen_benchmark(const septa_benchmark_config* cfg, const char* out_dir,
                        const int64_t* split, char** summary_json);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* SEPTA_H */

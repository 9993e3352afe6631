#pragma once
// End-to-end orchestration: featurize QA instances against a graph,
// model and database; produce prediction files; evaluate; run the
// ablation table and hyper-parameter sweeps.

#include <string>
#include <vector>

#include "core/alignment.hpp"
#include "core/benchmark.hpp"
#include "core/fusion.hpp"
#include "core/kg.hpp"
#include "core/qa.hpp"
#include "core/query.hpp"
#include "core/vectordb.hpp"

namespace septa {

// Fills in default node features (frozen embedder applied to surface
// forms) when the graph has none.
void ensure_node_features(KnowledgeGraph& graph, const TextEmbedder& embedder);

std::vector<InstanceFeatures> featurize(const KnowledgeGraph& graph, const AlignmentModel& model,
                                        const VectorDatabase& db,
                                        const std::vector<QAInstance>& instances,
                                        const FusionConfig& config, Variant variant);

struct PredictionRow {
    std::string id;
    int predicted = 0;
    std::vector<ChoiceScore> scores;
    std::vector<std::vector<int64_t>> retrieved_centers;  // per choice
};

std::vector<PredictionRow> answer_instances(const FusionHead& head,
                                            const std::vector<InstanceFeatures>& features);

// One JSON line per instance: id, predicted, per-choice p_hat / p_tilde
// / p, retrieved center ids.
void write_predictions_jsonl(const std::vector<PredictionRow>& rows, const std::string& path);

struct EvalReport {
    double accuracy = 0.0;
    size_t correct = 0;
    size_t total = 0;
};

EvalReport evaluate_predictions(const std::string& qa_path, const std::string& predictions_path);

struct AblationRow {
    Variant variant = Variant::full;
    double dev_accuracy = 0.0;
    double test_accuracy = 0.0;
};

struct PipelineSeeds {
    // Everything is derived from the alignment / sampler / fusion config
    // seeds; nothing extra is needed here.
};

// Trains the aligned pipeline once, the unaligned variant once, then a
// fusion head per ablation variant, and evaluates each on the test set.
// db_max_sentences caps the record descriptions (0 = unlimited); the
// graph encoder always sees the whole subgraph.
std::vector<AblationRow> run_ablation(const KnowledgeGraph& graph,
                                      const AlignmentConfig& align_config,
                                      const SamplerConfig& pair_sampler,
                                      const SamplerConfig& db_sampler, size_t db_max_sentences,
                                      const FusionConfig& fusion_config,
                                      const std::vector<QAInstance>& train,
                                      const std::vector<QAInstance>& dev,
                                      const std::vector<QAInstance>& test,
                                      unsigned threads);

struct SweepPoint {
    double value = 0.0;
    double dev_accuracy = 0.0;
    double test_accuracy = 0.0;
};

enum class SweepParam { retrieve_k, max_nodes, lambda };
SweepParam sweep_param_from_name(const std::string& name);
const char* sweep_param_name(SweepParam p);

// Re-runs head training (and the database build, for max_nodes) at each
// value with the base seeds, so every point matches an independent
// single run with that setting.
std::vector<SweepPoint> run_sweep(const KnowledgeGraph& graph,
                                  const AlignmentConfig& align_config,
                                  const SamplerConfig& pair_sampler,
                                  const SamplerConfig& db_sampler, size_t db_max_sentences,
                                  const FusionConfig& fusion_config,
                                  const std::vector<QAInstance>& train,
                                  const std::vector<QAInstance>& dev,
                                  const std::vector<QAInstance>& test, SweepParam param,
                                  const std::vector<double>& values, unsigned threads);

}  // namespace septa

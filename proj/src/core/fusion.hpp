#pragma once
// Attention-based knowledge fusion and answer scoring. A query embedding
// attends over retrieved subgraph vectors (split-head attention), the
// fused vector feeds a knowledge score, a context score is read from the
// bare question-answer embedding, and a lambda-weighted sum combines the
// two. Training is softmax + cross-entropy over the choices of each
// instance; only head parameters receive gradients.

#include <cstdint>
#include <string>
#include <vector>

#include "core/alignment.hpp"
#include "core/qa.hpp"
#include "core/query.hpp"
#include "core/vectordb.hpp"

namespace septa {

struct FusionHead {
    size_t heads = 4;
    size_t dim = 0;
    size_t dim_head = 0;                      // dim / heads
    std::vector<Matrix> w_query, w_key, w_value;  // [H], dim_head x dim
    Matrix w_out;                             // dim x (heads * dim_head)
    Vec know_w;                               // dim
    double know_b = 0.0;
    Vec ctx_w;                                // dim
    double ctx_b = 0.0;
    double lambda = 0.5;

    static FusionHead init(size_t dim, size_t heads, double lambda, uint64_t seed);
    void quantize();
};

struct AttendResult {
    Vec fused;       // dim
    Matrix weights;  // heads x k, each row sums to 1
};

// Multi-head attention with `query` as the query and rows of `retrieved`
// as keys/values; stable softmax. Throws on an empty key set.
AttendResult attend(const FusionHead& head, const Vec& query, const Matrix& retrieved);

struct ChoiceScore {
    double p_hat = 0.0;    // knowledge score
    double p_tilde = 0.0;  // context score
    double p = 0.0;        // lambda * p_hat + (1 - lambda) * p_tilde
    Matrix attention;      // heads x k (empty when retrieval was skipped)
};

ChoiceScore score_choice(const FusionHead& head, const Vec& query, const Vec& fused,
                         const Vec& context);

enum class Variant {
    full,
    no_alignment,  // untrained alignment model end-to-end (caller swaps model+db)
    no_subgraph,   // skip retrieval; fused vector is zero
    no_triplets,   // K = 0 query enhancement
    lambda_only,   // lambda = 1.0
};

const char* variant_name(Variant v);
Variant variant_from_name(const std::string& name);

struct FusionConfig {
    size_t heads = 4;
    double lambda = 0.5;
    size_t retrieve_k = 10;     // subgraph vectors per query
    size_t triplet_top_k = 10;  // fact triplets per query
    double learning_rate = 0.1;
    size_t epochs = 30;
    size_t patience = 3;
    size_t batch_size = 8;
    uint64_t seed = 0;
    unsigned threads = 1;

    void validate() const;
};

// Frozen per-choice inputs for head training and inference.
struct ChoiceFeatures {
    Vec query;    // t: projected embedding of the enhanced query
    Matrix retrieved;  // k x d (0 rows when retrieval is skipped)
    std::vector<int64_t> retrieved_centers;
    Vec context;  // v: projected embedding of the bare qa text
};

struct InstanceFeatures {
    std::string id;
    std::vector<ChoiceFeatures> choices;
    std::optional<int> answer;
};

// Runs query enhancement and retrieval for every choice. The variant
// adjusts the construction (no_subgraph skips retrieval, no_triplets
// sets K = 0); alignment swapping is the caller's responsibility.
InstanceFeatures build_instance_features(const KnowledgeGraph& graph,
                                         const AlignmentModel& model, const VectorDatabase& db,
                                         const QAInstance& instance, const FusionConfig& config,
                                         Variant variant);

struct Prediction {
    int choice = 0;
    std::vector<ChoiceScore> scores;
};

// Argmax of combined scores; ties go to the lowest choice index.
Prediction predict_from_features(const FusionHead& head, const InstanceFeatures& features);

struct FusionGrads {
    std::vector<Matrix> w_query, w_key, w_value;
    Matrix w_out;
    Vec know_w;
    double know_b = 0.0;
    Vec ctx_w;
    double ctx_b = 0.0;

    static FusionGrads zeros_like(const FusionHead& head);
};

// Cross-entropy of the instance under the head; optionally accumulates
// exact analytic gradients for every head parameter.
double fusion_instance_loss(const FusionHead& head, const InstanceFeatures& features,
                            FusionGrads* grads = nullptr);

struct FusionEpochLog {
    size_t epoch = 0;
    double train_loss = 0.0;
    double dev_accuracy = 0.0;
};

struct FusionTrainResult {
    FusionHead head;
    std::vector<FusionEpochLog> log;
    double best_dev_accuracy = 0.0;
};

// Seeded mini-batch SGD with early stopping (patience epochs without a
// dev-accuracy improvement); returns the best head seen.
FusionTrainResult train_fusion(const std::vector<InstanceFeatures>& train,
                               const std::vector<InstanceFeatures>& dev,
                               const FusionConfig& config);

double accuracy(const FusionHead& head, const std::vector<InstanceFeatures>& instances);

void save_head(const FusionHead& head, const std::string& path);
FusionHead load_head(const std::string& path);

}  // namespace septa

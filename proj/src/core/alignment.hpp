#pragma once
// Bidirectional InfoNCE alignment of the graph encoder with the frozen
// text embedder. Only the encoder and the two projections are trained;
// text embeddings are treated as constants throughout.

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "core/embed.hpp"
#include "core/encoder.hpp"
#include "core/textualize.hpp"

namespace septa {

struct AlignmentConfig {
    size_t batch_size = 32;
    double temperature = 0.07;
    double learning_rate = 1e-3;
    size_t epochs = 30;
    uint64_t seed = 0;
    double holdout_fraction = 0.1;
    size_t pair_count = 2000;
    size_t layers = 2;
    size_t dim_text = 64;    // embedder output dim; node features share it
    size_t dim_hidden = 64;  // graph encoder state dim
    size_t dim_shared = 64;  // projected space dim
    uint64_t embed_seed = HashTextEmbedder::kDefaultSeed;
    size_t eval_top_k = 5;
    size_t max_sentences = 0;

    void validate() const;
};

struct AlignmentModel {
    GraphEncoderParams encoder;
    ProjectionPair projection;
    double temperature = 0.07;
    std::shared_ptr<const TextEmbedder> embedder;

    size_t shared_dim() const { return projection.b_graph.size(); }

    Vec embed_project_text(std::string_view text) const {
        return project_text(projection, embedder->embed(text));
    }
    Vec encode_project_graph(const Subgraph& sub) const {
        return project_graph(projection, encode_graph(encoder, sub));
    }

    // Randomly initialized, untrained model (also the w/o-alignment
    // ablation model). Parameters are rounded through f32 so the result
    // is identical to a save/load round trip.
    static AlignmentModel init(const AlignmentConfig& config, size_t relation_count);

    // Rounds every parameter through f32, matching on-disk precision.
    void quantize();
};

// Row i of E / H: projected graph / text embedding of pairs[i].
// text_embeddings: cached frozen embedder outputs, one per pair.
void batch_embed(const AlignmentModel& model, std::span<const GraphTextPair> pairs,
                 const std::vector<Vec>& text_embeddings, Matrix& E, Matrix& H);
void batch_embed(const AlignmentModel& model, std::span<const GraphTextPair> pairs,
                 Matrix& E, Matrix& H);

// -(1/N) sum_i log softmax_j(cos(e_i, h_j)/tau)[i], max-subtracted.
double info_nce_g2t(const Matrix& E, const Matrix& H, double tau);
// Same with roles swapped: negatives drawn over graph rows.
double info_nce_t2g(const Matrix& E, const Matrix& H, double tau);
// Average of both directions.
double alignment_loss(const Matrix& E, const Matrix& H, double tau);

struct AlignmentGradients {
    GraphEncoderGrads encoder;
    Matrix w_graph;
    Vec b_graph;
    Matrix w_text;
    Vec b_text;
};

// Loss and exact analytic gradients of alignment_loss for one batch,
// w.r.t. every trainable parameter. Frozen embedder outputs enter as
// constants and get no gradient entries.
struct BatchLoss {
    double loss = 0.0;
    AlignmentGradients grads;
};
BatchLoss alignment_loss_and_gradients(const AlignmentModel& model,
                                       std::span<const GraphTextPair> pairs,
                                       const std::vector<Vec>& text_embeddings);

struct RetrievalAccuracy {
    double g2t_top1 = 0.0;
    double g2t_topk = 0.0;
    double t2g_top1 = 0.0;
    double t2g_topk = 0.0;
};

// Ranks each graph embedding against all text embeddings by cosine (and
// vice versa) and scores the true partner's rank.
RetrievalAccuracy eval_retrieval_accuracy(const AlignmentModel& model,
                                          std::span<const GraphTextPair> pairs, size_t k);

struct EpochLog {
    size_t epoch = 0;
    double train_loss = 0.0;
    double holdout_loss = 0.0;
    RetrievalAccuracy retrieval;
};

struct AlignmentTrainResult {
    AlignmentModel model;
    std::vector<EpochLog> log;
};

// Builds the pair dataset, splits off the trailing holdout fraction, and
// runs seeded mini-batch SGD. Deterministic given config seeds. Throws
// on divergence (non-finite loss).
AlignmentTrainResult train_alignment(const KnowledgeGraph& graph,
                                     const AlignmentConfig& config,
                                     const SamplerConfig& sampler_config);

// One JSON line per epoch.
void write_training_log(const std::vector<EpochLog>& log, const std::string& path);

// Versioned binary parameter file: header (magic, version, d_in, d_g, d,
// L, relation count), then row-major little-endian f32 matrices in
// declared order (per layer w_self, w_neigh, rel_emb; then w_graph,
// b_graph, w_text, b_text).
void save_model(const AlignmentModel& model, const std::string& path);
AlignmentModel load_model(const std::string& path,
                          uint64_t embed_seed = HashTextEmbedder::kDefaultSeed,
                          double temperature = 0.07);

}  // namespace septa

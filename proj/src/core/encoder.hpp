#pragma once
// Relation-aware mean-aggregation message-passing encoder and the linear
// projections into the shared graph/text space.
//
// Layer update: x_u <- relu(W_self x_u + mean over incident edges of
// (W_neigh x_v + rel_emb[r])), where v is the far endpoint. Isolated
// nodes keep only the self term. The subgraph embedding is the mean of
// final-layer node states.

#include <cstdint>
#include <vector>

#include "core/matrix.hpp"
#include "core/sampler.hpp"

namespace septa {

struct GraphEncoderParams {
    size_t layers = 2;
    size_t dim_in = 0;
    size_t dim_hidden = 0;
    size_t relation_count = 0;
    std::vector<Matrix> w_self;    // [L], layer 0: hidden x in, then hidden x hidden
    std::vector<Matrix> w_neigh;   // same shapes as w_self
    std::vector<Matrix> rel_emb;   // [L], relation_count x hidden

    static GraphEncoderParams init(size_t layers, size_t dim_in, size_t dim_hidden,
                                   size_t relation_count, Rng& rng);
    void check_shapes() const;
};

struct ProjectionPair {
    Matrix w_graph;  // d x dim_hidden
    Vec b_graph;     // d
    Matrix w_text;   // d x dim_text
    Vec b_text;      // d

    static ProjectionPair init(size_t dim_graph, size_t dim_text, size_t dim_shared, Rng& rng);
};

// Intermediate state kept for backpropagation.
struct GraphForwardTrace {
    // messages[u] lists (local neighbor index, relation id) per incident edge
    std::vector<std::vector<std::pair<size_t, int64_t>>> incident;
    std::vector<Matrix> states;  // [L+1], node states per layer (states[0] = inputs)
    std::vector<Matrix> pre;     // [L], pre-activation values
    Vec pooled;                  // mean of final states
};

// Forward pass; requires subgraph features with dim == params.dim_in.
Vec encode_graph(const GraphEncoderParams& params, const Subgraph& sub);
GraphForwardTrace encode_graph_trace(const GraphEncoderParams& params, const Subgraph& sub);

struct GraphEncoderGrads {
    std::vector<Matrix> w_self;
    std::vector<Matrix> w_neigh;
    std::vector<Matrix> rel_emb;

    static GraphEncoderGrads zeros_like(const GraphEncoderParams& params);
    void accumulate(const GraphEncoderGrads& other);
    void scale_all(double a);
};

// Backpropagates d(loss)/d(pooled) through the trace, accumulating into
// `grads`. Input features are constants.
void encode_graph_backward(const GraphEncoderParams& params, const GraphForwardTrace& trace,
                           const Vec& pooled_grad, GraphEncoderGrads& grads);

inline Vec project_graph(const ProjectionPair& proj, const Vec& graph_embedding) {
    Vec out = matvec(proj.w_graph, graph_embedding);
    axpy(out, 1.0, proj.b_graph);
    return out;
}

inline Vec project_text(const ProjectionPair& proj, const Vec& text_embedding) {
    Vec out = matvec(proj.w_text, text_embedding);
    axpy(out, 1.0, proj.b_text);
    return out;
}

// u.v / (|u||v|), 0 for a zero vector (degenerate flag set if provided).
double cosine(const Vec& u, const Vec& v, bool* degenerate = nullptr);

}  // namespace septa

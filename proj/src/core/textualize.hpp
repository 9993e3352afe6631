#pragma once
// Deterministic rendering of triples and subgraphs into natural-language
// descriptions, and construction of (subgraph, description) training pairs.

#include <cstdint>
#include <string>
#include <vector>

#include "core/kg.hpp"
#include "core/sampler.hpp"

namespace septa {

// Relation template with {head}/{tail} replaced by surface forms, plus
// a trailing ". " sentence delimiter.
std::string textualize_triple(const KnowledgeGraph& graph, const Triple& triple);

// Concatenation of textualize_triple over the subgraph's edges in
// ascending triple-index order. Empty string for edge-less subgraphs.
// max_sentences == 0 means no cap.
std::string textualize_subgraph(const KnowledgeGraph& graph, const Subgraph& sub,
                                size_t max_sentences = 0);

struct GraphTextPair {
    Subgraph subgraph;
    std::string text;
};

// Samples `count` centers uniformly with replacement and pairs each
// sampled subgraph with its description. Deterministic given seed.
std::vector<GraphTextPair> build_pair_dataset(const KnowledgeGraph& graph,
                                              const SamplerConfig& config, size_t count,
                                              uint64_t seed, size_t max_sentences = 0);

// One JSON object per line: center, nodes, edges (triple indices), text.
void write_pairs_jsonl(const std::vector<GraphTextPair>& pairs, const std::string& path);

}  // namespace septa

#pragma once
// Triplet-enhanced query construction: link entities in the question and
// choice, gather incident triples, rank their renderings against the
// question-answer text with the aligned text encoder, and concatenate
// the top K before embedding.

#include <cstdint>
#include <string>
#include <vector>

#include "core/alignment.hpp"
#include "core/kg.hpp"
#include "core/vectordb.hpp"

namespace septa {

struct SelectedTriplet {
    int64_t triple_index = 0;
    std::string text;
    double score = 0.0;
};

struct EnhancedQuery {
    std::string qa_text;  // question + " " + choice
    std::vector<int64_t> question_entities;
    std::vector<int64_t> choice_entities;
    std::vector<SelectedTriplet> triplets;  // at most K, score descending
    std::string enhanced_text;              // qa_text followed by triplet sentences
    Vec embedding;                          // projected text embedding of enhanced_text
};

// Triple indices touching entities linked in the question or the choice,
// deduplicated, ascending.
std::vector<int64_t> gather_candidate_triplets(const KnowledgeGraph& graph,
                                               const std::string& question,
                                               const std::string& choice);

// Renders each candidate and scores it by cosine between the projected
// text embeddings of qa_text and of the rendering. Top K by score, ties
// by ascending triple index.
std::vector<SelectedTriplet> rank_triplets(const AlignmentModel& model,
                                           const std::string& qa_text,
                                           const std::vector<int64_t>& candidates,
                                           const KnowledgeGraph& graph, size_t top_k);

// K == 0 skips enhancement entirely (the w/o-triplets ablation).
EnhancedQuery build_enhanced_query(const KnowledgeGraph& graph, const AlignmentModel& model,
                                   const std::string& question, const std::string& choice,
                                   size_t top_k_triplets);

struct RetrievedSubgraphs {
    Matrix vectors;  // k x d, similarity order
    std::vector<double> similarities;
    std::vector<int64_t> centers;
};

RetrievedSubgraphs retrieve_subgraphs(const VectorDatabase& db, const EnhancedQuery& query,
                                      size_t k, unsigned threads = 1);

}  // namespace septa

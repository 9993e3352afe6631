#pragma once
// Synthetic multiple-choice benchmark generator. Every instance asks
// which concept connects to two anchor entities; the correct choice is
// joined to both anchors through a middle node (two hops), distractors
// are verified to have no path of <= 2 hops from either anchor. Answer
// concepts share a category token in their surface form, connector and
// bridge relations use distinct verbs from filler relations, so each
// pipeline stage has signal to pick up while no single stage sees the
// whole answer.

#include <cstdint>
#include <string>
#include <vector>

#include "core/qa.hpp"

namespace septa {

struct BenchmarkConfig {
    size_t nodes = 300;
    size_t relations = 5;   // bridge + connector + fillers, >= 3
    size_t instances = 850;
    size_t choices = 5;
    uint64_t seed = 0;
    // Anchors get enough filler edges that retrieval has question-side
    // competitors to crowd a wrong choice's own neighborhood down the
    // ranking; answers stay low-degree so their neighborhood records are
    // dominated by the connecting structure.
    size_t anchor_filler_edges = 2;
    size_t answer_filler_edges = 1;
    size_t background_filler_edges = 4;

    void validate() const;
};

struct GeneratedBenchmark {
    std::string triples_tsv;
    std::string templates_tsv;
    std::vector<QAInstance> instances;
    size_t node_count = 0;
    size_t edge_count = 0;
};

GeneratedBenchmark generate_benchmark(const BenchmarkConfig& config);

// Writes triples.tsv, templates.tsv and qa.jsonl under dir; when split
// (train, dev, test counts) is non-empty, also writes qa_train.jsonl,
// qa_dev.jsonl, qa_test.jsonl as consecutive slices.
void write_benchmark(const GeneratedBenchmark& bench, const std::string& dir,
                     const std::vector<size_t>& split = {});

}  // namespace septa

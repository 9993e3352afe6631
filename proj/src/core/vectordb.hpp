#pragma once
// Subgraph vector database: one norm-matched combined embedding per
// graph node, with exact (brute-force-equivalent) top-k cosine search.
// Record vectors are held in f32, matching on-disk precision, so a
// freshly built database and a reloaded one behave identically.

#include <cstdint>
#include <string>
#include <vector>

#include "core/alignment.hpp"
#include "core/kg.hpp"
#include "core/sampler.hpp"

namespace septa {

// g = ((|h|/|e|) e + h) / 2; falls back to h when |e| ~ 0.
Vec combine_embeddings(const Vec& graph_embedding, const Vec& text_embedding);

struct SubgraphVectorRecord {
    int64_t center = 0;
    int32_t node_count = 0;
    std::vector<float> vec;
};

struct SearchHit {
    int64_t index = 0;  // record index == center node id for built databases
    double similarity = 0.0;
};

class VectorDatabase {
public:
    VectorDatabase() = default;
    VectorDatabase(size_t dim, std::string metadata_json)
        : dim_(dim), metadata_(std::move(metadata_json)) {}

    size_t dim() const { return dim_; }
    size_t size() const { return records_.size(); }
    const std::string& metadata() const { return metadata_; }
    const SubgraphVectorRecord& record(size_t i) const { return records_.at(i); }

    void add_record(SubgraphVectorRecord record);

    // Exactly min(k, size) hits, similarity descending, ties broken by
    // ascending record index. The scan may be partitioned across
    // `threads` workers; results are identical to a sequential scan.
    std::vector<SearchHit> top_k(const Vec& query, size_t k, unsigned threads = 1) const;

    void save(const std::string& path) const;
    static VectorDatabase load(const std::string& path);

private:
    size_t dim_ = 0;
    std::string metadata_;
    std::vector<SubgraphVectorRecord> records_;
};

// Samples every node as a center, runs both encoders, and combines the
// projected embeddings (Eq. 9 style norm matching). Deterministic given
// the sampler seed; builds may be partitioned across threads.
VectorDatabase build_database(const KnowledgeGraph& graph, const AlignmentModel& model,
                              const SamplerConfig& sampler_config, unsigned threads = 1,
                              size_t max_sentences = 0);

}  // namespace septa

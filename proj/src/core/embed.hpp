#pragma once
// Frozen text embedders. The hash embedder buckets word unigrams and
// bigrams with a signed hash and L2-normalizes, standing in for a
// pretrained sentence encoder at desk scale.

#include <cstdint>
#include <memory>
#include <string_view>

#include "core/matrix.hpp"

namespace septa {

class TextEmbedder {
public:
    virtual ~TextEmbedder() = default;
    virtual size_t dim() const = 0;
    // Deterministic; embed("") is the zero vector.
    virtual Vec embed(std::string_view text) const = 0;
};

class KnowledgeGraph;

// Per-node feature rows: the embedder applied to each node's surface form.
Matrix default_node_features(const KnowledgeGraph& graph, const TextEmbedder& embedder);

class HashTextEmbedder final : public TextEmbedder {
public:
    explicit HashTextEmbedder(size_t dim, uint64_t seed = kDefaultSeed);

    size_t dim() const override { return dim_; }
    Vec embed(std::string_view text) const override;

    uint64_t seed() const { return seed_; }

    static constexpr uint64_t kDefaultSeed = 0x5e7a0001ULL;

private:
    size_t dim_;
    uint64_t seed_;

    void accumulate(Vec& acc, std::string_view token_gram) const;
};

}  // namespace septa

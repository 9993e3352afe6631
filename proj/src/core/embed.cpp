#include "core/embed.hpp"

#include <stdexcept>
#include <string>

#include "core/kg.hpp"

namespace septa {

namespace {

uint64_t fnv1a(std::string_view bytes, uint64_t seed) {
    uint64_t h = 1469598103934665603ULL ^ seed;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace

Matrix default_node_features(const KnowledgeGraph& graph, const TextEmbedder& embedder) {
    Matrix features(graph.node_count(), embedder.dim());
    for (size_t i = 0; i < graph.node_count(); ++i) {
        Vec row = embedder.embed(graph.node(static_cast<int64_t>(i)).surface);
        std::copy(row.begin(), row.end(), features.row(i));
    }
    return features;
}

HashTextEmbedder::HashTextEmbedder(size_t dim, uint64_t seed) : dim_(dim), seed_(seed) {
    if (dim_ < 1) throw std::invalid_argument("HashTextEmbedder: dim must be >= 1");
}

void HashTextEmbedder::accumulate(Vec& acc, std::string_view token_gram) const {
    uint64_t h = fnv1a(token_gram, seed_);
    size_t bucket = static_cast<size_t>(splitmix64(h) % dim_);
    double sign = (splitmix64(h ^ 0xa5a5a5a5a5a5a5a5ULL) & 1) ? 1.0 : -1.0;
    acc[bucket] += sign;
}

Vec HashTextEmbedder::embed(std::string_view text) const {
    Vec acc(dim_, 0.0);
    auto tokens = tokenize(normalize_text(text));
    if (tokens.empty()) return acc;
    for (size_t i = 0; i < tokens.size(); ++i) {
        accumulate(acc, tokens[i]);
        if (i + 1 < tokens.size()) {
            accumulate(acc, tokens[i] + " " + tokens[i + 1]);
        }
    }
    double n = norm(acc);
    if (n > 0.0) scale(acc, 1.0 / n);
    return acc;
}

}  // namespace septa

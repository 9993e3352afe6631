#pragma once
// Immutable multi-relational knowledge graph with surface-form entity
// linking and per-node incidence lists. Triples are directed facts;
// traversal treats them as undirected.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "core/matrix.hpp"

namespace septa {

struct ConceptNode {
    int64_t id = 0;
    std::string uri;
    std::string surface;  // lowercased, underscores replaced by spaces
};

struct RelationType {
    int64_t id = 0;
    std::string name;
    std::string pattern;  // contains {head} and {tail} exactly once each
};

struct Triple {
    int64_t head = 0;
    int64_t relation = 0;
    int64_t tail = 0;
};

struct NeighborRef {
    int64_t triple_index = 0;
    int64_t other = 0;  // far endpoint when walking the triple from this node
};

// Lowercases ASCII, maps everything that is not alphanumeric to a space.
std::string normalize_text(std::string_view text);
std::vector<std::string> tokenize(std::string_view text);

// Derives a surface form from a URI: trailing path segment, underscores
// to spaces, lowercased ("/c/en/ice_cream" -> "ice cream").
std::string surface_from_uri(std::string_view uri);

class KnowledgeGraph {
public:
    // Parses the tab-separated triples file and the relation template file.
    // Throws std::runtime_error with a line number on malformed input,
    // missing templates, or an empty graph.
    static KnowledgeGraph load(const std::string& triples_path,
                               const std::string& templates_path);

    size_t node_count() const { return nodes_.size(); }
    size_t relation_count() const { return relations_.size(); }
    size_t triple_count() const { return triples_.size(); }

    const ConceptNode& node(int64_t id) const { return nodes_.at(static_cast<size_t>(id)); }
    const RelationType& relation(int64_t id) const { return relations_.at(static_cast<size_t>(id)); }
    const Triple& triple(int64_t index) const { return triples_.at(static_cast<size_t>(index)); }
    const std::vector<Triple>& triples() const { return triples_; }
    const std::vector<NeighborRef>& neighbors(int64_t node_id) const {
        return neighbors_.at(static_cast<size_t>(node_id));
    }

    std::optional<int64_t> find_node(std::string_view uri) const;

    // Node ids whose surface forms occur in the text. Longest-match-first
    // over token n-grams up to length 4; matched spans are consumed.
    std::vector<int64_t> link_entities(std::string_view text) const;

    // Indices of all triples with head or tail in `entities`, ascending,
    // deduplicated.
    std::vector<int64_t> triples_touching(const std::vector<int64_t>& entities) const;

    // Optional per-node feature rows (dim = feature_dim). Empty until set.
    const Matrix& features() const { return features_; }
    size_t feature_dim() const { return features_.cols; }
    void set_features(Matrix features);

private:
    std::vector<ConceptNode> nodes_;
    std::vector<RelationType> relations_;
    std::vector<Triple> triples_;
    std::vector<std::vector<NeighborRef>> neighbors_;
    std::unordered_map<std::string, std::vector<int64_t>> surface_index_;
    std::unordered_map<std::string, int64_t> uri_index_;
    Matrix features_;

    void build_indexes();
};

}  // namespace septa

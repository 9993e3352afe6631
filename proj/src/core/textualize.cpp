#include "core/textualize.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace septa {

std::string textualize_triple(const KnowledgeGraph& graph, const Triple& triple) {
    const RelationType& rel = graph.relation(triple.relation);
    std::string out = rel.pattern;
    auto replace_once = [&out](std::string_view placeholder, const std::string& value) {
        size_t pos = out.find(placeholder);
        out.replace(pos, placeholder.size(), value);
    };
    replace_once("{head}", graph.node(triple.head).surface);
    replace_once("{tail}", graph.node(triple.tail).surface);
    out += ". ";
    return out;
}

std::string textualize_subgraph(const KnowledgeGraph& graph, const Subgraph& sub,
                                size_t max_sentences) {
    std::string out;
    size_t rendered = 0;
    for (int64_t edge : sub.edges) {
        if (max_sentences > 0 && rendered >= max_sentences) break;
        out += textualize_triple(graph, graph.triple(edge));
        ++rendered;
    }
    return out;
}

std::vector<GraphTextPair> build_pair_dataset(const KnowledgeGraph& graph,
                                              const SamplerConfig& config, size_t count,
                                              uint64_t seed, size_t max_sentences) {
    if (graph.node_count() == 0) throw std::runtime_error("build_pair_dataset: empty graph");
    if (count < 1) throw std::invalid_argument("build_pair_dataset: count must be >= 1");

    Rng center_rng(seed);
    std::vector<GraphTextPair> pairs;
    pairs.reserve(count);
    for (size_t i = 0; i < count; ++i) {
        int64_t center = static_cast<int64_t>(center_rng.below(graph.node_count()));
        Rng sample_rng(derive_seed(seed, i));
        Subgraph sub = bfs_sample(graph, center, config, sample_rng);
        std::string text = textualize_subgraph(graph, sub, max_sentences);
        pairs.push_back(GraphTextPair{std::move(sub), std::move(text)});
    }
    return pairs;
}

void write_pairs_jsonl(const std::vector<GraphTextPair>& pairs, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    for (const auto& pair : pairs) {
        nlohmann::json j;
        j["center"] = pair.subgraph.center;
        j["nodes"] = pair.subgraph.nodes;
        j["edges"] = pair.subgraph.edges;
        j["text"] = pair.text;
        out << j.dump() << "\n";
    }
}

}  // namespace septa

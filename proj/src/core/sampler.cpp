#include "core/sampler.hpp"

#include <algorithm>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace septa {

void SamplerConfig::validate() const {
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("sampler: p must be in [0, 1]");
    if (depth < 1) throw std::invalid_argument("sampler: depth must be >= 1");
    if (max_nodes < 1) throw std::invalid_argument("sampler: max_nodes must be >= 1");
}

Subgraph bfs_sample(const KnowledgeGraph& graph, int64_t center,
                    const SamplerConfig& config, Rng& rng) {
    config.validate();
    if (center < 0 || static_cast<size_t>(center) >= graph.node_count()) {
        throw std::out_of_range("bfs_sample: center id " + std::to_string(center) +
                                " out of range");
    }

    Subgraph sub;
    sub.center = center;
    sub.nodes.push_back(center);
    sub.depth_of.push_back(0);

    std::unordered_set<int64_t> visited{center};
    const size_t cap = static_cast<size_t>(config.max_nodes);

    size_t layer_begin = 0;
    for (int depth = 0; depth < config.depth && sub.nodes.size() < cap; ++depth) {
        const size_t layer_end = sub.nodes.size();
        if (layer_begin == layer_end) break;  // frontier exhausted
        for (size_t fi = layer_begin; fi < layer_end && sub.nodes.size() < cap; ++fi) {
            for (const NeighborRef& ref : graph.neighbors(sub.nodes[fi])) {
                if (visited.count(ref.other)) continue;
                if (!rng.bernoulli(config.p)) continue;
                visited.insert(ref.other);
                sub.nodes.push_back(ref.other);
                sub.depth_of.push_back(depth + 1);
                if (sub.nodes.size() >= cap) break;
            }
        }
        layer_begin = layer_end;
    }

    // Induced edge set: every graph triple with both endpoints sampled.
    std::set<int64_t> edge_set;
    for (int64_t u : sub.nodes) {
        for (const NeighborRef& ref : graph.neighbors(u)) {
            if (ref.other == u || ref.other > u) {
                if (visited.count(ref.other)) edge_set.insert(ref.triple_index);
            }
        }
    }
    sub.edges.assign(edge_set.begin(), edge_set.end());

    std::unordered_map<int64_t, size_t> local_index;
    local_index.reserve(sub.nodes.size());
    for (size_t i = 0; i < sub.nodes.size(); ++i) local_index.emplace(sub.nodes[i], i);
    sub.local_edges.reserve(sub.edges.size());
    for (int64_t e : sub.edges) {
        const Triple& t = graph.triple(e);
        sub.local_edges.push_back(LocalEdge{local_index.at(t.head), local_index.at(t.tail),
                                            t.relation});
    }

    if (!graph.features().empty()) {
        sub.features = Matrix(sub.nodes.size(), graph.feature_dim());
        for (size_t i = 0; i < sub.nodes.size(); ++i) {
            const double* src = graph.features().row(static_cast<size_t>(sub.nodes[i]));
            std::copy(src, src + graph.feature_dim(), sub.features.row(i));
        }
    }
    return sub;
}

std::vector<Subgraph> sample_all_centers(const KnowledgeGraph& graph,
                                         const SamplerConfig& config) {
    std::vector<Subgraph> out;
    out.reserve(graph.node_count());
    for (size_t c = 0; c < graph.node_count(); ++c) {
        Rng rng(config.seed ^ static_cast<uint64_t>(c));
        out.push_back(bfs_sample(graph, static_cast<int64_t>(c), config, rng));
    }
    return out;
}

std::string debug_dump(const KnowledgeGraph& graph, const Subgraph& sub) {
    std::ostringstream os;
    os << "center: " << graph.node(sub.center).uri << " (id " << sub.center << ")\n";
    os << "nodes: " << sub.nodes.size() << "\n";
    for (size_t i = 0; i < sub.nodes.size(); ++i) {
        os << "  [" << sub.depth_of[i] << "] " << graph.node(sub.nodes[i]).uri << "\n";
    }
    os << "edges: " << sub.edges.size() << "\n";
    for (int64_t e : sub.edges) {
        const Triple& t = graph.triple(e);
        os << "  " << graph.node(t.head).uri << " --" << graph.relation(t.relation).name
           << "--> " << graph.node(t.tail).uri << "\n";
    }
    return os.str();
}

}  // namespace septa

#pragma once
// Stochastic BFS subgraph sampling. Expansion is layer by layer from the
// center; each unvisited neighbor of a frontier node is taken with
// independent probability p; sampling halts the moment max_nodes is hit.
// The returned edge set is node-induced, not just the BFS tree.

#include <cstdint>
#include <string>
#include <vector>

#include "core/kg.hpp"
#include "core/rng.hpp"

namespace septa {

struct SamplerConfig {
    double p = 0.5;         // neighbor selection probability, in [0, 1]
    int depth = 2;          // maximum hops from the center, >= 1
    int max_nodes = 32;     // node cap, >= 1
    uint64_t seed = 0;

    void validate() const;
};

struct LocalEdge {
    size_t head = 0;  // index into nodes
    size_t tail = 0;
    int64_t relation = 0;
};

struct Subgraph {
    int64_t center = 0;
    std::vector<int64_t> nodes;        // discovery order, center first
    std::vector<int> depth_of;         // aligned with nodes
    std::vector<int64_t> edges;        // induced triple indices, ascending
    std::vector<LocalEdge> local_edges;  // edges resolved to local node indices
    Matrix features;                   // rows aligned with nodes; empty if the graph has none
};

Subgraph bfs_sample(const KnowledgeGraph& graph, int64_t center,
                    const SamplerConfig& config, Rng& rng);

// One subgraph per node, centered there, in node id order. Per-center
// randomness is derived as seed XOR center id so centers are independent.
std::vector<Subgraph> sample_all_centers(const KnowledgeGraph& graph,
                                         const SamplerConfig& config);

// Human-readable dump: center, nodes with depths, induced triples.
std::string debug_dump(const KnowledgeGraph& graph, const Subgraph& sub);

}  // namespace septa

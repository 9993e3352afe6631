#include <doctest.h>

#include <queue>
#include <set>

#include "core/sampler.hpp"
#include "test_util.hpp"

using namespace septa;
using septa::testing::TempDir;
using septa::testing::write_file;

namespace {

// Reference BFS: the exact d-hop ball around a center.
std::set<int64_t> hop_ball(const KnowledgeGraph& g, int64_t center, int depth) {
    std::set<int64_t> seen{center};
    std::queue<std::pair<int64_t, int>> q;
    q.push({center, 0});
    while (!q.empty()) {
        auto [u, d] = q.front();
        q.pop();
        if (d >= depth) continue;
        for (const NeighborRef& r : g.neighbors(u)) {
            if (seen.insert(r.other).second) q.push({r.other, d + 1});
        }
    }
    return seen;
}

bool connected_to_center(const Subgraph& sub) {
    if (sub.nodes.size() == 1) return true;
    std::set<size_t> reached{0};
    bool grew = true;
    while (grew) {
        grew = false;
        for (const LocalEdge& e : sub.local_edges) {
            bool h = reached.count(e.head), t = reached.count(e.tail);
            if (h != t) {
                reached.insert(h ? e.tail : e.head);
                grew = true;
            }
        }
    }
    return reached.size() == sub.nodes.size();
}

}  // namespace

TEST_CASE("star graph with p=1 takes the whole 1-hop neighborhood") {
    TempDir tmp("smp_star");
    write_file(tmp.file("triples.tsv"),
               "c\trel\tl1\nc\trel\tl2\nc\trel\tl3\nc\trel\tl4\nc\trel\tl5\n");
    write_file(tmp.file("templates.tsv"), "rel\t{head} r {tail}\n");
    KnowledgeGraph g = KnowledgeGraph::load(tmp.file("triples.tsv"), tmp.file("templates.tsv"));

    SamplerConfig cfg{1.0, 1, 100, 7};
    Rng rng(cfg.seed);
    Subgraph sub = bfs_sample(g, *g.find_node("c"), cfg, rng);
    CHECK(sub.nodes.size() == 6);
    CHECK(sub.edges.size() == 5);
    CHECK(sub.nodes[0] == *g.find_node("c"));
    CHECK(sub.depth_of[0] == 0);
    for (size_t i = 1; i < sub.depth_of.size(); ++i) CHECK(sub.depth_of[i] == 1);
}

TEST_CASE("max_nodes = 1 keeps only the center") {
    TempDir tmp("smp_n1");
    KnowledgeGraph g = septa::testing::random_graph(tmp, 30, 3, 90, 5);
    SamplerConfig cfg{1.0, 3, 1, 11};
    Rng rng(cfg.seed);
    Subgraph sub = bfs_sample(g, 4, cfg, rng);
    CHECK(sub.nodes == std::vector<int64_t>{4});
    CHECK(sub.edges.empty());
}

TEST_CASE("induced edges include non-tree edges (triangle)") {
    TempDir tmp("smp_tri");
    write_file(tmp.file("triples.tsv"), "a\trel\tb\nb\trel\tc\na\trel\tc\n");
    write_file(tmp.file("templates.tsv"), "rel\t{head} r {tail}\n");
    KnowledgeGraph g = KnowledgeGraph::load(tmp.file("triples.tsv"), tmp.file("templates.tsv"));

    SamplerConfig cfg{1.0, 1, 3, 0};
    Rng rng(cfg.seed);
    Subgraph sub = bfs_sample(g, *g.find_node("a"), cfg, rng);
    CHECK(sub.nodes.size() == 3);

    // Oracle: brute-force induced edge set over the sampled nodes.
    std::set<int64_t> node_set(sub.nodes.begin(), sub.nodes.end());
    std::vector<int64_t> expected;
    for (size_t t = 0; t < g.triple_count(); ++t) {
        const Triple& tr = g.triple(static_cast<int64_t>(t));
        if (node_set.count(tr.head) && node_set.count(tr.tail))
            expected.push_back(static_cast<int64_t>(t));
    }
    CHECK(sub.edges == expected);  // includes the b-c edge, not just the BFS tree
    CHECK(sub.edges.size() == 3);
}

TEST_CASE("invalid center is rejected") {
    TempDir tmp("smp_bad");
    KnowledgeGraph g = septa::testing::demo_graph(tmp);
    SamplerConfig cfg;
    Rng rng(0);
    CHECK_THROWS_AS(bfs_sample(g, -1, cfg, rng), std::out_of_range);
    CHECK_THROWS_AS(bfs_sample(g, 99, cfg, rng), std::out_of_range);
}

TEST_CASE("sample_all_centers covers every node at depth 0") {
    TempDir tmp("smp_all");
    KnowledgeGraph g = septa::testing::random_graph(tmp, 100, 4, 300, 13);
    SamplerConfig cfg{0.5, 2, 16, 21};
    auto subs = sample_all_centers(g, cfg);
    REQUIRE(subs.size() == g.node_count());
    std::set<int64_t> covered;
    for (size_t c = 0; c < subs.size(); ++c) {
        CHECK(subs[c].center == static_cast<int64_t>(c));
        CHECK(subs[c].nodes[0] == static_cast<int64_t>(c));
        CHECK(subs[c].depth_of[0] == 0);
        covered.insert(subs[c].nodes.begin(), subs[c].nodes.end());
    }
    CHECK(covered.size() == g.node_count());  // union over all centers covers V
}

TEST_CASE("sampling invariants over random graphs and configs") {
    TempDir tmp("smp_prop");
    KnowledgeGraph g = septa::testing::random_graph(tmp, 60, 4, 200, 3);
    Rng meta(42);
    for (int trial = 0; trial < 300; ++trial) {
        SamplerConfig cfg;
        cfg.p = meta.next_double();
        cfg.depth = 1 + static_cast<int>(meta.below(4));
        cfg.max_nodes = 1 + static_cast<int>(meta.below(40));
        cfg.seed = meta.next_u64();
        int64_t center = static_cast<int64_t>(meta.below(g.node_count()));

        Rng rng1(cfg.seed), rng2(cfg.seed);
        Subgraph a = bfs_sample(g, center, cfg, rng1);
        Subgraph b = bfs_sample(g, center, cfg, rng2);

        CHECK(a.nodes == b.nodes);  // determinism
        CHECK(a.edges == b.edges);
        CHECK(a.nodes.size() <= static_cast<size_t>(cfg.max_nodes));
        CHECK(*std::max_element(a.depth_of.begin(), a.depth_of.end()) <= cfg.depth);
        CHECK(connected_to_center(a));
        for (const LocalEdge& e : a.local_edges) {
            CHECK(e.head < a.nodes.size());
            CHECK(e.tail < a.nodes.size());
        }
    }
}

TEST_CASE("p = 0 keeps only the center; p = 1 with no cap is the exact hop ball") {
    TempDir tmp("smp_pball");
    KnowledgeGraph g = septa::testing::random_graph(tmp, 50, 3, 140, 9);
    for (int64_t center : {0, 7, 23}) {
        SamplerConfig zero{0.0, 3, 1000, 4};
        Rng rng(zero.seed);
        Subgraph sub = bfs_sample(g, center, zero, rng);
        CHECK(sub.nodes == std::vector<int64_t>{center});

        for (int depth : {1, 2, 3}) {
            SamplerConfig full{1.0, depth, 1000000, 4};
            Rng rng2(full.seed);
            Subgraph ball = bfs_sample(g, center, full, rng2);
            std::set<int64_t> got(ball.nodes.begin(), ball.nodes.end());
            CHECK(got == hop_ball(g, center, depth));
        }
    }
}

TEST_CASE("debug dump lists center, nodes, and edges") {
    TempDir tmp("smp_dump");
    KnowledgeGraph g = septa::testing::demo_graph(tmp);
    SamplerConfig cfg{1.0, 2, 10, 0};
    Rng rng(cfg.seed);
    Subgraph sub = bfs_sample(g, *g.find_node("house"), cfg, rng);
    std::string dump = debug_dump(g, sub);
    CHECK(dump.find("center: house") != std::string::npos);
    CHECK(dump.find("MadeOf") != std::string::npos);
}

#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "core/pipeline.hpp"
#include "core/vectordb.hpp"
#include "test_util.hpp"

using namespace septa;
using septa::testing::TempDir;

namespace {

VectorDatabase random_db(size_t count, size_t dim, Rng& rng, bool with_duplicates = false) {
    VectorDatabase db(dim, "{}");
    std::vector<float> prev;
    for (size_t i = 0; i < count; ++i) {
        SubgraphVectorRecord rec;
        rec.center = static_cast<int64_t>(i);
        rec.node_count = 1 + static_cast<int32_t>(rng.below(30));
        if (with_duplicates && i > 0 && rng.bernoulli(0.3)) {
            rec.vec = prev;  // exact tie with an earlier record
        } else {
            rec.vec.resize(dim);
            for (auto& v : rec.vec) v = static_cast<float>(rng.uniform(-1, 1));
        }
        prev = rec.vec;
        db.add_record(std::move(rec));
    }
    return db;
}

// Ground truth: single-threaded scan with the same tie rule.
std::vector<SearchHit> naive_top_k(const VectorDatabase& db, const Vec& query, size_t k) {
    std::vector<SearchHit> all;
    for (size_t i = 0; i < db.size(); ++i) {
        Vec rec(db.record(i).vec.begin(), db.record(i).vec.end());
        all.push_back(SearchHit{static_cast<int64_t>(i), cosine(rec, query)});
    }
    std::sort(all.begin(), all.end(), [](const SearchHit& a, const SearchHit& b) {
        if (a.similarity != b.similarity) return a.similarity > b.similarity;
        return a.index < b.index;
    });
    all.resize(std::min(k, all.size()));
    return all;
}

}  // namespace

TEST_CASE("combine_embeddings norm matching") {
    SUBCASE("worked example") {
        Vec g = combine_embeddings(Vec{3, 0}, Vec{0, 4});
        CHECK(g[0] == doctest::Approx(2.0).epsilon(1e-12));
        CHECK(g[1] == doctest::Approx(2.0).epsilon(1e-12));
    }
    SUBCASE("parallel vectors collapse to the text embedding") {
        Vec h{0.5, -1.0, 2.0};
        Vec e{1.0, -2.0, 4.0};  // e = 2h
        Vec g = combine_embeddings(e, h);
        for (size_t i = 0; i < h.size(); ++i) CHECK(g[i] == doctest::Approx(h[i]).epsilon(1e-12));
    }
    SUBCASE("degenerate graph embedding falls back to h") {
        Vec h{1.0, 2.0};
        CHECK(combine_embeddings(Vec{0.0, 0.0}, h) == h);
    }
    SUBCASE("scaled component has the text norm; result never exceeds it") {
        Rng rng(5);
        for (int trial = 0; trial < 1000; ++trial) {
            Vec e(6), h(6);
            for (auto& v : e) v = rng.uniform(-3, 3);
            for (auto& v : h) v = rng.uniform(-3, 3);
            if (norm(e) < 1e-12) continue;
            Vec scaled = e;
            scale(scaled, norm(h) / norm(e));
            CHECK(norm(scaled) == doctest::Approx(norm(h)).epsilon(1e-6));
            CHECK(norm(combine_embeddings(e, h)) <= norm(h) + 1e-9);
        }
    }
    SUBCASE("non-finite input is rejected") {
        CHECK_THROWS_AS(
            combine_embeddings(Vec{std::numeric_limits<double>::infinity()}, Vec{1.0}),
            std::invalid_argument);
    }
}

TEST_CASE("top_k against the naive scan, including duplicate-vector ties") {
    Rng rng(7);
    for (int trial = 0; trial < 100; ++trial) {
        const size_t count = 1 + rng.below(400);
        const size_t dim = 1 + rng.below(32);
        const size_t k = 1 + rng.below(50);
        VectorDatabase db = random_db(count, dim, rng, trial % 2 == 0);
        Vec query(dim);
        for (auto& v : query) v = rng.uniform(-1, 1);
        if (norm(query) < 1e-9) continue;

        auto expected = naive_top_k(db, query, k);
        for (unsigned threads : {1u, 4u}) {
            auto got = db.top_k(query, k, threads);
            REQUIRE(got.size() == expected.size());
            for (size_t i = 0; i < got.size(); ++i) {
                CHECK(got[i].index == expected[i].index);
                CHECK(got[i].similarity == expected[i].similarity);
            }
        }
    }
}

TEST_CASE("top_k basic contracts") {
    Rng rng(11);
    VectorDatabase db = random_db(20, 8, rng);

    SUBCASE("the query itself ranks first with similarity 1") {
        Vec q(db.record(7).vec.begin(), db.record(7).vec.end());
        auto hits = db.top_k(q, 3);
        CHECK(hits[0].index == 7);
        CHECK(hits[0].similarity == doctest::Approx(1.0).epsilon(1e-9));
    }
    SUBCASE("k beyond the record count returns everything, ordered") {
        Vec q(8, 0.5);
        auto hits = db.top_k(q, 100);
        CHECK(hits.size() == db.size());
        for (size_t i = 1; i < hits.size(); ++i)
            CHECK(hits[i - 1].similarity >= hits[i].similarity);
    }
    SUBCASE("monotone prefix: results for k are a prefix of k+1") {
        Vec q(8, 0.25);
        auto k5 = db.top_k(q, 5);
        auto k6 = db.top_k(q, 6);
        for (size_t i = 0; i < 5; ++i) CHECK(k5[i].index == k6[i].index);
    }
    SUBCASE("zero query and dim mismatch are rejected") {
        CHECK_THROWS_AS(db.top_k(Vec(8, 0.0), 3), std::invalid_argument);
        CHECK_THROWS_AS(db.top_k(Vec(4, 1.0), 3), std::invalid_argument);
        CHECK_THROWS_AS(db.top_k(Vec(8, 1.0), 0), std::invalid_argument);
    }
}

TEST_CASE("database file round-trips bit-exactly") {
    TempDir tmp("db_io");
    Rng rng(13);
    VectorDatabase db = random_db(50, 16, rng);
    db.save(tmp.file("db.bin"));
    VectorDatabase loaded = VectorDatabase::load(tmp.file("db.bin"));
    loaded.save(tmp.file("db2.bin"));
    CHECK(septa::testing::read_file(tmp.file("db.bin")) ==
          septa::testing::read_file(tmp.file("db2.bin")));
    CHECK(loaded.size() == db.size());
    CHECK(loaded.dim() == db.dim());
    CHECK(loaded.record(3).vec == db.record(3).vec);

    SUBCASE("corrupted header errors instead of crashing") {
        std::string bytes = septa::testing::read_file(tmp.file("db.bin"));
        bytes[1] = 'x';
        septa::testing::write_file(tmp.file("bad.bin"), bytes);
        CHECK_THROWS_WITH_AS(VectorDatabase::load(tmp.file("bad.bin")),
                             doctest::Contains("bad magic"), std::runtime_error);
    }
    SUBCASE("truncated records error cleanly") {
        std::string bytes = septa::testing::read_file(tmp.file("db.bin"));
        septa::testing::write_file(tmp.file("trunc.bin"), bytes.substr(0, bytes.size() - 7));
        CHECK_THROWS_WITH_AS(VectorDatabase::load(tmp.file("trunc.bin")),
                             doctest::Contains("truncated"), std::runtime_error);
    }
}

TEST_CASE("build_database produces one record per node, deterministically") {
    TempDir tmp("db_build");
    KnowledgeGraph g = septa::testing::random_graph(tmp, 40, 3, 120, 3);
    AlignmentConfig cfg;
    cfg.dim_text = 12;
    cfg.dim_hidden = 12;
    cfg.dim_shared = 12;
    cfg.seed = 8;
    HashTextEmbedder embedder(cfg.dim_text, cfg.embed_seed);
    g.set_features(default_node_features(g, embedder));
    AlignmentModel model = AlignmentModel::init(cfg, g.relation_count());
    SamplerConfig sampler{0.7, 2, 10, 99};

    VectorDatabase db = build_database(g, model, sampler, 1);
    REQUIRE(db.size() == g.node_count());
    CHECK(db.dim() == 12);

    SUBCASE("records match an independent single-center pipeline run") {
        for (size_t c : {0u, 7u, 33u}) {
            Rng rng(sampler.seed ^ static_cast<uint64_t>(c));
            Subgraph sub = bfs_sample(g, static_cast<int64_t>(c), sampler, rng);
            std::string text = textualize_subgraph(g, sub);
            Vec e = model.encode_project_graph(sub);
            Vec h = model.embed_project_text(text);
            Vec expect = combine_embeddings(e, h);
            const auto& rec = db.record(c);
            CHECK(rec.center == static_cast<int64_t>(c));
            CHECK(rec.node_count == static_cast<int32_t>(sub.nodes.size()));
            for (size_t j = 0; j < expect.size(); ++j)
                CHECK(rec.vec[j] == static_cast<float>(expect[j]));
        }
    }
    SUBCASE("threaded build and file output are bit-identical to serial") {
        VectorDatabase threaded = build_database(g, model, sampler, 4);
        db.save(tmp.file("serial.bin"));
        threaded.save(tmp.file("threaded.bin"));
        CHECK(septa::testing::read_file(tmp.file("serial.bin")) ==
              septa::testing::read_file(tmp.file("threaded.bin")));
    }
    SUBCASE("norm regularization holds for every record") {
        // rebuild by hand and check the scaled-component norm equality
        for (size_t c = 0; c < g.node_count(); ++c) {
            Rng rng(sampler.seed ^ static_cast<uint64_t>(c));
            Subgraph sub = bfs_sample(g, static_cast<int64_t>(c), sampler, rng);
            Vec e = model.encode_project_graph(sub);
            Vec h = model.embed_project_text(textualize_subgraph(g, sub));
            if (norm(e) < 1e-12) continue;
            Vec scaled = e;
            scale(scaled, norm(h) / norm(e));
            CHECK(norm(scaled) == doctest::Approx(norm(h)).epsilon(1e-6));
        }
    }
}

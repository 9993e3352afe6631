// Exercises the shared-library C interface end to end: handles, error
// codes, and the full train -> build -> answer -> eval flow over files.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "septa/septa.h"

namespace {

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        static int counter = 0;
        path = std::filesystem::temp_directory_path() /
               ("septa_capi_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
    std::string dir() const { return path.string(); }
};

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("version and error reporting") {
    CHECK(std::strlen(septa_version()) > 0);

    septa_graph* g = nullptr;
    int rc = septa_graph_load("/nonexistent/triples.tsv", "/nonexistent/templates.tsv", &g);
    CHECK(rc == SEPTA_ERR_IO);
    CHECK(std::strlen(septa_last_error()) > 0);
    CHECK(g == nullptr);

    rc = septa_graph_load(nullptr, nullptr, nullptr);
    CHECK(rc == SEPTA_ERR_INVALID_ARGUMENT);
}

TEST_CASE("graph handle: load, counts, linking, sampling") {
    TempDir tmp;
    write_file(tmp.file("triples.tsv"), "house\tMadeOf\twood\nsun\tHasProperty\thot\n");
    write_file(tmp.file("templates.tsv"),
               "MadeOf\t{head} is made of {tail}\nHasProperty\t{head} has property {tail}\n");

    septa_graph* g = nullptr;
    REQUIRE(septa_graph_load(tmp.file("triples.tsv").c_str(), tmp.file("templates.tsv").c_str(),
                             &g) == SEPTA_OK);

    int64_t nodes = 0, relations = 0, triples = 0;
    CHECK(septa_graph_counts(g, &nodes, &relations, &triples) == SEPTA_OK);
    CHECK(nodes == 4);
    CHECK(relations == 2);
    CHECK(triples == 2);

    int64_t id = -1;
    CHECK(septa_graph_find_node(g, "house", &id) == SEPTA_OK);
    CHECK(id >= 0);
    int64_t missing = 0;
    CHECK(septa_graph_find_node(g, "zzz", &missing) == SEPTA_OK);
    CHECK(missing == -1);

    char* uri = nullptr;
    CHECK(septa_graph_node_uri(g, id, &uri) == SEPTA_OK);
    CHECK(std::string(uri) == "house");
    septa_string_free(uri);

    int64_t* ids = nullptr;
    size_t count = 0;
    CHECK(septa_graph_link_entities(g, "the house is made of wood", &ids, &count) == SEPTA_OK);
    CHECK(count == 2);
    int64_t* touching = nullptr;
    size_t tcount = 0;
    CHECK(septa_graph_triples_touching(g, ids, count, &touching, &tcount) == SEPTA_OK);
    CHECK(tcount == 1);
    char* text = nullptr;
    CHECK(septa_graph_triple_text(g, touching[0], &text) == SEPTA_OK);
    CHECK(std::string(text) == "house is made of wood. ");
    septa_string_free(text);
    septa_ids_free(touching);
    septa_ids_free(ids);

    septa_sampler_config scfg;
    septa_sampler_config_default(&scfg);
    scfg.p = 1.0;
    char* dump = nullptr;
    CHECK(septa_sample_dump(g, id, &scfg, &dump) == SEPTA_OK);
    CHECK(std::string(dump).find("center: house") != std::string::npos);
    septa_string_free(dump);

    CHECK(septa_sample_dump(g, 99, &scfg, &dump) == SEPTA_ERR_INVALID_ARGUMENT);

    septa_graph_free(g);
}

TEST_CASE("full pipeline through the C interface") {
    TempDir tmp;

    septa_benchmark_config bcfg;
    septa_benchmark_config_default(&bcfg);
    bcfg.nodes = 150;
    bcfg.instances = 60;
    bcfg.seed = 9;
    int64_t split[3] = {40, 10, 10};
    char* summary = nullptr;
    REQUIRE(septa_gen_benchmark(&bcfg, tmp.dir().c_str(), split, &summary) == SEPTA_OK);
    CHECK(std::string(summary).find("\"nodes\"") != std::string::npos);
    septa_string_free(summary);

    septa_graph* g = nullptr;
    REQUIRE(septa_graph_load(tmp.file("triples.tsv").c_str(), tmp.file("templates.tsv").c_str(),
                             &g) == SEPTA_OK);

    septa_align_config acfg;
    septa_align_config_default(&acfg);
    acfg.dim_text = 32;
    acfg.dim_hidden = 16;
    acfg.dim_shared = 16;
    acfg.epochs = 2;
    acfg.pair_count = 80;
    acfg.seed = 4;
    REQUIRE(septa_graph_prepare_features(g, acfg.dim_text, acfg.embed_seed) == SEPTA_OK);

    septa_sampler_config pair_sampler;
    septa_sampler_config_default(&pair_sampler);
    pair_sampler.max_nodes = 12;

    septa_model* model = nullptr;
    REQUIRE(septa_model_train(g, &acfg, &pair_sampler, tmp.file("log.jsonl").c_str(),
                              tmp.file("pairs.jsonl").c_str(), &model) == SEPTA_OK);
    CHECK(read_file(tmp.file("log.jsonl")).find("train_loss") != std::string::npos);
    CHECK(!read_file(tmp.file("pairs.jsonl")).empty());

    int32_t dt = 0, dh = 0, ds = 0;
    CHECK(septa_model_dims(model, &dt, &dh, &ds) == SEPTA_OK);
    CHECK(dt == 32);
    CHECK(ds == 16);

    REQUIRE(septa_model_save(model, tmp.file("model.bin").c_str()) == SEPTA_OK);
    septa_model* reloaded = nullptr;
    REQUIRE(septa_model_load(tmp.file("model.bin").c_str(), acfg.embed_seed, &reloaded) ==
            SEPTA_OK);
    REQUIRE(septa_model_save(reloaded, tmp.file("model2.bin").c_str()) == SEPTA_OK);
    CHECK(read_file(tmp.file("model.bin")) == read_file(tmp.file("model2.bin")));

    septa_sampler_config db_sampler;
    septa_sampler_config_default(&db_sampler);
    db_sampler.p = 0.9;
    db_sampler.max_nodes = 16;
    db_sampler.seed = 2;
    septa_database* db = nullptr;
    REQUIRE(septa_db_build(g, model, &db_sampler, 1, 0, &db) == SEPTA_OK);
    REQUIRE(septa_db_save(db, tmp.file("db.bin").c_str()) == SEPTA_OK);

    int32_t dim = 0;
    int64_t records = 0;
    CHECK(septa_db_info(db, &dim, &records) == SEPTA_OK);
    CHECK(dim == 16);
    CHECK(records > 0);

    septa_database* db2 = nullptr;
    REQUIRE(septa_db_load(tmp.file("db.bin").c_str(), &db2) == SEPTA_OK);
    REQUIRE(septa_db_save(db2, tmp.file("db2.bin").c_str()) == SEPTA_OK);
    CHECK(read_file(tmp.file("db.bin")) == read_file(tmp.file("db2.bin")));
    septa_db_free(db2);

    // top-k through the C surface matches a self-query
    std::vector<double> query(16, 0.0);
    char* probe_json = nullptr;
    (void)probe_json;
    std::vector<int64_t> indices(5);
    std::vector<double> sims(5);
    int32_t hit_count = 0;
    CHECK(septa_model_embed_text(model, "anything at all", query.data(), 16) == SEPTA_OK);
    CHECK(septa_db_top_k(db, query.data(), 16, 5, 2, indices.data(), sims.data(), &hit_count) ==
          SEPTA_OK);
    CHECK(hit_count == 5);
    for (int i = 1; i < hit_count; ++i) CHECK(sims[i - 1] >= sims[i]);

    septa_fusion_config fcfg;
    septa_fusion_config_default(&fcfg);
    fcfg.heads = 4;
    fcfg.retrieve_k = 5;
    fcfg.epochs = 4;
    fcfg.seed = 21;

    septa_head* head = nullptr;
    REQUIRE(septa_head_train(g, model, db, tmp.file("qa_train.jsonl").c_str(),
                             tmp.file("qa_dev.jsonl").c_str(), &fcfg, SEPTA_VARIANT_FULL,
                             &head) == SEPTA_OK);
    REQUIRE(septa_head_save(head, tmp.file("head.bin").c_str()) == SEPTA_OK);
    septa_head* head2 = nullptr;
    REQUIRE(septa_head_load(tmp.file("head.bin").c_str(), &head2) == SEPTA_OK);

    REQUIRE(septa_answer_file(g, model, db, head, tmp.file("qa_test.jsonl").c_str(), &fcfg,
                              SEPTA_VARIANT_FULL, tmp.file("pred.jsonl").c_str()) == SEPTA_OK);
    REQUIRE(septa_answer_file(g, model, db, head2, tmp.file("qa_test.jsonl").c_str(), &fcfg,
                              SEPTA_VARIANT_FULL, tmp.file("pred2.jsonl").c_str()) == SEPTA_OK);
    CHECK(read_file(tmp.file("pred.jsonl")) == read_file(tmp.file("pred2.jsonl")));

    double acc = 0.0;
    int64_t correct = 0, total = 0;
    REQUIRE(septa_eval(tmp.file("qa_test.jsonl").c_str(), tmp.file("pred.jsonl").c_str(), &acc,
                       &correct, &total) == SEPTA_OK);
    CHECK(total == 10);
    CHECK(acc == doctest::Approx(static_cast<double>(correct) / 10.0));

    int32_t predicted = -1;
    char* detail = nullptr;
    const char* choices[2] = {"first thing", "second thing"};
    REQUIRE(septa_predict(g, model, db, head, "what connects with nothing", choices, 2, &fcfg,
                          SEPTA_VARIANT_FULL, &predicted, &detail) == SEPTA_OK);
    CHECK(predicted >= 0);
    CHECK(std::string(detail).find("p_hat") != std::string::npos);
    septa_string_free(detail);

    septa_head_free(head2);
    septa_head_free(head);
    septa_db_free(db);
    septa_model_free(reloaded);
    septa_model_free(model);
    septa_graph_free(g);
}

TEST_CASE("dimension mismatches surface as argument errors") {
    TempDir tmp;
    write_file(tmp.file("triples.tsv"), "a\tr\tb\n");
    write_file(tmp.file("templates.tsv"), "r\t{head} r {tail}\n");
    septa_graph* g = nullptr;
    REQUIRE(septa_graph_load(tmp.file("triples.tsv").c_str(), tmp.file("templates.tsv").c_str(),
                             &g) == SEPTA_OK);
    septa_align_config acfg;
    septa_align_config_default(&acfg);
    acfg.dim_text = 8;
    acfg.dim_hidden = 8;
    acfg.dim_shared = 8;
    REQUIRE(septa_graph_prepare_features(g, 8, acfg.embed_seed) == SEPTA_OK);
    septa_model* model = nullptr;
    REQUIRE(septa_model_init(g, &acfg, &model) == SEPTA_OK);

    septa_sampler_config scfg;
    septa_sampler_config_default(&scfg);
    septa_database* db = nullptr;
    REQUIRE(septa_db_build(g, model, &scfg, 1, 0, &db) == SEPTA_OK);

    double query[4] = {1, 0, 0, 0};
    int64_t idx[1];
    double sim[1];
    int32_t n = 0;
    CHECK(septa_db_top_k(db, query, 4, 1, 1, idx, sim, &n) == SEPTA_ERR_INVALID_ARGUMENT);
    CHECK(std::string(septa_last_error()).find("dim") != std::string::npos);

    septa_db_free(db);
    septa_model_free(model);
    septa_graph_free(g);
}

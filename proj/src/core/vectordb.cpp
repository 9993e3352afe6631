#include "core/vectordb.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "core/serialize.hpp"
#include "core/textualize.hpp"

namespace septa {

Vec combine_embeddings(const Vec& graph_embedding, const Vec& text_embedding) {
    if (graph_embedding.size() != text_embedding.size())
        throw std::invalid_argument("combine_embeddings: dimension mismatch");
    if (!all_finite(graph_embedding) || !all_finite(text_embedding))
        throw std::invalid_argument("combine_embeddings: non-finite input");
    const double ne = norm(graph_embedding);
    const double nh = norm(text_embedding);
    if (ne < 1e-12) return text_embedding;
    const double coef = nh / ne;
    Vec g(graph_embedding.size());
    for (size_t i = 0; i < g.size(); ++i)
        g[i] = 0.5 * (coef * graph_embedding[i] + text_embedding[i]);
    return g;
}

void VectorDatabase::add_record(SubgraphVectorRecord record) {
    if (record.vec.size() != dim_)
        throw std::invalid_argument("add_record: vector dim mismatch");
    if (record.node_count < 1)
        throw std::invalid_argument("add_record: node_count must be >= 1");
    for (float v : record.vec)
        if (!std::isfinite(v)) throw std::invalid_argument("add_record: non-finite vector");
    records_.push_back(std::move(record));
}

namespace {

double record_cosine(const std::vector<float>& rec, const Vec& query, double query_norm) {
    double dot = 0.0, rn = 0.0;
    for (size_t i = 0; i < rec.size(); ++i) {
        const double r = static_cast<double>(rec[i]);
        dot += r * query[i];
        rn += r * r;
    }
    rn = std::sqrt(rn);
    if (rn < 1e-300) return 0.0;
    return dot / (rn * query_norm);
}

}  // namespace

std::vector<SearchHit> VectorDatabase::top_k(const Vec& query, size_t k, unsigned threads) const {
    if (query.size() != dim_)
        throw std::invalid_argument("top_k: query dim " + std::to_string(query.size()) +
                                    " != database dim " + std::to_string(dim_));
    if (k < 1) throw std::invalid_argument("top_k: k must be >= 1");
    const double qn = norm(query);
    if (qn < 1e-300) throw std::invalid_argument("top_k: zero query vector");

    std::vector<double> sims(records_.size());
    auto scan = [&](size_t begin, size_t end) {
        for (size_t i = begin; i < end; ++i)
            sims[i] = record_cosine(records_[i].vec, query, qn);
    };
    if (threads <= 1 || records_.size() < 2 * threads) {
        scan(0, records_.size());
    } else {
        std::vector<std::thread> workers;
        const size_t chunk = (records_.size() + threads - 1) / threads;
        for (unsigned t = 0; t < threads; ++t) {
            size_t begin = t * chunk;
            size_t end = std::min(records_.size(), begin + chunk);
            if (begin >= end) break;
            workers.emplace_back(scan, begin, end);
        }
        for (auto& w : workers) w.join();
    }

    const size_t take = std::min(k, records_.size());
    std::vector<size_t> order(records_.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::partial_sort(order.begin(), order.begin() + static_cast<long>(take), order.end(),
                      [&sims](size_t a, size_t b) {
                          if (sims[a] != sims[b]) return sims[a] > sims[b];
                          return a < b;
                      });
    std::vector<SearchHit> hits(take);
    for (size_t i = 0; i < take; ++i)
        hits[i] = SearchHit{static_cast<int64_t>(order[i]), sims[order[i]]};
    return hits;
}

namespace {

constexpr char kDbMagic[4] = {'S', 'G', 'V', 'D'};
constexpr uint32_t kDbVersion = 1;

}  // namespace

void VectorDatabase::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    write_magic(out, kDbMagic);
    write_u32le(out, kDbVersion);
    write_u32le(out, static_cast<uint32_t>(dim_));
    write_u64le(out, records_.size());
    write_u64le(out, metadata_.size());
    out.write(metadata_.data(), static_cast<long>(metadata_.size()));
    for (const auto& rec : records_) {
        write_i64le(out, rec.center);
        write_u32le(out, static_cast<uint32_t>(rec.node_count));
        for (float v : rec.vec) write_f32le(out, v);
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

VectorDatabase VectorDatabase::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open database file: " + path);
    expect_magic(in, kDbMagic, path);
    uint32_t version = read_u32le(in, "version");
    if (version != kDbVersion)
        throw std::runtime_error("unsupported database version " + std::to_string(version) +
                                 " in " + path);
    uint32_t dim = read_u32le(in, "dim");
    uint64_t count = read_u64le(in, "record count");
    uint64_t meta_len = read_u64le(in, "metadata length");
    std::string metadata(meta_len, '\0');
    in.read(metadata.data(), static_cast<long>(meta_len));
    if (!in) throw std::runtime_error("truncated file while reading metadata in " + path);
    VectorDatabase db(dim, std::move(metadata));
    for (uint64_t i = 0; i < count; ++i) {
        SubgraphVectorRecord rec;
        rec.center = read_i64le(in, "record center");
        rec.node_count = static_cast<int32_t>(read_u32le(in, "record node_count"));
        rec.vec.resize(dim);
        for (auto& v : rec.vec) v = read_f32le(in, "record vector");
        db.records_.push_back(std::move(rec));
    }
    return db;
}

VectorDatabase build_database(const KnowledgeGraph& graph, const AlignmentModel& model,
                              const SamplerConfig& sampler_config, unsigned threads,
                              size_t max_sentences) {
    if (graph.features().empty())
        throw std::runtime_error("build_database: graph has no node features");
    sampler_config.validate();

    nlohmann::json meta;
    meta["sampler"] = {{"p", sampler_config.p},
                       {"depth", sampler_config.depth},
                       {"max_nodes", sampler_config.max_nodes},
                       {"seed", sampler_config.seed}};
    meta["dim"] = model.shared_dim();
    meta["max_sentences"] = max_sentences;

    VectorDatabase db(model.shared_dim(), meta.dump());

    const size_t n = graph.node_count();
    std::vector<SubgraphVectorRecord> records(n);
    std::vector<std::string> errors(n);

    auto build_range = [&](size_t begin, size_t end) {
        for (size_t c = begin; c < end; ++c) {
            try {
                Rng rng(sampler_config.seed ^ static_cast<uint64_t>(c));
                Subgraph sub = bfs_sample(graph, static_cast<int64_t>(c), sampler_config, rng);
                std::string text = textualize_subgraph(graph, sub, max_sentences);
                Vec e = model.encode_project_graph(sub);
                Vec h = model.embed_project_text(text);
                Vec g = combine_embeddings(e, h);
                SubgraphVectorRecord rec;
                rec.center = static_cast<int64_t>(c);
                rec.node_count = static_cast<int32_t>(sub.nodes.size());
                rec.vec.resize(g.size());
                for (size_t i = 0; i < g.size(); ++i) rec.vec[i] = static_cast<float>(g[i]);
                records[c] = std::move(rec);
            } catch (const std::exception& ex) {
                errors[c] = ex.what();
            }
        }
    };

    if (threads <= 1 || n < 2 * threads) {
        build_range(0, n);
    } else {
        std::vector<std::thread> workers;
        const size_t chunk = (n + threads - 1) / threads;
        for (unsigned t = 0; t < threads; ++t) {
            size_t begin = t * chunk;
            size_t end = std::min(n, begin + chunk);
            if (begin >= end) break;
            workers.emplace_back(build_range, begin, end);
        }
        for (auto& w : workers) w.join();
    }

    for (size_t c = 0; c < n; ++c) {
        if (!errors[c].empty())
            throw std::runtime_error("build_database: center " + std::to_string(c) + " (" +
                                     graph.node(static_cast<int64_t>(c)).uri +
                                     "): " + errors[c]);
        db.add_record(std::move(records[c]));
    }
    return db;
}

}  // namespace septa

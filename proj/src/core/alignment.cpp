#include "core/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "core/serialize.hpp"

namespace septa {

namespace {

constexpr double kDegenerateNorm = 1e-300;

float quantize_f32(double v) { return static_cast<float>(v); }

void quantize_matrix(Matrix& m) {
    for (auto& v : m.data) v = static_cast<double>(quantize_f32(v));
}

void quantize_vec(Vec& v) {
    for (auto& x : v) x = static_cast<double>(quantize_f32(x));
}

// Pairwise cosine matrix C_ij = cos(E_i, H_j).
Matrix cosine_matrix(const Matrix& E, const Matrix& H) {
    Matrix C(E.rows, H.rows);
    Vec enorm(E.rows), hnorm(H.rows);
    for (size_t i = 0; i < E.rows; ++i)
        enorm[i] = std::sqrt(std::inner_product(E.row(i), E.row(i) + E.cols, E.row(i), 0.0));
    for (size_t j = 0; j < H.rows; ++j)
        hnorm[j] = std::sqrt(std::inner_product(H.row(j), H.row(j) + H.cols, H.row(j), 0.0));
    for (size_t i = 0; i < E.rows; ++i) {
        for (size_t j = 0; j < H.rows; ++j) {
            double denom = enorm[i] * hnorm[j];
            C.at(i, j) = denom < kDegenerateNorm
                             ? 0.0
                             : std::inner_product(E.row(i), E.row(i) + E.cols, H.row(j), 0.0) /
                                   denom;
        }
    }
    return C;
}

void check_loss_inputs(const Matrix& E, const Matrix& H, double tau) {
    if (E.rows == 0 || E.rows != H.rows || E.cols != H.cols)
        throw std::invalid_argument("info_nce: E and H must be same-shape, non-empty");
    if (!(tau > 0.0)) throw std::invalid_argument("info_nce: tau must be > 0");
    if (!all_finite(E) || !all_finite(H))
        throw std::invalid_argument("info_nce: non-finite input");
}

// Mean over rows of (logsumexp_j(S_ij) - S_ii) with S = C/tau.
double info_nce_rows(const Matrix& C, double tau, bool transpose) {
    const size_t n = C.rows;
    double total = 0.0;
    for (size_t i = 0; i < n; ++i) {
        double mx = -1e308;
        for (size_t j = 0; j < n; ++j) {
            double s = (transpose ? C.at(j, i) : C.at(i, j)) / tau;
            mx = std::max(mx, s);
        }
        double sum = 0.0;
        for (size_t j = 0; j < n; ++j) {
            double s = (transpose ? C.at(j, i) : C.at(i, j)) / tau;
            sum += std::exp(s - mx);
        }
        total += mx + std::log(sum) - C.at(i, i) / tau;
    }
    return total / static_cast<double>(n);
}

}  // namespace

void AlignmentConfig::validate() const {
    if (batch_size < 1) throw std::invalid_argument("alignment: batch_size must be >= 1");
    if (!(temperature > 0.0)) throw std::invalid_argument("alignment: temperature must be > 0");
    if (holdout_fraction < 0.0 || holdout_fraction >= 1.0)
        throw std::invalid_argument("alignment: holdout_fraction must be in [0, 1)");
    if (pair_count < 1) throw std::invalid_argument("alignment: pair_count must be >= 1");
    if (dim_text < 1 || dim_hidden < 1 || dim_shared < 1 || layers < 1)
        throw std::invalid_argument("alignment: dims and layers must be >= 1");
}

AlignmentModel AlignmentModel::init(const AlignmentConfig& config, size_t relation_count) {
    config.validate();
    Rng rng(derive_seed(config.seed, 0xA11));
    AlignmentModel model;
    model.encoder = GraphEncoderParams::init(config.layers, config.dim_text, config.dim_hidden,
                                             relation_count, rng);
    model.projection =
        ProjectionPair::init(config.dim_hidden, config.dim_text, config.dim_shared, rng);
    model.temperature = config.temperature;
    model.embedder = std::make_shared<HashTextEmbedder>(config.dim_text, config.embed_seed);
    model.quantize();
    return model;
}

void AlignmentModel::quantize() {
    for (auto& m : encoder.w_self) quantize_matrix(m);
    for (auto& m : encoder.w_neigh) quantize_matrix(m);
    for (auto& m : encoder.rel_emb) quantize_matrix(m);
    quantize_matrix(projection.w_graph);
    quantize_vec(projection.b_graph);
    quantize_matrix(projection.w_text);
    quantize_vec(projection.b_text);
}

void batch_embed(const AlignmentModel& model, std::span<const GraphTextPair> pairs,
                 const std::vector<Vec>& text_embeddings, Matrix& E, Matrix& H) {
    if (pairs.empty()) throw std::invalid_argument("batch_embed: empty batch");
    if (text_embeddings.size() != pairs.size())
        throw std::invalid_argument("batch_embed: cached embedding count mismatch");
    const size_t d = model.shared_dim();
    E = Matrix(pairs.size(), d);
    H = Matrix(pairs.size(), d);
    for (size_t i = 0; i < pairs.size(); ++i) {
        Vec e = model.encode_project_graph(pairs[i].subgraph);
        Vec h = project_text(model.projection, text_embeddings[i]);
        std::copy(e.begin(), e.end(), E.row(i));
        std::copy(h.begin(), h.end(), H.row(i));
    }
}

void batch_embed(const AlignmentModel& model, std::span<const GraphTextPair> pairs, Matrix& E,
                 Matrix& H) {
    std::vector<Vec> cached;
    cached.reserve(pairs.size());
    for (const auto& p : pairs) cached.push_back(model.embedder->embed(p.text));
    batch_embed(model, pairs, cached, E, H);
}

double info_nce_g2t(const Matrix& E, const Matrix& H, double tau) {
    check_loss_inputs(E, H, tau);
    return info_nce_rows(cosine_matrix(E, H), tau, /*transpose=*/false);
}

double info_nce_t2g(const Matrix& E, const Matrix& H, double tau) {
    check_loss_inputs(E, H, tau);
    return info_nce_rows(cosine_matrix(E, H), tau, /*transpose=*/true);
}

double alignment_loss(const Matrix& E, const Matrix& H, double tau) {
    check_loss_inputs(E, H, tau);
    Matrix C = cosine_matrix(E, H);
    return 0.5 * (info_nce_rows(C, tau, false) + info_nce_rows(C, tau, true));
}

BatchLoss alignment_loss_and_gradients(const AlignmentModel& model,
                                       std::span<const GraphTextPair> pairs,
                                       const std::vector<Vec>& text_embeddings) {
    const size_t n = pairs.size();
    if (n == 0) throw std::invalid_argument("alignment gradients: empty batch");
    const size_t d = model.shared_dim();
    const double tau = model.temperature;

    // Forward with traces.
    std::vector<GraphForwardTrace> traces;
    traces.reserve(n);
    Matrix E(n, d), H(n, d);
    for (size_t i = 0; i < n; ++i) {
        traces.push_back(encode_graph_trace(model.encoder, pairs[i].subgraph));
        Vec e = project_graph(model.projection, traces[i].pooled);
        Vec h = project_text(model.projection, text_embeddings[i]);
        std::copy(e.begin(), e.end(), E.row(i));
        std::copy(h.begin(), h.end(), H.row(i));
    }
    check_loss_inputs(E, H, tau);

    Matrix C = cosine_matrix(E, H);
    BatchLoss out;
    out.loss = 0.5 * (info_nce_rows(C, tau, false) + info_nce_rows(C, tau, true));

    // d(loss)/dC: average of the two directional softmax terms.
    const double inv_n_tau = 1.0 / (static_cast<double>(n) * tau);
    Matrix dC(n, n);
    for (bool transpose : {false, true}) {
        for (size_t i = 0; i < n; ++i) {
            double mx = -1e308;
            for (size_t j = 0; j < n; ++j)
                mx = std::max(mx, (transpose ? C.at(j, i) : C.at(i, j)) / tau);
            double denom = 0.0;
            for (size_t j = 0; j < n; ++j)
                denom += std::exp((transpose ? C.at(j, i) : C.at(i, j)) / tau - mx);
            for (size_t j = 0; j < n; ++j) {
                double p = std::exp((transpose ? C.at(j, i) : C.at(i, j)) / tau - mx) / denom;
                double g = 0.5 * inv_n_tau * (p - (i == j ? 1.0 : 0.0));
                if (transpose)
                    dC.at(j, i) += g;
                else
                    dC.at(i, j) += g;
            }
        }
    }

    // Cosine backward into row gradients dE, dH.
    Vec enorm(n), hnorm(n);
    for (size_t i = 0; i < n; ++i) {
        enorm[i] = std::sqrt(std::inner_product(E.row(i), E.row(i) + d, E.row(i), 0.0));
        hnorm[i] = std::sqrt(std::inner_product(H.row(i), H.row(i) + d, H.row(i), 0.0));
    }
    Matrix dE(n, d), dH(n, d);
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = 0; j < n; ++j) {
            const double g = dC.at(i, j);
            if (g == 0.0) continue;
            if (enorm[i] < kDegenerateNorm || hnorm[j] < kDegenerateNorm) continue;
            const double inv = 1.0 / (enorm[i] * hnorm[j]);
            const double c = C.at(i, j);
            const double* e = E.row(i);
            const double* h = H.row(j);
            double* de = dE.row(i);
            double* dh = dH.row(j);
            const double ie2 = 1.0 / (enorm[i] * enorm[i]);
            const double ih2 = 1.0 / (hnorm[j] * hnorm[j]);
            for (size_t t = 0; t < d; ++t) {
                de[t] += g * (h[t] * inv - c * e[t] * ie2);
                dh[t] += g * (e[t] * inv - c * h[t] * ih2);
            }
        }
    }

    // Projection and encoder gradients.
    out.grads.encoder = GraphEncoderGrads::zeros_like(model.encoder);
    out.grads.w_graph = Matrix(model.projection.w_graph.rows, model.projection.w_graph.cols);
    out.grads.b_graph.assign(d, 0.0);
    out.grads.w_text = Matrix(model.projection.w_text.rows, model.projection.w_text.cols);
    out.grads.b_text.assign(d, 0.0);
    for (size_t i = 0; i < n; ++i) {
        Vec de(dE.row(i), dE.row(i) + d);
        Vec dh(dH.row(i), dH.row(i) + d);
        add_outer(out.grads.w_graph, de, traces[i].pooled);
        axpy(out.grads.b_graph, 1.0, de);
        add_outer(out.grads.w_text, dh, text_embeddings[i]);
        axpy(out.grads.b_text, 1.0, dh);
        Vec pooled_grad = matvec_transposed(model.projection.w_graph, de);
        encode_graph_backward(model.encoder, traces[i], pooled_grad, out.grads.encoder);
    }
    return out;
}

RetrievalAccuracy eval_retrieval_accuracy(const AlignmentModel& model,
                                          std::span<const GraphTextPair> pairs, size_t k) {
    Matrix E, H;
    batch_embed(model, pairs, E, H);
    Matrix C = cosine_matrix(E, H);
    const size_t n = pairs.size();
    RetrievalAccuracy acc;
    for (size_t i = 0; i < n; ++i) {
        size_t g2t_rank = 1, t2g_rank = 1;
        for (size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            if (C.at(i, j) > C.at(i, i)) ++g2t_rank;
            if (C.at(j, i) > C.at(i, i)) ++t2g_rank;
        }
        acc.g2t_top1 += g2t_rank == 1;
        acc.g2t_topk += g2t_rank <= k;
        acc.t2g_top1 += t2g_rank == 1;
        acc.t2g_topk += t2g_rank <= k;
    }
    const double inv = 1.0 / static_cast<double>(n);
    acc.g2t_top1 *= inv;
    acc.g2t_topk *= inv;
    acc.t2g_top1 *= inv;
    acc.t2g_topk *= inv;
    return acc;
}

AlignmentTrainResult train_alignment(const KnowledgeGraph& graph, const AlignmentConfig& config,
                                     const SamplerConfig& sampler_config) {
    config.validate();
    if (graph.features().empty())
        throw std::runtime_error("train_alignment: graph has no node features");
    if (graph.feature_dim() != config.dim_text)
        throw std::runtime_error("train_alignment: feature dim " +
                                 std::to_string(graph.feature_dim()) + " != dim_text " +
                                 std::to_string(config.dim_text));

    AlignmentTrainResult result;
    result.model = AlignmentModel::init(config, graph.relation_count());

    auto pairs = build_pair_dataset(graph, sampler_config, config.pair_count,
                                    derive_seed(config.seed, 1), config.max_sentences);
    const size_t holdout =
        static_cast<size_t>(std::floor(config.holdout_fraction * static_cast<double>(pairs.size())));
    const size_t train_count = pairs.size() - holdout;
    if (train_count == 0) throw std::runtime_error("train_alignment: no training pairs left");

    std::vector<Vec> text_cache;
    text_cache.reserve(pairs.size());
    for (const auto& p : pairs) text_cache.push_back(result.model.embedder->embed(p.text));

    std::span<const GraphTextPair> holdout_pairs(pairs.data() + train_count, holdout);

    const double lr = config.learning_rate;
    for (size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        std::vector<size_t> order(train_count);
        std::iota(order.begin(), order.end(), 0);
        Rng shuffle_rng(derive_seed(config.seed, 1000 + epoch));
        shuffle_rng.shuffle(order);

        double loss_sum = 0.0;
        size_t seen = 0;
        for (size_t start = 0; start < train_count; start += config.batch_size) {
            const size_t bs = std::min(config.batch_size, train_count - start);
            std::vector<GraphTextPair> batch;
            std::vector<Vec> batch_text;
            batch.reserve(bs);
            batch_text.reserve(bs);
            for (size_t b = 0; b < bs; ++b) {
                batch.push_back(pairs[order[start + b]]);
                batch_text.push_back(text_cache[order[start + b]]);
            }
            BatchLoss bl = alignment_loss_and_gradients(result.model, batch, batch_text);
            if (!std::isfinite(bl.loss)) {
                throw std::runtime_error("train_alignment: non-finite loss at epoch " +
                                         std::to_string(epoch) + " (diverged)");
            }
            loss_sum += bl.loss * static_cast<double>(bs);
            seen += bs;

            auto& enc = result.model.encoder;
            for (size_t l = 0; l < enc.layers; ++l) {
                for (size_t i = 0; i < enc.w_self[l].data.size(); ++i)
                    enc.w_self[l].data[i] -= lr * bl.grads.encoder.w_self[l].data[i];
                for (size_t i = 0; i < enc.w_neigh[l].data.size(); ++i)
                    enc.w_neigh[l].data[i] -= lr * bl.grads.encoder.w_neigh[l].data[i];
                for (size_t i = 0; i < enc.rel_emb[l].data.size(); ++i)
                    enc.rel_emb[l].data[i] -= lr * bl.grads.encoder.rel_emb[l].data[i];
            }
            auto& proj = result.model.projection;
            for (size_t i = 0; i < proj.w_graph.data.size(); ++i)
                proj.w_graph.data[i] -= lr * bl.grads.w_graph.data[i];
            for (size_t i = 0; i < proj.b_graph.size(); ++i)
                proj.b_graph[i] -= lr * bl.grads.b_graph[i];
            for (size_t i = 0; i < proj.w_text.data.size(); ++i)
                proj.w_text.data[i] -= lr * bl.grads.w_text.data[i];
            for (size_t i = 0; i < proj.b_text.size(); ++i)
                proj.b_text[i] -= lr * bl.grads.b_text[i];
        }

        EpochLog log;
        log.epoch = epoch;
        log.train_loss = loss_sum / static_cast<double>(seen);
        if (holdout > 0) {
            Matrix He, Hh;
            std::vector<Vec> holdout_text(text_cache.begin() + static_cast<long>(train_count),
                                          text_cache.end());
            batch_embed(result.model, holdout_pairs, holdout_text, He, Hh);
            log.holdout_loss = alignment_loss(He, Hh, config.temperature);
            log.retrieval = eval_retrieval_accuracy(result.model, holdout_pairs, config.eval_top_k);
        }
        result.log.push_back(log);
    }

    result.model.quantize();
    return result;
}

void write_training_log(const std::vector<EpochLog>& log, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    for (const auto& e : log) {
        nlohmann::json j;
        j["epoch"] = e.epoch;
        j["train_loss"] = e.train_loss;
        j["holdout_loss"] = e.holdout_loss;
        j["g2t_top1"] = e.retrieval.g2t_top1;
        j["g2t_topk"] = e.retrieval.g2t_topk;
        j["t2g_top1"] = e.retrieval.t2g_top1;
        j["t2g_topk"] = e.retrieval.t2g_topk;
        out << j.dump() << "\n";
    }
}

namespace {

constexpr char kModelMagic[4] = {'S', 'G', 'T', 'M'};
constexpr uint32_t kModelVersion = 1;

void write_matrix_f32(std::ostream& out, const Matrix& m) {
    for (double v : m.data) write_f32le(out, static_cast<float>(v));
}

void write_vec_f32(std::ostream& out, const Vec& v) {
    for (double x : v) write_f32le(out, static_cast<float>(x));
}

Matrix read_matrix_f32(std::istream& in, size_t rows, size_t cols, const char* what) {
    Matrix m(rows, cols);
    for (auto& v : m.data) v = static_cast<double>(read_f32le(in, what));
    return m;
}

Vec read_vec_f32(std::istream& in, size_t n, const char* what) {
    Vec v(n);
    for (auto& x : v) x = static_cast<double>(read_f32le(in, what));
    return v;
}

}  // namespace

void save_model(const AlignmentModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    write_magic(out, kModelMagic);
    write_u32le(out, kModelVersion);
    write_u32le(out, static_cast<uint32_t>(model.encoder.dim_in));
    write_u32le(out, static_cast<uint32_t>(model.encoder.dim_hidden));
    write_u32le(out, static_cast<uint32_t>(model.shared_dim()));
    write_u32le(out, static_cast<uint32_t>(model.encoder.layers));
    write_u32le(out, static_cast<uint32_t>(model.encoder.relation_count));
    for (size_t l = 0; l < model.encoder.layers; ++l) {
        write_matrix_f32(out, model.encoder.w_self[l]);
        write_matrix_f32(out, model.encoder.w_neigh[l]);
        write_matrix_f32(out, model.encoder.rel_emb[l]);
    }
    write_matrix_f32(out, model.projection.w_graph);
    write_vec_f32(out, model.projection.b_graph);
    write_matrix_f32(out, model.projection.w_text);
    write_vec_f32(out, model.projection.b_text);
    if (!out) throw std::runtime_error("write failed: " + path);
}

AlignmentModel load_model(const std::string& path, uint64_t embed_seed, double temperature) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open model file: " + path);
    expect_magic(in, kModelMagic, path);
    uint32_t version = read_u32le(in, "version");
    if (version != kModelVersion)
        throw std::runtime_error("unsupported model version " + std::to_string(version) + " in " +
                                 path);
    AlignmentModel model;
    model.encoder.dim_in = read_u32le(in, "dim_in");
    model.encoder.dim_hidden = read_u32le(in, "dim_hidden");
    uint32_t d = read_u32le(in, "dim_shared");
    model.encoder.layers = read_u32le(in, "layers");
    model.encoder.relation_count = read_u32le(in, "relation_count");
    for (size_t l = 0; l < model.encoder.layers; ++l) {
        size_t in_dim = l == 0 ? model.encoder.dim_in : model.encoder.dim_hidden;
        model.encoder.w_self.push_back(
            read_matrix_f32(in, model.encoder.dim_hidden, in_dim, "w_self"));
        model.encoder.w_neigh.push_back(
            read_matrix_f32(in, model.encoder.dim_hidden, in_dim, "w_neigh"));
        model.encoder.rel_emb.push_back(
            read_matrix_f32(in, model.encoder.relation_count, model.encoder.dim_hidden, "rel_emb"));
    }
    model.projection.w_graph = read_matrix_f32(in, d, model.encoder.dim_hidden, "w_graph");
    model.projection.b_graph = read_vec_f32(in, d, "b_graph");
    model.projection.w_text = read_matrix_f32(in, d, model.encoder.dim_in, "w_text");
    model.projection.b_text = read_vec_f32(in, d, "b_text");
    model.temperature = temperature;
    model.embedder = std::make_shared<HashTextEmbedder>(model.encoder.dim_in, embed_seed);
    return model;
}

}  // namespace septa

#include "core/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "core/serialize.hpp"

namespace septa {

namespace {

void quantize_matrix(Matrix& m) {
    for (auto& v : m.data) v = static_cast<double>(static_cast<float>(v));
}

void quantize_vec(Vec& v) {
    for (auto& x : v) x = static_cast<double>(static_cast<float>(x));
}

Vec stable_softmax(const Vec& logits) {
    double mx = *std::max_element(logits.begin(), logits.end());
    Vec out(logits.size());
    double sum = 0.0;
    for (size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - mx);
        sum += out[i];
    }
    for (auto& v : out) v /= sum;
    return out;
}

}  // namespace

FusionHead FusionHead::init(size_t dim, size_t heads, double lambda, uint64_t seed) {
    if (heads < 1 || dim % heads != 0)
        throw std::invalid_argument("fusion head: heads must divide dim");
    if (lambda < 0.0 || lambda > 1.0)
        throw std::invalid_argument("fusion head: lambda must be in [0, 1]");
    Rng rng(derive_seed(seed, 0xF0));
    FusionHead h;
    h.heads = heads;
    h.dim = dim;
    h.dim_head = dim / heads;
    h.lambda = lambda;
    for (size_t i = 0; i < heads; ++i) {
        h.w_query.push_back(Matrix::uniform_init(h.dim_head, dim, dim, rng));
        // keys start tied to queries: logits begin proportional to the
        // query-vector/retrieved-vector inner product, so attention is
        // similarity-shaped from the first step instead of random
        h.w_key.push_back(h.w_query.back());
        h.w_value.push_back(Matrix::uniform_init(h.dim_head, dim, dim, rng));
    }
    h.w_out = Matrix::uniform_init(dim, heads * h.dim_head, heads * h.dim_head, rng);
    h.know_w = Matrix::uniform_init(1, dim, dim, rng).data;
    h.know_b = 0.0;
    h.ctx_w = Matrix::uniform_init(1, dim, dim, rng).data;
    h.ctx_b = 0.0;
    h.quantize();
    return h;
}

void FusionHead::quantize() {
    for (auto& m : w_query) quantize_matrix(m);
    for (auto& m : w_key) quantize_matrix(m);
    for (auto& m : w_value) quantize_matrix(m);
    quantize_matrix(w_out);
    quantize_vec(know_w);
    know_b = static_cast<double>(static_cast<float>(know_b));
    quantize_vec(ctx_w);
    ctx_b = static_cast<double>(static_cast<float>(ctx_b));
    lambda = static_cast<double>(static_cast<float>(lambda));
}

AttendResult attend(const FusionHead& head, const Vec& query, const Matrix& retrieved) {
    if (retrieved.rows == 0)
        throw std::invalid_argument("attend: no retrieved vectors (k = 0)");
    if (query.size() != head.dim || retrieved.cols != head.dim)
        throw std::invalid_argument("attend: dimension mismatch");

    const size_t k = retrieved.rows;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head.dim_head));
    AttendResult out;
    out.weights = Matrix(head.heads, k);
    Vec concat(head.heads * head.dim_head, 0.0);

    for (size_t h = 0; h < head.heads; ++h) {
        Vec q = matvec(head.w_query[h], query);
        Vec logits(k);
        for (size_t i = 0; i < k; ++i) {
            Vec row(retrieved.row(i), retrieved.row(i) + head.dim);
            logits[i] = dot(q, matvec(head.w_key[h], row)) * inv_sqrt;
        }
        Vec weights = stable_softmax(logits);
        std::copy(weights.begin(), weights.end(), out.weights.row(h));
        for (size_t i = 0; i < k; ++i) {
            Vec row(retrieved.row(i), retrieved.row(i) + head.dim);
            Vec value = matvec(head.w_value[h], row);
            for (size_t j = 0; j < head.dim_head; ++j)
                concat[h * head.dim_head + j] += weights[i] * value[j];
        }
    }
    out.fused = matvec(head.w_out, concat);
    return out;
}

ChoiceScore score_choice(const FusionHead& head, const Vec& query, const Vec& fused,
                         const Vec& context) {
    if (query.size() != head.dim || fused.size() != head.dim || context.size() != head.dim)
        throw std::invalid_argument("score_choice: dimension mismatch");
    ChoiceScore s;
    double acc = head.know_b;
    for (size_t i = 0; i < head.dim; ++i) acc += head.know_w[i] * (query[i] + fused[i]);
    s.p_hat = acc;
    s.p_tilde = dot(head.ctx_w, context) + head.ctx_b;
    s.p = head.lambda * s.p_hat + (1.0 - head.lambda) * s.p_tilde;
    return s;
}

const char* variant_name(Variant v) {
    switch (v) {
        case Variant::full: return "full";
        case Variant::no_alignment: return "no-alignment";
        case Variant::no_subgraph: return "no-subgraph";
        case Variant::no_triplets: return "no-triplets";
        case Variant::lambda_only: return "lambda-1.0";
    }
    return "?";
}

Variant variant_from_name(const std::string& name) {
    if (name == "full") return Variant::full;
    if (name == "no-alignment") return Variant::no_alignment;
    if (name == "no-subgraph") return Variant::no_subgraph;
    if (name == "no-triplets") return Variant::no_triplets;
    if (name == "lambda-1.0") return Variant::lambda_only;
    throw std::invalid_argument("unknown ablation variant: " + name);
}

void FusionConfig::validate() const {
    if (heads < 1) throw std::invalid_argument("fusion: heads must be >= 1");
    if (lambda < 0.0 || lambda > 1.0)
        throw std::invalid_argument("fusion: lambda must be in [0, 1]");
    if (retrieve_k < 1) throw std::invalid_argument("fusion: retrieve_k must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("fusion: batch_size must be >= 1");
    if (patience < 1) throw std::invalid_argument("fusion: patience must be >= 1");
}

InstanceFeatures build_instance_features(const KnowledgeGraph& graph,
                                         const AlignmentModel& model, const VectorDatabase& db,
                                         const QAInstance& instance, const FusionConfig& config,
                                         Variant variant) {
    InstanceFeatures out;
    out.id = instance.id;
    out.answer = instance.answer;
    const size_t top_k_triplets =
        variant == Variant::no_triplets ? 0 : config.triplet_top_k;
    for (const auto& choice : instance.choices) {
        try {
            ChoiceFeatures cf;
            EnhancedQuery eq =
                build_enhanced_query(graph, model, instance.question, choice, top_k_triplets);
            cf.query = eq.embedding;
            cf.context = model.embed_project_text(eq.qa_text);
            if (variant != Variant::no_subgraph) {
                RetrievedSubgraphs rs =
                    retrieve_subgraphs(db, eq, config.retrieve_k, config.threads);
                cf.retrieved = std::move(rs.vectors);
                cf.retrieved_centers = std::move(rs.centers);
            }
            out.choices.push_back(std::move(cf));
        } catch (const std::exception& ex) {
            throw std::runtime_error("instance '" + instance.id + "', choice '" + choice +
                                     "': " + ex.what());
        }
    }
    return out;
}

Prediction predict_from_features(const FusionHead& head, const InstanceFeatures& features) {
    Prediction pred;
    Vec zero(head.dim, 0.0);
    for (const auto& cf : features.choices) {
        ChoiceScore s;
        if (cf.retrieved.rows > 0) {
            AttendResult ar = attend(head, cf.query, cf.retrieved);
            s = score_choice(head, cf.query, ar.fused, cf.context);
            s.attention = std::move(ar.weights);
        } else {
            s = score_choice(head, cf.query, zero, cf.context);
        }
        pred.scores.push_back(std::move(s));
    }
    pred.choice = 0;
    for (size_t i = 1; i < pred.scores.size(); ++i)
        if (pred.scores[i].p > pred.scores[pred.choice].p) pred.choice = static_cast<int>(i);
    return pred;
}

FusionGrads FusionGrads::zeros_like(const FusionHead& head) {
    FusionGrads g;
    for (size_t h = 0; h < head.heads; ++h) {
        g.w_query.emplace_back(head.dim_head, head.dim);
        g.w_key.emplace_back(head.dim_head, head.dim);
        g.w_value.emplace_back(head.dim_head, head.dim);
    }
    g.w_out = Matrix(head.dim, head.heads * head.dim_head);
    g.know_w.assign(head.dim, 0.0);
    g.ctx_w.assign(head.dim, 0.0);
    return g;
}

double fusion_instance_loss(const FusionHead& head, const InstanceFeatures& features,
                            FusionGrads* grads) {
    if (!features.answer)
        throw std::runtime_error("fusion loss: instance '" + features.id + "' has no label");
    const int answer = *features.answer;
    const size_t n_choices = features.choices.size();

    struct ChoiceTrace {
        std::vector<Vec> q;        // [H] dim_head
        std::vector<Matrix> keys;  // [H] k x dim_head
        std::vector<Matrix> values;
        Matrix weights;            // H x k
        Vec concat;
        Vec fused;
        double p_hat = 0.0, p_tilde = 0.0, p = 0.0;
    };

    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head.dim_head));
    std::vector<ChoiceTrace> traces(n_choices);
    Vec combined(n_choices);

    for (size_t c = 0; c < n_choices; ++c) {
        const ChoiceFeatures& cf = features.choices[c];
        ChoiceTrace& tr = traces[c];
        const size_t k = cf.retrieved.rows;
        if (k > 0) {
            tr.weights = Matrix(head.heads, k);
            tr.concat.assign(head.heads * head.dim_head, 0.0);
            for (size_t h = 0; h < head.heads; ++h) {
                tr.q.push_back(matvec(head.w_query[h], cf.query));
                Matrix keys(k, head.dim_head), values(k, head.dim_head);
                Vec logits(k);
                for (size_t i = 0; i < k; ++i) {
                    Vec row(cf.retrieved.row(i), cf.retrieved.row(i) + head.dim);
                    Vec key = matvec(head.w_key[h], row);
                    Vec value = matvec(head.w_value[h], row);
                    logits[i] = dot(tr.q[h], key) * inv_sqrt;
                    std::copy(key.begin(), key.end(), keys.row(i));
                    std::copy(value.begin(), value.end(), values.row(i));
                }
                Vec w = stable_softmax(logits);
                std::copy(w.begin(), w.end(), tr.weights.row(h));
                for (size_t i = 0; i < k; ++i)
                    for (size_t j = 0; j < head.dim_head; ++j)
                        tr.concat[h * head.dim_head + j] += w[i] * values.at(i, j);
                tr.keys.push_back(std::move(keys));
                tr.values.push_back(std::move(values));
            }
            tr.fused = matvec(head.w_out, tr.concat);
        } else {
            tr.fused.assign(head.dim, 0.0);
        }
        ChoiceScore s = score_choice(head, cf.query, tr.fused, cf.context);
        tr.p_hat = s.p_hat;
        tr.p_tilde = s.p_tilde;
        tr.p = s.p;
        combined[c] = s.p;
    }

    Vec probs = stable_softmax(combined);
    double loss = -std::log(std::max(probs[static_cast<size_t>(answer)], 1e-300));
    if (!grads) return loss;

    for (size_t c = 0; c < n_choices; ++c) {
        const ChoiceFeatures& cf = features.choices[c];
        const ChoiceTrace& tr = traces[c];
        const double dp = probs[c] - (static_cast<int>(c) == answer ? 1.0 : 0.0);
        const double dp_hat = head.lambda * dp;
        const double dp_tilde = (1.0 - head.lambda) * dp;

        // context score path
        axpy(grads->ctx_w, dp_tilde, cf.context);
        grads->ctx_b += dp_tilde;

        // knowledge score path
        for (size_t i = 0; i < head.dim; ++i)
            grads->know_w[i] += dp_hat * (cf.query[i] + tr.fused[i]);
        grads->know_b += dp_hat;

        const size_t k = cf.retrieved.rows;
        if (k == 0) continue;

        Vec dfused(head.dim);
        for (size_t i = 0; i < head.dim; ++i) dfused[i] = dp_hat * head.know_w[i];
        add_outer(grads->w_out, dfused, tr.concat);
        Vec dconcat = matvec_transposed(head.w_out, dfused);

        for (size_t h = 0; h < head.heads; ++h) {
            const double* w = tr.weights.row(h);
            Vec dho(dconcat.begin() + static_cast<long>(h * head.dim_head),
                    dconcat.begin() + static_cast<long>((h + 1) * head.dim_head));

            // head output = sum_i w_i * value_i
            Vec dw(k);
            for (size_t i = 0; i < k; ++i) {
                const double* vrow = tr.values[h].row(i);
                double acc = 0.0;
                for (size_t j = 0; j < head.dim_head; ++j) acc += dho[j] * vrow[j];
                dw[i] = acc;
            }
            // softmax backward
            double wsum = 0.0;
            for (size_t i = 0; i < k; ++i) wsum += w[i] * dw[i];
            Vec dlogits(k);
            for (size_t i = 0; i < k; ++i) dlogits[i] = w[i] * (dw[i] - wsum);

            Vec dq(head.dim_head, 0.0);
            for (size_t i = 0; i < k; ++i) {
                Vec grow(cf.retrieved.row(i), cf.retrieved.row(i) + head.dim);
                // value path
                Vec dvalue(head.dim_head);
                for (size_t j = 0; j < head.dim_head; ++j) dvalue[j] = w[i] * dho[j];
                add_outer(grads->w_value[h], dvalue, grow);
                // key path
                const double dl = dlogits[i] * inv_sqrt;
                Vec dkey(head.dim_head);
                for (size_t j = 0; j < head.dim_head; ++j) dkey[j] = dl * tr.q[h][j];
                add_outer(grads->w_key[h], dkey, grow);
                const double* krow = tr.keys[h].row(i);
                for (size_t j = 0; j < head.dim_head; ++j) dq[j] += dl * krow[j];
            }
            add_outer(grads->w_query[h], dq, cf.query);
        }
    }
    return loss;
}

namespace {

void sgd_step(FusionHead& head, const FusionGrads& grads, double lr) {
    for (size_t h = 0; h < head.heads; ++h) {
        for (size_t i = 0; i < head.w_query[h].data.size(); ++i)
            head.w_query[h].data[i] -= lr * grads.w_query[h].data[i];
        for (size_t i = 0; i < head.w_key[h].data.size(); ++i)
            head.w_key[h].data[i] -= lr * grads.w_key[h].data[i];
        for (size_t i = 0; i < head.w_value[h].data.size(); ++i)
            head.w_value[h].data[i] -= lr * grads.w_value[h].data[i];
    }
    for (size_t i = 0; i < head.w_out.data.size(); ++i)
        head.w_out.data[i] -= lr * grads.w_out.data[i];
    for (size_t i = 0; i < head.know_w.size(); ++i) head.know_w[i] -= lr * grads.know_w[i];
    head.know_b -= lr * grads.know_b;
    for (size_t i = 0; i < head.ctx_w.size(); ++i) head.ctx_w[i] -= lr * grads.ctx_w[i];
    head.ctx_b -= lr * grads.ctx_b;
}

}  // namespace

double accuracy(const FusionHead& head, const std::vector<InstanceFeatures>& instances) {
    if (instances.empty()) return 0.0;
    size_t correct = 0;
    for (const auto& inst : instances) {
        if (!inst.answer)
            throw std::runtime_error("accuracy: instance '" + inst.id + "' has no label");
        Prediction p = predict_from_features(head, inst);
        if (p.choice == *inst.answer) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(instances.size());
}

FusionTrainResult train_fusion(const std::vector<InstanceFeatures>& train,
                               const std::vector<InstanceFeatures>& dev,
                               const FusionConfig& config) {
    config.validate();
    if (train.empty()) throw std::runtime_error("train_fusion: empty training set");
    for (const auto& inst : train)
        if (!inst.answer)
            throw std::runtime_error("train_fusion: instance '" + inst.id + "' has no label");
    const size_t dim = train.front().choices.front().query.size();

    FusionTrainResult result;
    result.head = FusionHead::init(dim, config.heads, config.lambda, config.seed);
    FusionHead best = result.head;
    double best_dev = dev.empty() ? 0.0 : accuracy(result.head, dev);
    size_t stale = 0;

    for (size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        std::vector<size_t> order(train.size());
        std::iota(order.begin(), order.end(), 0);
        Rng rng(derive_seed(config.seed, 2000 + epoch));
        rng.shuffle(order);

        double loss_sum = 0.0;
        for (size_t start = 0; start < order.size(); start += config.batch_size) {
            const size_t bs = std::min(config.batch_size, order.size() - start);
            FusionGrads grads = FusionGrads::zeros_like(result.head);
            for (size_t b = 0; b < bs; ++b)
                loss_sum += fusion_instance_loss(result.head, train[order[start + b]], &grads);
            const double scale = 1.0 / static_cast<double>(bs);
            for (auto* mats : {&grads.w_query, &grads.w_key, &grads.w_value})
                for (auto& m : *mats)
                    for (auto& v : m.data) v *= scale;
            for (auto& v : grads.w_out.data) v *= scale;
            for (auto& v : grads.know_w) v *= scale;
            grads.know_b *= scale;
            for (auto& v : grads.ctx_w) v *= scale;
            grads.ctx_b *= scale;
            sgd_step(result.head, grads, config.learning_rate);
        }
        if (!std::isfinite(loss_sum))
            throw std::runtime_error("train_fusion: non-finite loss at epoch " +
                                     std::to_string(epoch));

        FusionEpochLog log;
        log.epoch = epoch;
        log.train_loss = loss_sum / static_cast<double>(train.size());
        if (!dev.empty()) {
            log.dev_accuracy = accuracy(result.head, dev);
            if (log.dev_accuracy > best_dev) {
                best_dev = log.dev_accuracy;
                best = result.head;
                stale = 0;
            } else {
                ++stale;
            }
        }
        result.log.push_back(log);
        if (!dev.empty() && stale >= config.patience) break;
    }

    result.head = dev.empty() ? result.head : best;
    result.best_dev_accuracy = best_dev;
    result.head.quantize();
    return result;
}

namespace {

constexpr char kHeadMagic[4] = {'S', 'G', 'F', 'H'};
constexpr uint32_t kHeadVersion = 1;

void write_matrix_f32(std::ostream& out, const Matrix& m) {
    for (double v : m.data) write_f32le(out, static_cast<float>(v));
}

Matrix read_matrix_f32(std::istream& in, size_t rows, size_t cols, const char* what) {
    Matrix m(rows, cols);
    for (auto& v : m.data) v = static_cast<double>(read_f32le(in, what));
    return m;
}

}  // namespace

void save_head(const FusionHead& head, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    write_magic(out, kHeadMagic);
    write_u32le(out, kHeadVersion);
    write_u32le(out, static_cast<uint32_t>(head.dim));
    write_u32le(out, static_cast<uint32_t>(head.heads));
    for (size_t h = 0; h < head.heads; ++h) {
        write_matrix_f32(out, head.w_query[h]);
        write_matrix_f32(out, head.w_key[h]);
        write_matrix_f32(out, head.w_value[h]);
    }
    write_matrix_f32(out, head.w_out);
    for (double v : head.know_w) write_f32le(out, static_cast<float>(v));
    write_f32le(out, static_cast<float>(head.know_b));
    for (double v : head.ctx_w) write_f32le(out, static_cast<float>(v));
    write_f32le(out, static_cast<float>(head.ctx_b));
    write_f32le(out, static_cast<float>(head.lambda));
    if (!out) throw std::runtime_error("write failed: " + path);
}

FusionHead load_head(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open head file: " + path);
    expect_magic(in, kHeadMagic, path);
    uint32_t version = read_u32le(in, "version");
    if (version != kHeadVersion)
        throw std::runtime_error("unsupported head version " + std::to_string(version) + " in " +
                                 path);
    FusionHead head;
    head.dim = read_u32le(in, "dim");
    head.heads = read_u32le(in, "heads");
    if (head.heads == 0 || head.dim % head.heads != 0)
        throw std::runtime_error("corrupt head file: " + path);
    head.dim_head = head.dim / head.heads;
    for (size_t h = 0; h < head.heads; ++h) {
        head.w_query.push_back(read_matrix_f32(in, head.dim_head, head.dim, "w_query"));
        head.w_key.push_back(read_matrix_f32(in, head.dim_head, head.dim, "w_key"));
        head.w_value.push_back(read_matrix_f32(in, head.dim_head, head.dim, "w_value"));
    }
    head.w_out = read_matrix_f32(in, head.dim, head.heads * head.dim_head, "w_out");
    head.know_w.resize(head.dim);
    for (auto& v : head.know_w) v = static_cast<double>(read_f32le(in, "know_w"));
    head.know_b = static_cast<double>(read_f32le(in, "know_b"));
    head.ctx_w.resize(head.dim);
    for (auto& v : head.ctx_w) v = static_cast<double>(read_f32le(in, "ctx_w"));
    head.ctx_b = static_cast<double>(read_f32le(in, "ctx_b"));
    head.lambda = static_cast<double>(read_f32le(in, "lambda"));
    return head;
}

}  // namespace septa

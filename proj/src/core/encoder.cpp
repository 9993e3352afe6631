#include "core/encoder.hpp"

#include <stdexcept>

namespace septa {

GraphEncoderParams GraphEncoderParams::init(size_t layers, size_t dim_in, size_t dim_hidden,
                                            size_t relation_count, Rng& rng) {
    if (layers < 1) throw std::invalid_argument("graph encoder: layers must be >= 1");
    GraphEncoderParams p;
    p.layers = layers;
    p.dim_in = dim_in;
    p.dim_hidden = dim_hidden;
    p.relation_count = relation_count;
    for (size_t l = 0; l < layers; ++l) {
        size_t in = l == 0 ? dim_in : dim_hidden;
        p.w_self.push_back(Matrix::uniform_init(dim_hidden, in, in, rng));
        p.w_neigh.push_back(Matrix::uniform_init(dim_hidden, in, in, rng));
        p.rel_emb.push_back(Matrix::uniform_init(relation_count, dim_hidden, dim_hidden, rng));
    }
    return p;
}

void GraphEncoderParams::check_shapes() const {
    if (w_self.size() != layers || w_neigh.size() != layers || rel_emb.size() != layers) {
        throw std::invalid_argument("graph encoder: layer parameter count mismatch");
    }
    for (size_t l = 0; l < layers; ++l) {
        size_t in = l == 0 ? dim_in : dim_hidden;
        if (w_self[l].rows != dim_hidden || w_self[l].cols != in ||
            w_neigh[l].rows != dim_hidden || w_neigh[l].cols != in ||
            rel_emb[l].rows != relation_count || rel_emb[l].cols != dim_hidden) {
            throw std::invalid_argument("graph encoder: bad parameter shape at layer " +
                                        std::to_string(l));
        }
    }
}

ProjectionPair ProjectionPair::init(size_t dim_graph, size_t dim_text, size_t dim_shared,
                                    Rng& rng) {
    ProjectionPair p;
    p.w_graph = Matrix::uniform_init(dim_shared, dim_graph, dim_graph, rng);
    p.b_graph.assign(dim_shared, 0.0);
    p.w_text = Matrix::uniform_init(dim_shared, dim_text, dim_text, rng);
    p.b_text.assign(dim_shared, 0.0);
    return p;
}

namespace {

std::vector<std::vector<std::pair<size_t, int64_t>>> build_incidence(const Subgraph& sub) {
    std::vector<std::vector<std::pair<size_t, int64_t>>> incident(sub.nodes.size());
    for (const LocalEdge& e : sub.local_edges) {
        incident[e.tail].emplace_back(e.head, e.relation);
        if (e.head != e.tail) incident[e.head].emplace_back(e.tail, e.relation);
    }
    return incident;
}

}  // namespace

GraphForwardTrace encode_graph_trace(const GraphEncoderParams& params, const Subgraph& sub) {
    if (sub.nodes.empty()) throw std::invalid_argument("encode_graph: empty subgraph");
    if (sub.features.rows != sub.nodes.size() || sub.features.cols != params.dim_in) {
        throw std::invalid_argument("encode_graph: feature shape mismatch (expected " +
                                    std::to_string(sub.nodes.size()) + "x" +
                                    std::to_string(params.dim_in) + ")");
    }
    params.check_shapes();

    GraphForwardTrace trace;
    trace.incident = build_incidence(sub);
    trace.states.reserve(params.layers + 1);
    trace.states.push_back(sub.features);
    trace.pre.reserve(params.layers);

    const size_t n = sub.nodes.size();
    for (size_t l = 0; l < params.layers; ++l) {
        const Matrix& x = trace.states.back();
        Matrix pre(n, params.dim_hidden);
        for (size_t u = 0; u < n; ++u) {
            Vec xu(x.row(u), x.row(u) + x.cols);
            Vec z = matvec(params.w_self[l], xu);
            const auto& inc = trace.incident[u];
            if (!inc.empty()) {
                Vec msg(params.dim_hidden, 0.0);
                for (const auto& [v, rel] : inc) {
                    Vec xv(x.row(v), x.row(v) + x.cols);
                    Vec m = matvec(params.w_neigh[l], xv);
                    const double* re = params.rel_emb[l].row(static_cast<size_t>(rel));
                    for (size_t j = 0; j < params.dim_hidden; ++j) msg[j] += m[j] + re[j];
                }
                const double inv = 1.0 / static_cast<double>(inc.size());
                for (size_t j = 0; j < params.dim_hidden; ++j) z[j] += msg[j] * inv;
            }
            std::copy(z.begin(), z.end(), pre.row(u));
        }
        Matrix post = pre;
        for (auto& v : post.data) v = v > 0.0 ? v : 0.0;
        trace.pre.push_back(std::move(pre));
        trace.states.push_back(std::move(post));
    }

    trace.pooled.assign(params.dim_hidden, 0.0);
    const Matrix& last = trace.states.back();
    for (size_t u = 0; u < n; ++u) {
        const double* r = last.row(u);
        for (size_t j = 0; j < params.dim_hidden; ++j) trace.pooled[j] += r[j];
    }
    scale(trace.pooled, 1.0 / static_cast<double>(n));
    return trace;
}

Vec encode_graph(const GraphEncoderParams& params, const Subgraph& sub) {
    return encode_graph_trace(params, sub).pooled;
}

GraphEncoderGrads GraphEncoderGrads::zeros_like(const GraphEncoderParams& params) {
    GraphEncoderGrads g;
    for (size_t l = 0; l < params.layers; ++l) {
        g.w_self.emplace_back(params.w_self[l].rows, params.w_self[l].cols);
        g.w_neigh.emplace_back(params.w_neigh[l].rows, params.w_neigh[l].cols);
        g.rel_emb.emplace_back(params.rel_emb[l].rows, params.rel_emb[l].cols);
    }
    return g;
}

void GraphEncoderGrads::accumulate(const GraphEncoderGrads& other) {
    for (size_t l = 0; l < w_self.size(); ++l) {
        for (size_t i = 0; i < w_self[l].data.size(); ++i) w_self[l].data[i] += other.w_self[l].data[i];
        for (size_t i = 0; i < w_neigh[l].data.size(); ++i) w_neigh[l].data[i] += other.w_neigh[l].data[i];
        for (size_t i = 0; i < rel_emb[l].data.size(); ++i) rel_emb[l].data[i] += other.rel_emb[l].data[i];
    }
}

void GraphEncoderGrads::scale_all(double a) {
    for (auto& m : w_self)
        for (auto& v : m.data) v *= a;
    for (auto& m : w_neigh)
        for (auto& v : m.data) v *= a;
    for (auto& m : rel_emb)
        for (auto& v : m.data) v *= a;
}

void encode_graph_backward(const GraphEncoderParams& params, const GraphForwardTrace& trace,
                           const Vec& pooled_grad, GraphEncoderGrads& grads) {
    const size_t n = trace.incident.size();
    const double inv_n = 1.0 / static_cast<double>(n);

    // d/d(final states) of mean pooling
    Matrix dstate(n, params.dim_hidden);
    for (size_t u = 0; u < n; ++u) {
        double* r = dstate.row(u);
        for (size_t j = 0; j < params.dim_hidden; ++j) r[j] = pooled_grad[j] * inv_n;
    }

    for (size_t l = params.layers; l-- > 0;) {
        const Matrix& x = trace.states[l];       // layer input
        const Matrix& pre = trace.pre[l];
        const size_t in_dim = x.cols;
        Matrix dx(n, in_dim);

        for (size_t u = 0; u < n; ++u) {
            Vec dz(params.dim_hidden);
            const double* dr = dstate.row(u);
            const double* pr = pre.row(u);
            for (size_t j = 0; j < params.dim_hidden; ++j) dz[j] = pr[j] > 0.0 ? dr[j] : 0.0;

            Vec xu(x.row(u), x.row(u) + in_dim);
            add_outer(grads.w_self[l], dz, xu);
            Vec back = matvec_transposed(params.w_self[l], dz);
            for (size_t j = 0; j < in_dim; ++j) dx.at(u, j) += back[j];

            const auto& inc = trace.incident[u];
            if (inc.empty()) continue;
            const double inv = 1.0 / static_cast<double>(inc.size());
            Vec dz_scaled = dz;
            scale(dz_scaled, inv);
            Vec neigh_back = matvec_transposed(params.w_neigh[l], dz_scaled);
            for (const auto& [v, rel] : inc) {
                Vec xv(x.row(v), x.row(v) + in_dim);
                add_outer(grads.w_neigh[l], dz_scaled, xv);
                for (size_t j = 0; j < in_dim; ++j) dx.at(v, j) += neigh_back[j];
                double* re = grads.rel_emb[l].row(static_cast<size_t>(rel));
                for (size_t j = 0; j < params.dim_hidden; ++j) re[j] += dz_scaled[j];
            }
        }
        dstate = std::move(dx);
    }
}

double cosine(const Vec& u, const Vec& v, bool* degenerate) {
    if (u.size() != v.size()) throw std::invalid_argument("cosine: dimension mismatch");
    const double nu = norm(u);
    const double nv = norm(v);
    constexpr double kTiny = 1e-300;
    if (nu < kTiny || nv < kTiny) {
        if (degenerate) *degenerate = true;
        return 0.0;
    }
    if (degenerate) *degenerate = false;
    return dot(u, v) / (nu * nv);
}

}  // namespace septa

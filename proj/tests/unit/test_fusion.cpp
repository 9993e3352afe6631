#include <doctest.h>

#include <cmath>

#include "core/fusion.hpp"
#include "test_util.hpp"

using namespace septa;
using septa::testing::TempDir;

namespace {

Matrix random_matrix(size_t r, size_t c, Rng& rng) {
    Matrix m(r, c);
    for (auto& v : m.data) v = rng.uniform(-1, 1);
    return m;
}

Vec random_vec(size_t n, Rng& rng) {
    Vec v(n);
    for (auto& x : v) x = rng.uniform(-1, 1);
    return v;
}

// Naive attention: per head, explicit q/key/value loops with its own
// softmax, no shared state with the implementation.
Vec naive_attend(const FusionHead& head, const Vec& t, const Matrix& G) {
    Vec concat;
    for (size_t h = 0; h < head.heads; ++h) {
        Vec q(head.dim_head, 0.0);
        for (size_t i = 0; i < head.dim_head; ++i)
            for (size_t j = 0; j < head.dim; ++j) q[i] += head.w_query[h].at(i, j) * t[j];
        std::vector<double> logits(G.rows, 0.0);
        for (size_t r = 0; r < G.rows; ++r) {
            Vec key(head.dim_head, 0.0);
            for (size_t i = 0; i < head.dim_head; ++i)
                for (size_t j = 0; j < head.dim; ++j)
                    key[i] += head.w_key[h].at(i, j) * G.at(r, j);
            for (size_t i = 0; i < head.dim_head; ++i) logits[r] += q[i] * key[i];
            logits[r] /= std::sqrt(static_cast<double>(head.dim_head));
        }
        double mx = *std::max_element(logits.begin(), logits.end());
        double z = 0.0;
        for (double l : logits) z += std::exp(l - mx);
        Vec out(head.dim_head, 0.0);
        for (size_t r = 0; r < G.rows; ++r) {
            double w = std::exp(logits[r] - mx) / z;
            for (size_t i = 0; i < head.dim_head; ++i)
                for (size_t j = 0; j < head.dim; ++j)
                    out[i] += w * head.w_value[h].at(i, j) * G.at(r, j);
        }
        concat.insert(concat.end(), out.begin(), out.end());
    }
    Vec r(head.dim, 0.0);
    for (size_t i = 0; i < head.dim; ++i)
        for (size_t j = 0; j < concat.size(); ++j) r[i] += head.w_out.at(i, j) * concat[j];
    return r;
}

InstanceFeatures random_instance(size_t n_choices, size_t k, size_t dim, int answer, Rng& rng) {
    InstanceFeatures inst;
    inst.id = "rand";
    inst.answer = answer;
    for (size_t c = 0; c < n_choices; ++c) {
        ChoiceFeatures cf;
        cf.query = random_vec(dim, rng);
        cf.context = random_vec(dim, rng);
        if (k > 0) cf.retrieved = random_matrix(k, dim, rng);
        inst.choices.push_back(std::move(cf));
    }
    return inst;
}

std::vector<double*> head_params(FusionHead& head) {
    std::vector<double*> out;
    auto add = [&out](Matrix& m) {
        for (auto& v : m.data) out.push_back(&v);
    };
    for (auto& m : head.w_query) add(m);
    for (auto& m : head.w_key) add(m);
    for (auto& m : head.w_value) add(m);
    add(head.w_out);
    for (auto& v : head.know_w) out.push_back(&v);
    out.push_back(&head.know_b);
    for (auto& v : head.ctx_w) out.push_back(&v);
    out.push_back(&head.ctx_b);
    return out;
}

std::vector<double> flat_grads(const FusionGrads& g) {
    std::vector<double> out;
    auto add = [&out](const Matrix& m) {
        for (double v : m.data) out.push_back(v);
    };
    for (const auto& m : g.w_query) add(m);
    for (const auto& m : g.w_key) add(m);
    for (const auto& m : g.w_value) add(m);
    add(g.w_out);
    for (double v : g.know_w) out.push_back(v);
    out.push_back(g.know_b);
    for (double v : g.ctx_w) out.push_back(v);
    out.push_back(g.ctx_b);
    return out;
}

bool grad_close(double analytic, double numeric) {
    const double diff = std::abs(analytic - numeric);
    const double denom = std::max(std::abs(analytic), std::abs(numeric));
    if (denom < 1e-8) return diff < 1e-8;
    return diff / denom < 1e-4;
}

}  // namespace

TEST_CASE("attend matches the naive per-head oracle") {
    Rng rng(3);
    FusionHead head = FusionHead::init(8, 2, 0.5, 4);
    for (int trial = 0; trial < 10; ++trial) {
        Vec t = random_vec(8, rng);
        Matrix G = random_matrix(5, 8, rng);
        AttendResult got = attend(head, t, G);
        Vec expected = naive_attend(head, t, G);
        REQUIRE(got.fused.size() == expected.size());
        for (size_t j = 0; j < expected.size(); ++j)
            CHECK(got.fused[j] == doctest::Approx(expected[j]).epsilon(1e-10));
        // weight rows are probability distributions
        for (size_t h = 0; h < head.heads; ++h) {
            double sum = 0.0;
            for (size_t i = 0; i < G.rows; ++i) {
                CHECK(got.weights.at(h, i) >= 0.0);
                sum += got.weights.at(h, i);
            }
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
        }
    }
}

TEST_CASE("single-key attention collapses the softmax") {
    Rng rng(5);
    FusionHead head = FusionHead::init(8, 2, 0.5, 6);
    Vec t = random_vec(8, rng);
    Matrix G1 = random_matrix(1, 8, rng);
    AttendResult one = attend(head, t, G1);
    CHECK(one.weights.at(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(one.weights.at(1, 0) == doctest::Approx(1.0).epsilon(1e-12));

    // identical rows behave exactly like the single-key case
    Matrix G4(4, 8);
    for (size_t i = 0; i < 4; ++i)
        std::copy(G1.row(0), G1.row(0) + 8, G4.row(i));
    AttendResult four = attend(head, t, G4);
    for (size_t j = 0; j < 8; ++j)
        CHECK(four.fused[j] == doctest::Approx(one.fused[j]).epsilon(1e-10));
}

TEST_CASE("attention is invariant to permuting the retrieved rows") {
    Rng rng(7);
    FusionHead head = FusionHead::init(12, 3, 0.5, 8);
    Vec t = random_vec(12, rng);
    Matrix G = random_matrix(6, 12, rng);
    Matrix P(6, 12);
    std::vector<size_t> perm{3, 0, 5, 1, 4, 2};
    for (size_t i = 0; i < 6; ++i) std::copy(G.row(perm[i]), G.row(perm[i]) + 12, P.row(i));

    AttendResult a = attend(head, t, G);
    AttendResult b = attend(head, t, P);
    for (size_t j = 0; j < 12; ++j)
        CHECK(a.fused[j] == doctest::Approx(b.fused[j]).epsilon(1e-10));
}

TEST_CASE("attend rejects an empty key set and bad dims") {
    FusionHead head = FusionHead::init(8, 2, 0.5, 9);
    CHECK_THROWS_AS(attend(head, Vec(8, 0.1), Matrix()), std::invalid_argument);
    CHECK_THROWS_AS(attend(head, Vec(4, 0.1), Matrix(2, 8)), std::invalid_argument);
    CHECK_THROWS_AS(FusionHead::init(10, 3, 0.5, 1), std::invalid_argument);  // 3 ∤ 10
}

TEST_CASE("score_choice arithmetic and lambda endpoints") {
    FusionHead head = FusionHead::init(4, 2, 0.5, 11);
    head.know_w = Vec{1, 0, 0, 0};
    head.know_b = 0.0;
    head.ctx_w = Vec{0, 1, 0, 0};
    head.ctx_b = 0.0;
    Vec t{2, 0, 0, 0}, r{0, 0, 0, 0}, v{0, 4, 0, 0};

    head.lambda = 0.5;
    ChoiceScore s = score_choice(head, t, r, v);
    CHECK(s.p_hat == 2.0);
    CHECK(s.p_tilde == 4.0);
    CHECK(s.p == 3.0);

    head.lambda = 1.0;
    CHECK(score_choice(head, t, r, v).p == 2.0);
    head.lambda = 0.0;
    CHECK(score_choice(head, t, r, v).p == 4.0);

    // p is affine in lambda
    for (double lam : {0.0, 0.25, 0.5, 0.75, 1.0}) {
        head.lambda = lam;
        CHECK(score_choice(head, t, r, v).p ==
              doctest::Approx(lam * 2.0 + (1 - lam) * 4.0).epsilon(1e-12));
    }
}

TEST_CASE("prediction breaks ties toward the lowest choice index") {
    Rng rng(13);
    FusionHead head = FusionHead::init(8, 2, 0.5, 15);
    InstanceFeatures inst = random_instance(4, 3, 8, 0, rng);
    // make all choices identical
    for (size_t c = 1; c < 4; ++c) inst.choices[c] = inst.choices[0];
    Prediction pred = predict_from_features(head, inst);
    CHECK(pred.choice == 0);
    for (size_t c = 1; c < 4; ++c) CHECK(pred.scores[c].p == pred.scores[0].p);
}

TEST_CASE("cross-entropy analytic values") {
    FusionHead head = FusionHead::init(4, 2, 1.0, 17);
    head.know_w.assign(4, 0.0);
    head.know_b = 0.0;

    InstanceFeatures inst;
    inst.id = "analytic";
    inst.answer = 1;
    for (int c = 0; c < 5; ++c) {
        ChoiceFeatures cf;
        cf.query = Vec(4, 0.0);
        cf.context = Vec(4, 0.0);
        inst.choices.push_back(cf);
    }
    // all scores equal -> uniform softmax -> ln 5
    CHECK(fusion_instance_loss(head, inst) == doctest::Approx(std::log(5.0)).epsilon(1e-12));

    // a saturated correct choice -> loss near zero
    head.know_w = Vec{1, 0, 0, 0};
    inst.choices[1].query = Vec{50.0, 0, 0, 0};
    CHECK(fusion_instance_loss(head, inst) < 1e-9);
}

TEST_CASE("argmax is invariant to a constant shift of all scores") {
    Rng rng(19);
    FusionHead head = FusionHead::init(8, 2, 0.5, 21);
    InstanceFeatures inst = random_instance(5, 4, 8, 2, rng);
    Prediction base = predict_from_features(head, inst);
    head.know_b += 17.5;  // shifts every p_hat equally
    head.ctx_b -= 4.25;   // shifts every p_tilde equally
    Prediction shifted = predict_from_features(head, inst);
    CHECK(base.choice == shifted.choice);
}

TEST_CASE("fusion gradients match central finite differences") {
    Rng rng(23);
    for (uint64_t seed : {31u, 32u}) {
        FusionHead head = FusionHead::init(8, 2, 0.6, seed);
        InstanceFeatures inst = random_instance(4, 5, 8, static_cast<int>(seed % 4), rng);

        FusionGrads grads = FusionGrads::zeros_like(head);
        fusion_instance_loss(head, inst, &grads);
        auto analytic = flat_grads(grads);
        auto params = head_params(head);
        REQUIRE(analytic.size() == params.size());

        const double h = 1e-4;
        size_t failures = 0;
        for (size_t i = 0; i < params.size(); ++i) {
            double saved = *params[i];
            *params[i] = saved + h;
            double up = fusion_instance_loss(head, inst);
            *params[i] = saved - h;
            double down = fusion_instance_loss(head, inst);
            *params[i] = saved;
            if (!grad_close(analytic[i], (up - down) / (2 * h))) ++failures;
        }
        CHECK(failures == 0);
    }
}

TEST_CASE("no-retrieval instances leave attention parameters untouched") {
    Rng rng(29);
    FusionHead head = FusionHead::init(8, 2, 0.5, 33);
    InstanceFeatures inst = random_instance(3, 0, 8, 1, rng);
    FusionGrads grads = FusionGrads::zeros_like(head);
    fusion_instance_loss(head, inst, &grads);
    for (const auto& m : grads.w_query)
        for (double v : m.data) CHECK(v == 0.0);
    for (double v : grads.w_out.data) CHECK(v == 0.0);
    // but score heads still learn
    double know_mass = 0.0;
    for (double v : grads.know_w) know_mass += std::abs(v);
    CHECK(know_mass > 0.0);
}

TEST_CASE("train_fusion learns a separable toy problem deterministically") {
    Rng rng(37);
    // correct choice has query[0] = +1, wrong choices -1
    auto make_set = [&](size_t count, uint64_t seed) {
        Rng local(seed);
        std::vector<InstanceFeatures> set;
        for (size_t i = 0; i < count; ++i) {
            InstanceFeatures inst = random_instance(4, 2, 8, static_cast<int>(local.below(4)),
                                                    local);
            for (int c = 0; c < 4; ++c)
                inst.choices[static_cast<size_t>(c)].query[0] = c == *inst.answer ? 1.0 : -1.0;
            inst.id = "toy-" + std::to_string(i);
            set.push_back(std::move(inst));
        }
        return set;
    };
    auto train = make_set(60, 1);
    auto dev = make_set(20, 2);

    FusionConfig cfg;
    cfg.heads = 2;
    cfg.epochs = 20;
    cfg.learning_rate = 0.2;
    cfg.seed = 5;
    auto r1 = train_fusion(train, dev, cfg);
    CHECK(r1.best_dev_accuracy >= 0.9);
    CHECK(r1.log.front().train_loss > r1.log.back().train_loss);

    auto r2 = train_fusion(train, dev, cfg);
    CHECK(r1.head.know_w == r2.head.know_w);
    CHECK(r1.head.w_out.data == r2.head.w_out.data);

    SUBCASE("unlabeled training data is rejected") {
        auto bad = train;
        bad[0].answer.reset();
        CHECK_THROWS_WITH_AS(train_fusion(bad, dev, cfg), doctest::Contains("no label"),
                             std::runtime_error);
    }
}

TEST_CASE("head file round-trips bit-exactly") {
    TempDir tmp("fu_io");
    FusionHead head = FusionHead::init(16, 4, 0.25, 41);
    save_head(head, tmp.file("head.bin"));
    FusionHead loaded = load_head(tmp.file("head.bin"));
    save_head(loaded, tmp.file("head2.bin"));
    CHECK(septa::testing::read_file(tmp.file("head.bin")) ==
          septa::testing::read_file(tmp.file("head2.bin")));
    CHECK(loaded.lambda == head.lambda);
    CHECK(loaded.w_query[2].data == head.w_query[2].data);

    std::string bytes = septa::testing::read_file(tmp.file("head.bin"));
    septa::testing::write_file(tmp.file("trunc.bin"), bytes.substr(0, 20));
    CHECK_THROWS_AS(load_head(tmp.file("trunc.bin")), std::runtime_error);
}

TEST_CASE("variant names round-trip") {
    for (Variant v : {Variant::full, Variant::no_alignment, Variant::no_subgraph,
                      Variant::no_triplets, Variant::lambda_only}) {
        CHECK(variant_from_name(variant_name(v)) == v);
    }
    CHECK_THROWS_AS(variant_from_name("bogus"), std::invalid_argument);
}

#include "core/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>
#include <unordered_map>

#include <json.hpp>

namespace septa {

void ensure_node_features(KnowledgeGraph& graph, const TextEmbedder& embedder) {
    if (!graph.features().empty()) return;
    graph.set_features(default_node_features(graph, embedder));
}

std::vector<InstanceFeatures> featurize(const KnowledgeGraph& graph, const AlignmentModel& model,
                                        const VectorDatabase& db,
                                        const std::vector<QAInstance>& instances,
                                        const FusionConfig& config, Variant variant) {
    std::vector<InstanceFeatures> out;
    out.reserve(instances.size());
    for (const auto& inst : instances)
        out.push_back(build_instance_features(graph, model, db, inst, config, variant));
    return out;
}

std::vector<PredictionRow> answer_instances(const FusionHead& head,
                                            const std::vector<InstanceFeatures>& features) {
    std::vector<PredictionRow> rows;
    rows.reserve(features.size());
    for (const auto& inst : features) {
        Prediction pred = predict_from_features(head, inst);
        PredictionRow row;
        row.id = inst.id;
        row.predicted = pred.choice;
        row.scores = std::move(pred.scores);
        for (const auto& cf : inst.choices) row.retrieved_centers.push_back(cf.retrieved_centers);
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_predictions_jsonl(const std::vector<PredictionRow>& rows, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    for (const auto& row : rows) {
        nlohmann::json j;
        j["id"] = row.id;
        j["predicted"] = row.predicted;
        nlohmann::json scores = nlohmann::json::array();
        for (const auto& s : row.scores) {
            scores.push_back({{"p_hat", s.p_hat}, {"p_tilde", s.p_tilde}, {"p", s.p}});
        }
        j["scores"] = std::move(scores);
        j["retrieved"] = row.retrieved_centers;
        out << j.dump() << "\n";
    }
}

EvalReport evaluate_predictions(const std::string& qa_path, const std::string& predictions_path) {
    auto instances = load_qa_jsonl(qa_path);
    std::ifstream in(predictions_path);
    if (!in) throw std::runtime_error("cannot open predictions file: " + predictions_path);
    std::unordered_map<std::string, int> predicted;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& ex) {
            throw std::runtime_error(predictions_path + " line " + std::to_string(line_no) +
                                     ": " + ex.what());
        }
        predicted[j.at("id").get<std::string>()] = j.at("predicted").get<int>();
    }

    EvalReport report;
    for (const auto& inst : instances) {
        if (!inst.answer)
            throw std::runtime_error("eval: instance '" + inst.id + "' has no answer label");
        auto it = predicted.find(inst.id);
        if (it == predicted.end())
            throw std::runtime_error("eval: no prediction for instance '" + inst.id + "'");
        ++report.total;
        if (it->second == *inst.answer) ++report.correct;
    }
    if (report.total == 0) throw std::runtime_error("eval: no labeled instances in " + qa_path);
    report.accuracy = static_cast<double>(report.correct) / static_cast<double>(report.total);
    return report;
}

namespace {

std::vector<InstanceFeatures> drop_retrieval(const std::vector<InstanceFeatures>& src) {
    std::vector<InstanceFeatures> out = src;
    for (auto& inst : out) {
        for (auto& cf : inst.choices) {
            cf.retrieved = Matrix();
            cf.retrieved_centers.clear();
        }
    }
    return out;
}

}  // namespace

std::vector<AblationRow> run_ablation(const KnowledgeGraph& graph,
                                      const AlignmentConfig& align_config,
                                      const SamplerConfig& pair_sampler,
                                      const SamplerConfig& db_sampler, size_t db_max_sentences,
                                      const FusionConfig& fusion_config,
                                      const std::vector<QAInstance>& train,
                                      const std::vector<QAInstance>& dev,
                                      const std::vector<QAInstance>& test, unsigned threads) {
    AlignmentModel aligned = train_alignment(graph, align_config, pair_sampler).model;
    VectorDatabase db_aligned =
        build_database(graph, aligned, db_sampler, threads, db_max_sentences);
    AlignmentModel raw = AlignmentModel::init(align_config, graph.relation_count());
    VectorDatabase db_raw = build_database(graph, raw, db_sampler, threads, db_max_sentences);

    struct Featurized {
        std::vector<InstanceFeatures> train, dev, test;
    };
    auto featurize_all = [&](const AlignmentModel& model, const VectorDatabase& db,
                             Variant variant) {
        Featurized f;
        f.train = featurize(graph, model, db, train, fusion_config, variant);
        f.dev = featurize(graph, model, db, dev, fusion_config, variant);
        f.test = featurize(graph, model, db, test, fusion_config, variant);
        return f;
    };

    Featurized full = featurize_all(aligned, db_aligned, Variant::full);
    Featurized no_triplets = featurize_all(aligned, db_aligned, Variant::no_triplets);
    Featurized no_align = featurize_all(raw, db_raw, Variant::no_alignment);
    Featurized no_subgraph{drop_retrieval(full.train), drop_retrieval(full.dev),
                           drop_retrieval(full.test)};

    std::vector<AblationRow> rows;
    for (Variant variant : {Variant::full, Variant::no_alignment, Variant::no_subgraph,
                            Variant::no_triplets, Variant::lambda_only}) {
        const Featurized* f = &full;
        FusionConfig cfg = fusion_config;
        switch (variant) {
            case Variant::full: break;
            case Variant::lambda_only: cfg.lambda = 1.0; break;
            case Variant::no_triplets: f = &no_triplets; break;
            case Variant::no_alignment: f = &no_align; break;
            case Variant::no_subgraph: f = &no_subgraph; break;
        }
        FusionTrainResult trained = train_fusion(f->train, f->dev, cfg);
        AblationRow row;
        row.variant = variant;
        row.dev_accuracy = trained.best_dev_accuracy;
        row.test_accuracy = accuracy(trained.head, f->test);
        rows.push_back(row);
    }
    return rows;
}

SweepParam sweep_param_from_name(const std::string& name) {
    if (name == "k") return SweepParam::retrieve_k;
    if (name == "n") return SweepParam::max_nodes;
    if (name == "lambda") return SweepParam::lambda;
    throw std::invalid_argument("unknown sweep parameter: " + name +
                                " (expected k, n, or lambda)");
}

const char* sweep_param_name(SweepParam p) {
    switch (p) {
        case SweepParam::retrieve_k: return "k";
        case SweepParam::max_nodes: return "n";
        case SweepParam::lambda: return "lambda";
    }
    return "?";
}

std::vector<SweepPoint> run_sweep(const KnowledgeGraph& graph,
                                  const AlignmentConfig& align_config,
                                  const SamplerConfig& pair_sampler,
                                  const SamplerConfig& db_sampler, size_t db_max_sentences,
                                  const FusionConfig& fusion_config,
                                  const std::vector<QAInstance>& train,
                                  const std::vector<QAInstance>& dev,
                                  const std::vector<QAInstance>& test, SweepParam param,
                                  const std::vector<double>& values, unsigned threads) {
    if (values.empty()) throw std::invalid_argument("run_sweep: no values given");

    AlignmentModel model = train_alignment(graph, align_config, pair_sampler).model;
    VectorDatabase db = build_database(graph, model, db_sampler, threads, db_max_sentences);

    std::vector<SweepPoint> points;
    for (double value : values) {
        FusionConfig cfg = fusion_config;
        SamplerConfig dbcfg = db_sampler;
        const VectorDatabase* active_db = &db;
        VectorDatabase rebuilt;
        switch (param) {
            case SweepParam::retrieve_k:
                cfg.retrieve_k = static_cast<size_t>(value);
                break;
            case SweepParam::lambda:
                cfg.lambda = value;
                break;
            case SweepParam::max_nodes:
                dbcfg.max_nodes = static_cast<int>(value);
                rebuilt = build_database(graph, model, dbcfg, threads, db_max_sentences);
                active_db = &rebuilt;
                break;
        }
        auto ftrain = featurize(graph, model, *active_db, train, cfg, Variant::full);
        auto fdev = featurize(graph, model, *active_db, dev, cfg, Variant::full);
        auto ftest = featurize(graph, model, *active_db, test, cfg, Variant::full);
        FusionTrainResult trained = train_fusion(ftrain, fdev, cfg);
        SweepPoint point;
        point.value = value;
        point.dev_accuracy = trained.best_dev_accuracy;
        point.test_accuracy = accuracy(trained.head, ftest);
        points.push_back(point);
    }
    return points;
}

}  // namespace septa

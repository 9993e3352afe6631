#include "core/query.hpp"

#include <algorithm>
#include <set>

#include "core/textualize.hpp"

namespace septa {

std::vector<int64_t> gather_candidate_triplets(const KnowledgeGraph& graph,
                                               const std::string& question,
                                               const std::string& choice) {
    auto q_entities = graph.link_entities(question);
    auto c_entities = graph.link_entities(choice);
    std::set<int64_t> merged(q_entities.begin(), q_entities.end());
    merged.insert(c_entities.begin(), c_entities.end());
    return graph.triples_touching(std::vector<int64_t>(merged.begin(), merged.end()));
}

std::vector<SelectedTriplet> rank_triplets(const AlignmentModel& model,
                                           const std::string& qa_text,
                                           const std::vector<int64_t>& candidates,
                                           const KnowledgeGraph& graph, size_t top_k) {
    if (top_k < 1) throw std::invalid_argument("rank_triplets: top_k must be >= 1");
    Vec query = model.embed_project_text(qa_text);
    std::vector<SelectedTriplet> scored;
    scored.reserve(candidates.size());
    for (int64_t idx : candidates) {
        SelectedTriplet st;
        st.triple_index = idx;
        st.text = textualize_triple(graph, graph.triple(idx));
        st.score = cosine(query, model.embed_project_text(st.text));
        scored.push_back(std::move(st));
    }
    std::stable_sort(scored.begin(), scored.end(),
                     [](const SelectedTriplet& a, const SelectedTriplet& b) {
                         if (a.score != b.score) return a.score > b.score;
                         return a.triple_index < b.triple_index;
                     });
    if (scored.size() > top_k) scored.resize(top_k);
    return scored;
}

EnhancedQuery build_enhanced_query(const KnowledgeGraph& graph, const AlignmentModel& model,
                                   const std::string& question, const std::string& choice,
                                   size_t top_k_triplets) {
    EnhancedQuery eq;
    eq.qa_text = question + " " + choice;
    eq.question_entities = graph.link_entities(question);
    eq.choice_entities = graph.link_entities(choice);

    if (top_k_triplets > 0) {
        std::set<int64_t> merged(eq.question_entities.begin(), eq.question_entities.end());
        merged.insert(eq.choice_entities.begin(), eq.choice_entities.end());
        auto candidates =
            graph.triples_touching(std::vector<int64_t>(merged.begin(), merged.end()));
        eq.triplets = rank_triplets(model, eq.qa_text, candidates, graph, top_k_triplets);
    }

    eq.enhanced_text = eq.qa_text;
    if (!eq.triplets.empty()) {
        eq.enhanced_text += " ";
        for (const auto& t : eq.triplets) eq.enhanced_text += t.text;
    }
    eq.embedding = model.embed_project_text(eq.enhanced_text);
    return eq;
}

RetrievedSubgraphs retrieve_subgraphs(const VectorDatabase& db, const EnhancedQuery& query,
                                      size_t k, unsigned threads) {
    auto hits = db.top_k(query.embedding, k, threads);
    RetrievedSubgraphs out;
    out.vectors = Matrix(hits.size(), db.dim());
    out.similarities.reserve(hits.size());
    out.centers.reserve(hits.size());
    for (size_t i = 0; i < hits.size(); ++i) {
        const auto& rec = db.record(static_cast<size_t>(hits[i].index));
        for (size_t j = 0; j < db.dim(); ++j)
            out.vectors.at(i, j) = static_cast<double>(rec.vec[j]);
        out.similarities.push_back(hits[i].similarity);
        out.centers.push_back(rec.center);
    }
    return out;
}

}  // namespace septa

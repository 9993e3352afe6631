#include "core/benchmark.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "core/rng.hpp"

namespace septa {

namespace {

const char* kSyllables[] = {"ba", "do", "ku", "mi", "ra", "ta", "vo", "ze",
                            "fi", "ga", "lu", "ne", "po", "su", "wi", "ya"};
constexpr size_t kSyllableCount = sizeof(kSyllables) / sizeof(kSyllables[0]);

const char* kVerbs[] = {"crams", "zorbs", "gleeps", "snibs", "plofs",
                        "drims", "vlors", "twanes", "brops", "quils"};
constexpr size_t kVerbCount = sizeof(kVerbs) / sizeof(kVerbs[0]);

// Tokens used by the question template; generated entity names must not
// collide with them.
const std::set<std::string>& reserved_tokens() {
    static const std::set<std::string> r = {"what", "connects", "with", "and", "also"};
    return r;
}

std::string make_word(Rng& rng, size_t syllables) {
    std::string w;
    for (size_t i = 0; i < syllables; ++i) w += kSyllables[rng.below(kSyllableCount)];
    return w;
}

struct EdgeRec {
    std::string head, rel, tail;
};

}  // namespace

void BenchmarkConfig::validate() const {
    if (nodes < 40) throw std::invalid_argument("benchmark: nodes must be >= 40");
    if (relations < 3 || relations > kVerbCount)
        throw std::invalid_argument("benchmark: relations must be in [3, " +
                                    std::to_string(kVerbCount) + "]");
    if (choices < 2 || choices > 8)
        throw std::invalid_argument("benchmark: choices must be in [2, 8]");
    if (instances < 1) throw std::invalid_argument("benchmark: instances must be >= 1");
}

GeneratedBenchmark generate_benchmark(const BenchmarkConfig& config) {
    config.validate();
    Rng rng(config.seed);

    // Node populations. Every entity owns one answer structure: a
    // dedicated pair of question anchors bridging into a dedicated
    // middle, the middle connects to the entity with an ordinary filler
    // verb, and a witness edge (the only use of the connector relation)
    // hangs off the middle. Entities double as distractors for other
    // structures, so surface-form statistics alone cannot identify the
    // answer; only the connection to the question's anchors can, and the
    // witness mark is visible in neighborhood records but never in
    // query-side triplets.
    const size_t n_entity = config.nodes / 6;
    const size_t n_anchor = 2 * n_entity;
    const size_t n_middle = n_entity;
    const size_t n_witness = n_entity;
    const size_t n_background =
        config.nodes - n_entity - n_anchor - n_middle - n_witness;
    if (n_entity < 8 || n_background < 8)
        throw std::invalid_argument("benchmark: node count too small to populate");

    std::unordered_set<std::string> used(reserved_tokens().begin(), reserved_tokens().end());
    for (size_t i = 0; i < kVerbCount; ++i) used.insert(kVerbs[i]);
    auto fresh_word = [&](size_t syllables) {
        for (int tries = 0; tries < 2000; ++tries) {
            std::string w = make_word(rng, syllables);
            if (used.insert(w).second) return w;
        }
        throw std::runtime_error("benchmark: token space exhausted");
    };

    std::vector<std::string> entities, anchors, middles, witnesses, background;
    for (size_t i = 0; i < n_entity; ++i) entities.push_back(fresh_word(2));
    for (size_t i = 0; i < n_anchor; ++i) anchors.push_back(fresh_word(2));
    for (size_t i = 0; i < n_middle; ++i) middles.push_back(fresh_word(3));
    for (size_t i = 0; i < n_witness; ++i) witnesses.push_back(fresh_word(3));
    for (size_t i = 0; i < n_background; ++i) background.push_back(fresh_word(3));

    // Relations: [0] bridge (anchor -> middle), [1] witness marker
    // (middle -> witness, nowhere else), rest filler. The
    // middle -> entity connection reuses a random filler relation so the
    // connecting fact is indistinguishable from filler facts by verb.
    std::vector<std::string> rel_names;
    for (size_t r = 0; r < config.relations; ++r) rel_names.push_back(kVerbs[r]);

    std::set<std::tuple<std::string, std::string, std::string>> edge_set;
    std::vector<EdgeRec> edges;
    auto add_edge = [&](const std::string& h, const std::string& r, const std::string& t) {
        if (h == t) return;
        if (edge_set.emplace(h, r, t).second) edges.push_back(EdgeRec{h, r, t});
    };

    auto filler_rel = [&]() { return rel_names[2 + rng.below(config.relations - 2)]; };

    struct Structure {
        size_t q1, q2, middle, entity;
    };
    std::vector<Structure> structures;
    for (size_t e = 0; e < n_entity; ++e) {
        Structure s;
        s.entity = e;
        s.middle = e;       // dedicated middle
        s.q1 = 2 * e;       // dedicated anchor pair
        s.q2 = 2 * e + 1;
        add_edge(middles[s.middle], rel_names[1], witnesses[e]);
        add_edge(anchors[s.q1], rel_names[0], middles[s.middle]);
        add_edge(anchors[s.q2], rel_names[0], middles[s.middle]);
        // two parallel connecting facts with distinct filler verbs, so
        // the link is strong without a verb unique to connections
        size_t vf = rng.below(config.relations - 2);
        add_edge(middles[s.middle], rel_names[2 + vf], entities[s.entity]);
        add_edge(middles[s.middle],
                 rel_names[2 + (vf + 1) % (config.relations - 2)], entities[s.entity]);
        structures.push_back(s);
    }
    for (const auto& a : anchors)
        for (size_t i = 0; i < config.anchor_filler_edges; ++i)
            add_edge(a, filler_rel(), background[rng.below(n_background)]);
    for (const auto& e : entities)
        for (size_t i = 0; i < config.answer_filler_edges; ++i)
            add_edge(e, filler_rel(), background[rng.below(n_background)]);
    for (const auto& b : background)
        for (size_t i = 0; i < config.background_filler_edges; ++i)
            add_edge(b, filler_rel(), background[rng.below(n_background)]);

    // Undirected adjacency for the two-hop reachability checks.
    std::unordered_map<std::string, std::vector<std::string>> adj;
    for (const auto& e : edges) {
        adj[e.head].push_back(e.tail);
        adj[e.tail].push_back(e.head);
    }
    auto two_hop_set = [&](const std::string& from) {
        std::unordered_set<std::string> seen{from};
        std::vector<std::string> frontier{from};
        for (int depth = 0; depth < 2; ++depth) {
            std::vector<std::string> next;
            for (const auto& u : frontier)
                for (const auto& v : adj[u])
                    if (seen.insert(v).second) next.push_back(v);
            frontier = std::move(next);
        }
        return seen;
    };

    GeneratedBenchmark out;
    // Half the distractors (rounded up) are unconnected entities from
    // other structures, the rest are background nodes.
    const size_t n_entity_distractors = (config.choices - 1) / 2;
    for (size_t i = 0; i < config.instances; ++i) {
        const Structure& s = structures[i % structures.size()];
        auto reach = two_hop_set(anchors[s.q1]);
        auto reach2 = two_hop_set(anchors[s.q2]);
        reach.insert(reach2.begin(), reach2.end());

        std::vector<std::string> choices{entities[s.entity]};
        std::unordered_set<std::string> chosen{entities[s.entity]};
        auto draw_distractor = [&](const std::vector<std::string>& pool, const char* kind) {
            for (int tries = 0; tries < 4000; ++tries) {
                const std::string& cand = pool[rng.below(pool.size())];
                if (reach.count(cand) || chosen.count(cand)) continue;
                chosen.insert(cand);
                return cand;
            }
            throw std::runtime_error(std::string("benchmark: no eligible ") + kind +
                                     " distractor for instance " + std::to_string(i));
        };
        for (size_t d = 0; d + 1 < config.choices; ++d) {
            if (d < n_entity_distractors)
                choices.push_back(draw_distractor(entities, "entity"));
            else
                choices.push_back(draw_distractor(background, "background"));
        }
        rng.shuffle(choices);

        QAInstance inst;
        inst.id = "synth-" + std::to_string(i);
        inst.question = "what connects with " + anchors[s.q1] + " and also " + anchors[s.q2];
        inst.choices = choices;
        for (size_t c = 0; c < inst.choices.size(); ++c)
            if (inst.choices[c] == entities[s.entity]) inst.answer = static_cast<int>(c);
        out.instances.push_back(std::move(inst));
    }

    std::ostringstream triples;
    for (const auto& e : edges) triples << e.head << '\t' << e.rel << '\t' << e.tail << '\n';
    out.triples_tsv = triples.str();

    std::ostringstream templates;
    for (const auto& r : rel_names) templates << r << "\t{head} " << r << " {tail}\n";
    out.templates_tsv = templates.str();

    out.node_count = n_entity + n_anchor + n_middle + n_witness + n_background;
    out.edge_count = edges.size();
    return out;
}

void write_benchmark(const GeneratedBenchmark& bench, const std::string& dir,
                     const std::vector<size_t>& split) {
    auto write_file = [&](const std::string& name, const std::string& content) {
        std::ofstream out(dir + "/" + name, std::ios::binary);
        if (!out) throw std::runtime_error("cannot open for writing: " + dir + "/" + name);
        out << content;
    };
    write_file("triples.tsv", bench.triples_tsv);
    write_file("templates.tsv", bench.templates_tsv);
    save_qa_jsonl(bench.instances, dir + "/qa.jsonl");

    if (!split.empty()) {
        if (split.size() != 3)
            throw std::invalid_argument("write_benchmark: split must be train,dev,test");
        size_t total = split[0] + split[1] + split[2];
        if (total > bench.instances.size())
            throw std::invalid_argument("write_benchmark: split exceeds instance count");
        const char* names[3] = {"qa_train.jsonl", "qa_dev.jsonl", "qa_test.jsonl"};
        size_t offset = 0;
        for (int part = 0; part < 3; ++part) {
            std::vector<QAInstance> slice(bench.instances.begin() + static_cast<long>(offset),
                                          bench.instances.begin() +
                                              static_cast<long>(offset + split[part]));
            save_qa_jsonl(slice, dir + "/" + names[part]);
            offset += split[part];
        }
    }
}

}  // namespace septa

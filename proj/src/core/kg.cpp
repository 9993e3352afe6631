#include "core/kg.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace septa {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> fields;
    size_t start = 0;
    while (true) {
        size_t pos = line.find('\t', start);
        if (pos == std::string::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return fields;
}

bool is_blank(const std::string& line) {
    return std::all_of(line.begin(), line.end(),
                       [](unsigned char c) { return std::isspace(c); });
}

// Validates that a template contains each placeholder exactly once.
void check_template(const std::string& name, const std::string& pattern, size_t line_no) {
    auto count = [&](std::string_view needle) {
        size_t n = 0, pos = 0;
        while ((pos = pattern.find(needle, pos)) != std::string::npos) {
            ++n;
            pos += needle.size();
        }
        return n;
    };
    if (count("{head}") != 1 || count("{tail}") != 1) {
        throw std::runtime_error("templates line " + std::to_string(line_no) +
                                 ": relation '" + name +
                                 "' must contain {head} and {tail} exactly once");
    }
}

}  // namespace

std::string normalize_text(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            out.push_back(static_cast<char>(std::tolower(c)));
        } else if (c >= 0x80) {
            out.push_back(static_cast<char>(c));  // pass non-ASCII bytes through
        } else {
            out.push_back(' ');
        }
    }
    return out;
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (char c : text) {
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
            if (!current.empty()) {
                tokens.push_back(std::move(current));
                current.clear();
            }
        } else {
            current.push_back(c);
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

std::string surface_from_uri(std::string_view uri) {
    size_t slash = uri.rfind('/');
    std::string_view stem = slash == std::string_view::npos ? uri : uri.substr(slash + 1);
    std::string out;
    out.reserve(stem.size());
    for (unsigned char c : stem) {
        if (c == '_') {
            out.push_back(' ');
        } else if (c < 0x80) {
            out.push_back(static_cast<char>(std::tolower(c)));
        } else {
            out.push_back(static_cast<char>(c));
        }
    }
    return out;
}

KnowledgeGraph KnowledgeGraph::load(const std::string& triples_path,
                                    const std::string& templates_path) {
    std::ifstream templates_in(templates_path);
    if (!templates_in) throw std::runtime_error("cannot open templates file: " + templates_path);

    std::unordered_map<std::string, std::string> templates;
    {
        std::string line;
        size_t line_no = 0;
        while (std::getline(templates_in, line)) {
            ++line_no;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (is_blank(line) || line[0] == '#') continue;
            auto fields = split_tabs(line);
            if (fields.size() != 2) {
                throw std::runtime_error("templates line " + std::to_string(line_no) +
                                         ": expected 2 tab-separated fields, got " +
                                         std::to_string(fields.size()));
            }
            check_template(fields[0], fields[1], line_no);
            templates[fields[0]] = fields[1];
        }
    }

    std::ifstream triples_in(triples_path);
    if (!triples_in) throw std::runtime_error("cannot open triples file: " + triples_path);

    KnowledgeGraph g;
    std::unordered_map<std::string, int64_t> relation_ids;
    std::set<std::tuple<int64_t, int64_t, int64_t>> seen;

    auto intern_node = [&g](const std::string& uri) -> int64_t {
        auto it = g.uri_index_.find(uri);
        if (it != g.uri_index_.end()) return it->second;
        int64_t id = static_cast<int64_t>(g.nodes_.size());
        std::string surface = surface_from_uri(uri);
        if (surface.empty()) {
            throw std::runtime_error("node uri '" + uri + "' reduces to an empty surface form");
        }
        g.nodes_.push_back(ConceptNode{id, uri, std::move(surface)});
        g.uri_index_.emplace(uri, id);
        return id;
    };

    std::string line;
    size_t line_no = 0;
    while (std::getline(triples_in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (is_blank(line) || line[0] == '#') continue;
        auto fields = split_tabs(line);
        if (fields.size() != 3) {
            throw std::runtime_error("triples line " + std::to_string(line_no) +
                                     ": expected 3 tab-separated fields, got " +
                                     std::to_string(fields.size()));
        }
        const std::string& rel_name = fields[1];
        auto rel_it = relation_ids.find(rel_name);
        int64_t rel_id;
        if (rel_it == relation_ids.end()) {
            auto tpl = templates.find(rel_name);
            if (tpl == templates.end()) {
                throw std::runtime_error("triples line " + std::to_string(line_no) +
                                         ": relation '" + rel_name + "' has no template");
            }
            rel_id = static_cast<int64_t>(g.relations_.size());
            g.relations_.push_back(RelationType{rel_id, rel_name, tpl->second});
            relation_ids.emplace(rel_name, rel_id);
        } else {
            rel_id = rel_it->second;
        }
        int64_t head = intern_node(fields[0]);
        int64_t tail = intern_node(fields[2]);
        if (seen.emplace(head, rel_id, tail).second) {
            g.triples_.push_back(Triple{head, rel_id, tail});
        }
    }

    if (g.triples_.empty()) throw std::runtime_error("empty graph: no triples in " + triples_path);

    g.build_indexes();
    return g;
}

void KnowledgeGraph::build_indexes() {
    neighbors_.assign(nodes_.size(), {});
    for (size_t i = 0; i < triples_.size(); ++i) {
        const Triple& t = triples_[i];
        neighbors_[static_cast<size_t>(t.head)].push_back(
            NeighborRef{static_cast<int64_t>(i), t.tail});
        if (t.tail != t.head) {
            neighbors_[static_cast<size_t>(t.tail)].push_back(
                NeighborRef{static_cast<int64_t>(i), t.head});
        }
    }
    surface_index_.clear();
    for (const auto& node : nodes_) {
        surface_index_[node.surface].push_back(node.id);
    }
}

std::optional<int64_t> KnowledgeGraph::find_node(std::string_view uri) const {
    auto it = uri_index_.find(std::string(uri));
    if (it == uri_index_.end()) return std::nullopt;
    return it->second;
}

std::vector<int64_t> KnowledgeGraph::link_entities(std::string_view text) const {
    constexpr size_t kMaxGram = 4;
    auto tokens = tokenize(normalize_text(text));
    std::set<int64_t> found;
    size_t i = 0;
    while (i < tokens.size()) {
        size_t longest = std::min(kMaxGram, tokens.size() - i);
        size_t consumed = 1;
        for (size_t n = longest; n >= 1; --n) {
            std::string gram = tokens[i];
            for (size_t j = 1; j < n; ++j) {
                gram += ' ';
                gram += tokens[i + j];
            }
            auto it = surface_index_.find(gram);
            if (it != surface_index_.end()) {
                found.insert(it->second.begin(), it->second.end());
                consumed = n;
                break;
            }
        }
        i += consumed;
    }
    return std::vector<int64_t>(found.begin(), found.end());
}

std::vector<int64_t> KnowledgeGraph::triples_touching(
    const std::vector<int64_t>& entities) const {
    std::set<int64_t> indices;
    for (int64_t e : entities) {
        if (e < 0 || static_cast<size_t>(e) >= nodes_.size()) {
            throw std::out_of_range("triples_touching: node id " + std::to_string(e) +
                                    " out of range");
        }
        for (const NeighborRef& ref : neighbors_[static_cast<size_t>(e)]) {
            indices.insert(ref.triple_index);
        }
    }
    return std::vector<int64_t>(indices.begin(), indices.end());
}

void KnowledgeGraph::set_features(Matrix features) {
    if (features.rows != nodes_.size()) {
        throw std::invalid_argument("set_features: expected " + std::to_string(nodes_.size()) +
                                    " rows, got " + std::to_string(features.rows));
    }
    features_ = std::move(features);
}

}  // namespace septa

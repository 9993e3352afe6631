#include "core/qa.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace septa {

void QAInstance::validate() const {
    if (choices.size() < 2)
        throw std::runtime_error("qa instance '" + id + "': needs at least 2 choices");
    for (const auto& c : choices)
        if (c.empty()) throw std::runtime_error("qa instance '" + id + "': empty choice");
    if (answer && (*answer < 0 || static_cast<size_t>(*answer) >= choices.size()))
        throw std::runtime_error("qa instance '" + id + "': answer index out of range");
}

std::vector<QAInstance> load_qa_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open qa file: " + path);
    std::vector<QAInstance> out;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& ex) {
            throw std::runtime_error(path + " line " + std::to_string(line_no) + ": " + ex.what());
        }
        QAInstance inst;
        inst.id = j.value("id", "line" + std::to_string(line_no));
        inst.question = j.at("question").get<std::string>();
        inst.choices = j.at("choices").get<std::vector<std::string>>();
        if (j.contains("answer") && !j["answer"].is_null())
            inst.answer = j["answer"].get<int>();
        inst.validate();
        out.push_back(std::move(inst));
    }
    return out;
}

void save_qa_jsonl(const std::vector<QAInstance>& instances, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    for (const auto& inst : instances) {
        nlohmann::json j;
        j["id"] = inst.id;
        j["question"] = inst.question;
        j["choices"] = inst.choices;
        if (inst.answer) j["answer"] = *inst.answer;
        out << j.dump() << "\n";
    }
}

}  // namespace septa

#pragma once
// Multiple-choice QA instances and their JSONL file format:
// {"id": ..., "question": ..., "choices": [...], "answer": <index>?}

#include <optional>
#include <string>
#include <vector>

namespace septa {

struct QAInstance {
    std::string id;
    std::string question;
    std::vector<std::string> choices;
    std::optional<int> answer;

    void validate() const;
};

std::vector<QAInstance> load_qa_jsonl(const std::string& path);
void save_qa_jsonl(const std::vector<QAInstance>& instances, const std::string& path);

}  // namespace septa

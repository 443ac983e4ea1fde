#pragma once

#include <string>
#include <vector>

#include "kbqa/kb.hpp"
#include "kbqa/retrieval.hpp"
#include "kbqa/tensor.hpp"

namespace kbqa {

// Question-token vocabulary. Id 0 is the unknown token; the rest follow
// first-seen order over the dataset splits.
class Vocab {
public:
    static Vocab build(const std::vector<const std::vector<Question>*>& splits);
    static Vocab from_words(const std::vector<std::string>& words); // checkpoint load

    std::vector<int32_t> encode(const std::vector<std::string>& tokens) const;
    const std::vector<std::string>& words() const { return table_.names(); }
    int64_t size() const { return table_.size(); }

private:
    SymbolTable table_;
};

struct Dataset {
    KnowledgeBase kb;
    std::vector<Question> train;
    std::vector<Question> dev;
    std::vector<Question> test;

    // Expects kb.tsv and {train,dev,test}.jsonl under dir.
    static Dataset load(const std::string& dir);
};

// One question with its retrieved subgraph and local-id views, ready for the
// reasoning engine.
struct PreparedQuestion {
    const Question* question = nullptr;
    Subgraph sub;
    std::vector<int32_t> tokens;        // vocab ids
    std::vector<int32_t> topic_locals;  // nonempty
    std::vector<int32_t> answer_locals; // answers that survived retrieval
    ad::Tensor topic_dist;  // uniform over topic entities: forward p0, backward target
    ad::Tensor answer_dist; // frequency-normalized answers: forward target, backward p0
    bool trainable = false; // at least one answer inside the subgraph
};

std::vector<PreparedQuestion> prepare_questions(const KnowledgeBase& kb,
                                                const std::vector<Question>& questions,
                                                const Vocab& vocab, const PprConfig& ppr,
                                                CoverageReport* coverage);

} // namespace kbqa

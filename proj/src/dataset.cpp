#include "kbqa/dataset.hpp"

#include "kbqa/errors.hpp"
#include "kbqa/model.hpp"

namespace kbqa {

namespace {
constexpr const char* kUnknownToken = "<unk>";
} // namespace

Vocab Vocab::build(const std::vector<const std::vector<Question>*>& splits) {
    Vocab v;
    v.table_.intern(kUnknownToken);
    for (const auto* split : splits) {
        for (const Question& q : *split) {
            for (const std::string& tok : q.tokens) v.table_.intern(tok);
        }
    }
    return v;
}

Vocab Vocab::from_words(const std::vector<std::string>& words) {
    Vocab v;
    for (const std::string& w : words) v.table_.intern(w);
    if (v.table_.lookup(kUnknownToken) != 0) {
        throw DataError("vocabulary does not start with the unknown token");
    }
    return v;
}

std::vector<int32_t> Vocab::encode(const std::vector<std::string>& tokens) const {
    std::vector<int32_t> ids;
    ids.reserve(tokens.size());
    for (const std::string& tok : tokens) {
        const int32_t id = table_.lookup(tok);
        ids.push_back(id < 0 ? 0 : id);
    }
    return ids;
}

Dataset Dataset::load(const std::string& dir) {
    Dataset d;
    d.kb = load_triples(dir + "/kb.tsv");
    d.train = load_questions(dir + "/train.jsonl", d.kb);
    d.dev = load_questions(dir + "/dev.jsonl", d.kb);
    d.test = load_questions(dir + "/test.jsonl", d.kb);
    return d;
}

std::vector<PreparedQuestion> prepare_questions(const KnowledgeBase& kb,
                                                const std::vector<Question>& questions,
                                                const Vocab& vocab, const PprConfig& ppr,
                                                CoverageReport* coverage) {
    std::vector<PreparedQuestion> out;
    out.reserve(questions.size());
    for (const Question& q : questions) {
        PreparedQuestion pq;
        pq.question = &q;
        QuestionCoverage cov;
        cov.question_id = q.id;
        pq.sub = build_question_subgraph(kb, q.topic_entities, q.answers, ppr, &cov);
        if (coverage != nullptr) coverage->add(cov);
        pq.tokens = vocab.encode(q.tokens);
        for (EntityId t : q.topic_entities) {
            const int32_t local = pq.sub.to_local(t);
            if (local >= 0) pq.topic_locals.push_back(local);
        }
        if (pq.topic_locals.empty()) {
            throw DataError("question " + q.id + ": no topic entity in subgraph");
        }
        for (EntityId a : q.answers) {
            const int32_t local = pq.sub.to_local(a);
            if (local >= 0) pq.answer_locals.push_back(local);
        }
        pq.topic_dist = model::ground_truth_distribution(pq.topic_locals, pq.sub.num_entities());
        if (!pq.answer_locals.empty()) {
            pq.answer_dist =
                model::ground_truth_distribution(pq.answer_locals, pq.sub.num_entities());
            pq.trainable = true;
        }
        out.push_back(std::move(pq));
    }
    return out;
}

} // namespace kbqa

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kbqa/kb.hpp"

namespace kbqa {

struct PprConfig {
    double epsilon = 1e-6;  // push threshold: residual(u) < epsilon * degree(u) at exit
    double alpha = 0.15;    // teleport (restart) probability
    int64_t top_m = 500;    // entity budget
    int64_t pre_hops = 0;   // hop-radius pre-restriction around topic entities; 0 disables

    void validate() const;
};

// Entities within k directed hops of any topic entity. The directed store
// contains both directions by construction, so this is plain BFS.
Subgraph restrict_khop(const KnowledgeBase& kb, const std::vector<EntityId>& topics, int64_t k);

// Approximate personalized PageRank via the lazy push method. Seed mass is
// uniform over `seeds` (local ids); on return every node's residual is below
// epsilon * degree(node) and the scores sum to at most 1.
std::vector<double> ppr_scores(const Subgraph& graph, const std::vector<int32_t>& seeds,
                               const PprConfig& cfg);

struct QuestionCoverage {
    std::string question_id;
    bool answer_covered = false;
    int64_t num_entities = 0;
};

struct CoverageReport {
    std::vector<QuestionCoverage> entries;

    void add(QuestionCoverage entry) { entries.push_back(std::move(entry)); }
    double coverage_ratio() const;
    double mean_entities() const;
};

// Full retrieval pipeline: optional k-hop restriction, PPR from the topic
// entities, top-m selection (score descending, entity id ascending on ties,
// topic entities always kept), then induction with self-loop edges added.
// `answers` may be empty outside training; coverage then reports false.
Subgraph build_question_subgraph(const KnowledgeBase& kb, const std::vector<EntityId>& topics,
                                 const std::vector<EntityId>& answers, const PprConfig& cfg,
                                 QuestionCoverage* coverage = nullptr);

} // namespace kbqa

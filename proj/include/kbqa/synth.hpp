#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kbqa/config.hpp"
#include "kbqa/kb.hpp"

namespace kbqa::synth {

struct GenConfig {
    int64_t movies = 100;
    int64_t actors = 40;
    int64_t directors = 12;
    int64_t writers = 18;
    int64_t genres = 6;
    int64_t years = 20;
    int64_t actors_per_movie = 2;
    int64_t genres_per_movie = 2;
    std::string template_set = "mixed"; // mixed | spurious3
    int64_t questions_per_template = 50;
    int64_t split_train = 36;
    int64_t split_dev = 7;
    int64_t split_test = 7;
    double spurious_fraction = 0.5;
    uint64_t seed = 7;

    static GenConfig from(const Config& cfg);
    void validate() const;
};

// Question template: a surface pattern with one topic slot, a relation path,
// and (for spurious templates) a decoy path that shares the topic and the
// final relation but starts through a different branch.
struct Template {
    std::string id;
    std::string pattern; // contains the [X] slot
    std::vector<std::string> path;
    std::vector<std::string> decoy; // empty for clean templates

    int hops() const { return static_cast<int>(path.size()); }
    bool spurious() const { return !decoy.empty(); }
};

std::vector<Template> template_set(const std::string& name, double spurious_fraction);

// Exact breadth-first relational composition. hops[k-1] holds the entity set
// after k relation applications; answers equal the final hop set. An empty
// answer set means some intermediate set was empty.
struct OracleResult {
    std::vector<EntityId> answers;
    std::vector<std::vector<EntityId>> hops;
};
OracleResult oracle_answers(const KnowledgeBase& kb, EntityId topic,
                            const std::vector<RelationId>& path);

std::vector<RelationId> resolve_path(const KnowledgeBase& kb, const std::vector<std::string>& path);

struct GeneratedData {
    KnowledgeBase kb;
    std::vector<Question> train;
    std::vector<Question> dev;
    std::vector<Question> test;
    std::vector<Template> templates;

    int64_t planted_triples = 0;
    // Decoy statistics over 3-hop test questions (on the final KB).
    int64_t test3_total = 0;
    int64_t test3_with_decoy_overlap = 0;
};

GeneratedData generate(const GenConfig& cfg);

// kb.tsv + {train,dev,test}.jsonl + templates.json under dir (must exist).
void write_dataset(const GeneratedData& data, const std::string& dir);

} // namespace kbqa::synth

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "kbqa/tape.hpp"

namespace kbqa {

using EntityId = int32_t;
using RelationId = int32_t;

// Bidirectional string <-> dense-id table. Ids are assigned in first-seen
// order; lookups are case-sensitive exact match.
class SymbolTable {
public:
    int32_t intern(const std::string& name);
    int32_t lookup(const std::string& name) const; // -1 when absent
    const std::string& name(int32_t id) const { return names_[static_cast<size_t>(id)]; }
    int32_t size() const { return static_cast<int32_t>(names_.size()); }
    const std::vector<std::string>& names() const { return names_; }

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, int32_t> index_;
};

// Directed edge <head, relation, tail> over dense ids.
struct Triple {
    EntityId head = -1;
    RelationId relation = -1;
    EntityId tail = -1;

    bool operator==(const Triple&) const = default;
};

// Directed triple store. Every raw triple <e, r, e'> is stored together with
// its reverse <e', r^-1, e>, so the neighborhood of an entity is exactly the
// set of directed edges arriving at it.
class KnowledgeBase {
public:
    // Registers raw triples (head/relation/tail names). Duplicates are
    // dropped before reverse-edge synthesis.
    static KnowledgeBase from_raw(const std::vector<std::array<std::string, 3>>& raw);

    const SymbolTable& entities() const { return entities_; }
    const SymbolTable& relations() const { return relations_; }

    int64_t num_entities() const { return entities_.size(); }
    int64_t num_relations() const { return relations_.size(); } // includes inverses + self-loop
    int64_t num_directed_edges() const { return static_cast<int64_t>(edges_.size()); }
    int64_t num_raw_triples() const { return raw_count_; }

    // Involutive inverse over relation ids; the self-loop relation is its
    // own inverse.
    RelationId inverse(RelationId r) const;
    RelationId self_loop_relation() const { return self_loop_; }
    bool is_inverse_relation(RelationId r) const;

    // Directed edges with tail e, ordered by (relation id, head id).
    std::vector<Triple> neighborhood(EntityId e) const;

    // All directed edges arriving at e as (begin,end) into the sorted edge
    // index; cheaper than materializing Triples.
    const std::vector<Triple>& directed_edges() const { return edges_; }
    const std::vector<int32_t>& incoming_index(EntityId e) const;

    // Raw triples in first-seen order (deduplicated); used by save_triples.
    const std::vector<Triple>& raw_triples() const { return raw_; }

    void check_entity(EntityId e) const;

private:
    SymbolTable entities_;
    SymbolTable relations_; // forward relations, then inverses, then self-loop
    std::vector<Triple> raw_;
    std::vector<Triple> edges_;
    std::vector<std::vector<int32_t>> incoming_; // entity -> indices into edges_
    int32_t forward_relations_ = 0;
    RelationId self_loop_ = -1;
    int64_t raw_count_ = 0;
};

// Dense-relabelled view over a subset of KB entities. Keeps exactly the
// directed edges with both endpoints inside the subset; optionally adds one
// self-loop edge per local entity so a reasoning step can stay in place.
class Subgraph {
public:
    Subgraph() = default;

    const KnowledgeBase* parent() const { return parent_; }
    int64_t num_entities() const { return static_cast<int64_t>(local_to_global_.size()); }
    int64_t num_relations() const { return static_cast<int64_t>(rel_local_to_global_.size()); }
    const ad::EdgeArray& edges() const { return edges_; } // local ids

    EntityId to_global(int32_t local) const { return local_to_global_[static_cast<size_t>(local)]; }
    int32_t to_local(EntityId global) const; // -1 when absent
    RelationId rel_to_global(int32_t local) const {
        return rel_local_to_global_[static_cast<size_t>(local)];
    }

    // Local incoming edge indices per local entity, ordered by (relation,
    // source).
    const std::vector<int32_t>& incoming(int32_t local) const {
        return incoming_[static_cast<size_t>(local)];
    }
    // Local outgoing edge indices per local entity.
    const std::vector<int32_t>& outgoing(int32_t local) const {
        return outgoing_[static_cast<size_t>(local)];
    }

    int64_t degree(int32_t local) const {
        return static_cast<int64_t>(outgoing_[static_cast<size_t>(local)].size());
    }

    bool has_self_loops() const { return has_self_loops_; }

    friend Subgraph induce_subgraph(const KnowledgeBase& kb, const std::vector<EntityId>& entity_set,
                                    bool add_self_loops);

private:
    const KnowledgeBase* parent_ = nullptr;
    std::vector<EntityId> local_to_global_;
    std::unordered_map<EntityId, int32_t> global_to_local_;
    std::vector<RelationId> rel_local_to_global_;
    ad::EdgeArray edges_;
    std::vector<std::vector<int32_t>> incoming_;
    std::vector<std::vector<int32_t>> outgoing_;
    bool has_self_loops_ = false;
};

// Keeps exactly the directed edges with both endpoints in entity_set; local
// entity ids are dense, sorted by global id. Duplicate ids in entity_set are
// ignored.
Subgraph induce_subgraph(const KnowledgeBase& kb, const std::vector<EntityId>& entity_set,
                         bool add_self_loops = false);

struct Question {
    std::string id;
    std::vector<std::string> tokens;
    std::vector<EntityId> topic_entities;             // nonempty, sorted, unique
    std::vector<EntityId> answers;                    // sorted, unique
    std::vector<std::vector<EntityId>> gold_intermediates; // per hop, optional (empty = absent)
    std::string template_id;                          // optional
    bool has_gold_intermediates = false;
};

// ---- file formats -----------------------------------------------------------
// Triples: UTF-8 TSV, three columns head<TAB>relation<TAB>tail, no header.
// Questions: one JSON object per line with fields id, question,
// topic_entities, answers and optional gold_paths / template_id.

KnowledgeBase load_triples(const std::string& path);
void save_triples(const KnowledgeBase& kb, const std::string& path);

std::vector<Question> load_questions(const std::string& path, const KnowledgeBase& kb);
void save_questions(const std::vector<Question>& questions, const KnowledgeBase& kb,
                    const std::string& path);

} // namespace kbqa

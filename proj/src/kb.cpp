#include "kbqa/kb.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "kbqa/errors.hpp"

namespace kbqa {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr const char* kInverseSuffix = "_inv";
constexpr const char* kSelfLoopName = "self_loop";

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

} // namespace

int32_t SymbolTable::intern(const std::string& name) {
    auto it = index_.find(name);
    if (it != index_.end()) return it->second;
    const int32_t id = static_cast<int32_t>(names_.size());
    names_.push_back(name);
    index_[name] = id;
    return id;
}

int32_t SymbolTable::lookup(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? -1 : it->second;
}

KnowledgeBase KnowledgeBase::from_raw(const std::vector<std::array<std::string, 3>>& raw) {
    KnowledgeBase kb;

    // Pass 1: symbols and deduplicated raw triples in first-seen order.
    std::set<std::array<int32_t, 3>> seen;
    for (const auto& t : raw) {
        if (ends_with(t[1], kInverseSuffix) || t[1] == kSelfLoopName) {
            throw DataError("relation name '" + t[1] + "' uses a reserved form");
        }
        const EntityId h = kb.entities_.intern(t[0]);
        const RelationId r = kb.relations_.intern(t[1]);
        const EntityId tl = kb.entities_.intern(t[2]);
        if (seen.insert({h, r, tl}).second) kb.raw_.push_back({h, r, tl});
    }
    kb.raw_count_ = static_cast<int64_t>(kb.raw_.size());
    kb.forward_relations_ = kb.relations_.size();

    // Inverse relation block mirrors the forward block, then the self-loop.
    for (int32_t r = 0; r < kb.forward_relations_; ++r) {
        kb.relations_.intern(kb.relations_.name(r) + kInverseSuffix);
    }
    kb.self_loop_ = kb.relations_.intern(kSelfLoopName);

    kb.edges_.reserve(kb.raw_.size() * 2);
    for (const Triple& t : kb.raw_) {
        kb.edges_.push_back(t);
        kb.edges_.push_back({t.tail, kb.inverse(t.relation), t.head});
    }

    kb.incoming_.assign(static_cast<size_t>(kb.entities_.size()), {});
    for (size_t i = 0; i < kb.edges_.size(); ++i) {
        kb.incoming_[static_cast<size_t>(kb.edges_[i].tail)].push_back(static_cast<int32_t>(i));
    }
    for (auto& list : kb.incoming_) {
        std::sort(list.begin(), list.end(), [&kb](int32_t a, int32_t b) {
            const Triple& ta = kb.edges_[static_cast<size_t>(a)];
            const Triple& tb = kb.edges_[static_cast<size_t>(b)];
            if (ta.relation != tb.relation) return ta.relation < tb.relation;
            return ta.head < tb.head;
        });
    }
    return kb;
}

RelationId KnowledgeBase::inverse(RelationId r) const {
    if (r == self_loop_) return r;
    if (r < 0 || r >= relations_.size()) throw DataError("unknown relation id " + std::to_string(r));
    return r < forward_relations_ ? r + forward_relations_ : r - forward_relations_;
}

bool KnowledgeBase::is_inverse_relation(RelationId r) const {
    return r >= forward_relations_ && r != self_loop_;
}

void KnowledgeBase::check_entity(EntityId e) const {
    if (e < 0 || e >= entities_.size()) {
        throw DataError("unknown entity id " + std::to_string(e));
    }
}

const std::vector<int32_t>& KnowledgeBase::incoming_index(EntityId e) const {
    check_entity(e);
    return incoming_[static_cast<size_t>(e)];
}

std::vector<Triple> KnowledgeBase::neighborhood(EntityId e) const {
    check_entity(e);
    std::vector<Triple> out;
    out.reserve(incoming_[static_cast<size_t>(e)].size());
    for (int32_t idx : incoming_[static_cast<size_t>(e)]) {
        out.push_back(edges_[static_cast<size_t>(idx)]);
    }
    return out;
}

int32_t Subgraph::to_local(EntityId global) const {
    auto it = global_to_local_.find(global);
    return it == global_to_local_.end() ? -1 : it->second;
}

Subgraph induce_subgraph(const KnowledgeBase& kb, const std::vector<EntityId>& entity_set,
                         bool add_self_loops) {
    if (entity_set.empty()) throw DataError("induce_subgraph: empty entity set");
    Subgraph sub;
    sub.parent_ = &kb;

    std::vector<EntityId> sorted = entity_set;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    for (EntityId e : sorted) kb.check_entity(e);

    sub.local_to_global_ = sorted;
    for (size_t i = 0; i < sorted.size(); ++i) {
        sub.global_to_local_[sorted[i]] = static_cast<int32_t>(i);
    }

    // Collect kept edges via each member's incoming list (already ordered by
    // relation then head), so edge order is deterministic.
    std::unordered_map<RelationId, int32_t> rel_map;
    auto local_rel = [&](RelationId global) {
        auto it = rel_map.find(global);
        if (it != rel_map.end()) return it->second;
        const int32_t id = static_cast<int32_t>(sub.rel_local_to_global_.size());
        sub.rel_local_to_global_.push_back(global);
        rel_map[global] = id;
        return id;
    };

    for (size_t li = 0; li < sorted.size(); ++li) {
        const EntityId e = sorted[li];
        for (int32_t idx : kb.incoming_index(e)) {
            const Triple& t = kb.directed_edges()[static_cast<size_t>(idx)];
            const int32_t src = sub.to_local(t.head);
            if (src < 0) continue;
            sub.edges_.push(src, local_rel(t.relation), static_cast<int32_t>(li));
        }
    }

    if (add_self_loops) {
        const int32_t loop = local_rel(kb.self_loop_relation());
        for (size_t li = 0; li < sorted.size(); ++li) {
            sub.edges_.push(static_cast<int32_t>(li), loop, static_cast<int32_t>(li));
        }
        sub.has_self_loops_ = true;
    }

    sub.incoming_.assign(sorted.size(), {});
    sub.outgoing_.assign(sorted.size(), {});
    for (size_t i = 0; i < sub.edges_.size(); ++i) {
        sub.incoming_[static_cast<size_t>(sub.edges_.dst[i])].push_back(static_cast<int32_t>(i));
        sub.outgoing_[static_cast<size_t>(sub.edges_.src[i])].push_back(static_cast<int32_t>(i));
    }
    return sub;
}

KnowledgeBase load_triples(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open triple file: " + path);
    std::vector<std::array<std::string, 3>> raw;
    std::string line;
    int64_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const size_t t1 = line.find('\t');
        const size_t t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
        if (t1 == std::string::npos || t2 == std::string::npos ||
            line.find('\t', t2 + 1) != std::string::npos) {
            throw DataError(path + ":" + std::to_string(lineno) +
                            ": expected 3 tab-separated fields");
        }
        std::array<std::string, 3> fields = {line.substr(0, t1), line.substr(t1 + 1, t2 - t1 - 1),
                                             line.substr(t2 + 1)};
        for (const std::string& f : fields) {
            if (f.empty()) {
                throw DataError(path + ":" + std::to_string(lineno) + ": empty field");
            }
        }
        raw.push_back(std::move(fields));
    }
    if (raw.empty()) throw DataError("empty knowledge base: " + path);
    return KnowledgeBase::from_raw(raw);
}

void save_triples(const KnowledgeBase& kb, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write triple file: " + path);
    for (const Triple& t : kb.raw_triples()) {
        out << kb.entities().name(t.head) << '\t' << kb.relations().name(t.relation) << '\t'
            << kb.entities().name(t.tail) << '\n';
    }
}

namespace {

std::vector<EntityId> resolve_entities(const ordered_json& arr, const KnowledgeBase& kb,
                                       const std::string& record_id, const char* field) {
    std::vector<EntityId> out;
    for (const auto& item : arr) {
        const std::string name = item.get<std::string>();
        const int32_t id = kb.entities().lookup(name);
        if (id < 0) {
            throw DataError("question " + record_id + ": unknown entity '" + name + "' in " + field);
        }
        out.push_back(id);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

} // namespace

std::vector<Question> load_questions(const std::string& path, const KnowledgeBase& kb) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open question file: " + path);
    std::vector<Question> out;
    std::string line;
    int64_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        ordered_json j;
        try {
            j = ordered_json::parse(line);
        } catch (const std::exception& e) {
            throw DataError(path + ":" + std::to_string(lineno) + ": bad JSON: " + e.what());
        }
        Question q;
        q.id = j.value("id", std::string());
        if (q.id.empty()) {
            throw DataError(path + ":" + std::to_string(lineno) + ": missing field 'id'");
        }
        for (const char* field : {"question", "topic_entities", "answers"}) {
            if (!j.contains(field)) {
                throw DataError("question " + q.id + ": missing field '" + field + "'");
            }
        }
        std::istringstream toks(j["question"].get<std::string>());
        std::string tok;
        while (toks >> tok) q.tokens.push_back(tok);
        q.topic_entities = resolve_entities(j["topic_entities"], kb, q.id, "topic_entities");
        if (q.topic_entities.empty()) throw DataError("question " + q.id + ": no topic entities");
        q.answers = resolve_entities(j["answers"], kb, q.id, "answers");
        if (j.contains("gold_paths")) {
            q.has_gold_intermediates = true;
            for (const auto& hop : j["gold_paths"]) {
                q.gold_intermediates.push_back(resolve_entities(hop, kb, q.id, "gold_paths"));
            }
        }
        q.template_id = j.value("template_id", std::string());
        out.push_back(std::move(q));
    }
    return out;
}

void save_questions(const std::vector<Question>& questions, const KnowledgeBase& kb,
                    const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write question file: " + path);
    for (const Question& q : questions) {
        ordered_json j;
        j["id"] = q.id;
        std::string text;
        for (size_t i = 0; i < q.tokens.size(); ++i) {
            if (i > 0) text += ' ';
            text += q.tokens[i];
        }
        j["question"] = text;
        auto names = [&kb](const std::vector<EntityId>& ids) {
            std::vector<std::string> ns;
            ns.reserve(ids.size());
            for (EntityId e : ids) ns.push_back(kb.entities().name(e));
            return ns;
        };
        j["topic_entities"] = names(q.topic_entities);
        j["answers"] = names(q.answers);
        if (q.has_gold_intermediates) {
            ordered_json hops = ordered_json::array();
            for (const auto& hop : q.gold_intermediates) hops.push_back(names(hop));
            j["gold_paths"] = std::move(hops);
        }
        if (!q.template_id.empty()) j["template_id"] = q.template_id;
        out << j.dump() << '\n';
    }
}

} // namespace kbqa

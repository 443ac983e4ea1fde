#include "kbqa/synth.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "kbqa/errors.hpp"
#include "kbqa/rng.hpp"

namespace kbqa::synth {

namespace {

using ordered_json = nlohmann::ordered_json;
using RawTriple = std::array<std::string, 3>;

} // namespace

GenConfig GenConfig::from(const Config& cfg) {
    GenConfig g;
    g.movies = cfg.get_int("gen.movies");
    g.actors = cfg.get_int("gen.actors");
    g.directors = cfg.get_int("gen.directors");
    g.writers = cfg.get_int("gen.writers");
    g.genres = cfg.get_int("gen.genres");
    g.years = cfg.get_int("gen.years");
    g.actors_per_movie = cfg.get_int("gen.actors_per_movie");
    g.genres_per_movie = cfg.get_int("gen.genres_per_movie");
    g.template_set = cfg.get_string("gen.template_set");
    g.questions_per_template = cfg.get_int("gen.questions_per_template");
    g.split_train = cfg.get_int("gen.split_train");
    g.split_dev = cfg.get_int("gen.split_dev");
    g.split_test = cfg.get_int("gen.split_test");
    g.spurious_fraction = cfg.get_float("gen.spurious_fraction");
    g.seed = static_cast<uint64_t>(cfg.get_int("gen.seed"));
    g.validate();
    return g;
}

void GenConfig::validate() const {
    for (auto [name, v] : {std::pair<const char*, int64_t>{"gen.movies", movies},
                           {"gen.actors", actors},
                           {"gen.directors", directors},
                           {"gen.writers", writers},
                           {"gen.genres", genres},
                           {"gen.years", years},
                           {"gen.actors_per_movie", actors_per_movie},
                           {"gen.genres_per_movie", genres_per_movie},
                           {"gen.questions_per_template", questions_per_template}}) {
        if (v < 1) throw ConfigError(std::string(name) + " must be >= 1");
    }
    if (actors_per_movie > actors) throw ConfigError("gen.actors_per_movie exceeds gen.actors");
    if (genres_per_movie > genres) throw ConfigError("gen.genres_per_movie exceeds gen.genres");
    if (split_train < 1 || split_dev < 0 || split_test < 0) {
        throw ConfigError("gen.split_* must be non-negative with at least one train question");
    }
    if (split_train + split_dev + split_test > questions_per_template) {
        throw ConfigError("gen.split_* sums past gen.questions_per_template");
    }
    if (spurious_fraction < 0.0 || spurious_fraction > 1.0) {
        throw ConfigError("gen.spurious_fraction must be in [0, 1]");
    }
}

std::vector<Template> template_set(const std::string& name, double spurious_fraction) {
    const std::vector<Template> spurious3_clean = {
        {"c3_director_genre", "what genres are the films made by the director of [X]",
         {"directed_by", "directed_by_inv", "has_genre"}, {}},
        {"c3_director_writer", "who wrote the films made by the director of [X]",
         {"directed_by", "directed_by_inv", "written_by"}, {}},
        {"c3_genre_director", "who directed movies of the same genre as [X]",
         {"has_genre", "has_genre_inv", "directed_by"}, {}},
        {"c3_writer_year", "when were the films by the writer of [X] released",
         {"written_by", "written_by_inv", "release_year"}, {}},
        {"c3_genre_actor", "who starred in movies of the same genre as [X]",
         {"has_genre", "has_genre_inv", "starred_actors"}, {}},
    };
    const std::vector<Template> spurious3_decoy = {
        {"s3_actor_genre", "what types are the films starred by actors in [X]",
         {"starred_actors", "starred_actors_inv", "has_genre"},
         {"directed_by", "directed_by_inv", "has_genre"}},
        {"s3_writer_genre", "what genres are the movies written by the screenwriter of [X]",
         {"written_by", "written_by_inv", "has_genre"},
         {"directed_by", "directed_by_inv", "has_genre"}},
        {"s3_actor_year", "when were the films starred by actors in [X] released",
         {"starred_actors", "starred_actors_inv", "release_year"},
         {"directed_by", "directed_by_inv", "release_year"}},
        {"s3_writer_actor", "who starred in the movies written by the screenwriter of [X]",
         {"written_by", "written_by_inv", "starred_actors"},
         {"directed_by", "directed_by_inv", "starred_actors"}},
        {"s3_actor_writer", "who wrote the films starred by actors in [X]",
         {"starred_actors", "starred_actors_inv", "written_by"},
         {"directed_by", "directed_by_inv", "written_by"}},
    };

    if (name == "spurious3") {
        // Keep 10 templates total; spurious_fraction selects how many carry a
        // decoy (clean templates fill the rest).
        const int n_spurious =
            static_cast<int>(spurious_fraction * 10.0 + 0.5) > 5
                ? 5
                : static_cast<int>(spurious_fraction * 10.0 + 0.5);
        std::vector<Template> out;
        for (int i = 0; i < n_spurious; ++i) out.push_back(spurious3_decoy[static_cast<size_t>(i)]);
        for (int i = 0; i < 10 - n_spurious && i < 5; ++i) {
            out.push_back(spurious3_clean[static_cast<size_t>(i)]);
        }
        return out;
    }
    if (name == "mixed") {
        std::vector<Template> out = {
            {"q1_genre", "what genres does [X] have", {"has_genre"}, {}},
            {"q1_actor", "who starred in [X]", {"starred_actors"}, {}},
            {"q1_director", "who directed [X]", {"directed_by"}, {}},
            {"q1_writer", "who wrote [X]", {"written_by"}, {}},
            {"q2_shared_actor", "what movies share an actor with [X]",
             {"starred_actors", "starred_actors_inv"}, {}},
            {"q2_writer_movies", "what movies did the writer of [X] write",
             {"written_by", "written_by_inv"}, {}},
            {"q2_director_movies", "what movies did the director of [X] direct",
             {"directed_by", "directed_by_inv"}, {}},
        };
        out.push_back(spurious3_decoy[0]);
        out.push_back(spurious3_decoy[1]);
        out.push_back(spurious3_clean[0]);
        out.push_back(spurious3_clean[3]);
        return out;
    }
    throw ConfigError("unknown template set: " + name);
}

std::vector<RelationId> resolve_path(const KnowledgeBase& kb,
                                     const std::vector<std::string>& path) {
    std::vector<RelationId> out;
    for (const std::string& name : path) {
        const RelationId r = kb.relations().lookup(name);
        if (r < 0) throw DataError("unknown relation in path: " + name);
        out.push_back(r);
    }
    return out;
}

OracleResult oracle_answers(const KnowledgeBase& kb, EntityId topic,
                            const std::vector<RelationId>& path) {
    kb.check_entity(topic);
    OracleResult result;
    std::vector<EntityId> frontier = {topic};
    for (RelationId r : path) {
        const RelationId arriving = kb.inverse(r);
        std::set<EntityId> next;
        for (EntityId e : frontier) {
            // successors of e via r are the heads of incoming edges carrying
            // the inverse relation (both directions exist in the store)
            for (int32_t idx : kb.incoming_index(e)) {
                const Triple& t = kb.directed_edges()[static_cast<size_t>(idx)];
                if (t.relation == arriving) next.insert(t.head);
            }
        }
        frontier.assign(next.begin(), next.end());
        result.hops.push_back(frontier);
        if (frontier.empty()) break;
    }
    if (result.hops.size() == path.size()) result.answers = result.hops.back();
    return result;
}

namespace {

struct Builder {
    GenConfig cfg;
    Rng rng;
    std::vector<RawTriple> triples;
    std::set<RawTriple> triple_set;
    std::vector<std::string> movie_names;

    explicit Builder(const GenConfig& c) : cfg(c), rng(c.seed) {}

    bool add_triple(std::string h, std::string r, std::string t) {
        RawTriple triple = {std::move(h), std::move(r), std::move(t)};
        if (!triple_set.insert(triple).second) return false;
        triples.push_back(std::move(triple));
        return true;
    }

    std::vector<int64_t> distinct(int64_t k, int64_t pool) {
        std::set<int64_t> out;
        while (static_cast<int64_t>(out.size()) < k) {
            out.insert(rng.uniform_int(0, pool - 1));
        }
        return {out.begin(), out.end()};
    }

    void build_kb() {
        for (int64_t m = 0; m < cfg.movies; ++m) {
            const std::string movie = "movie_" + std::to_string(m);
            movie_names.push_back(movie);
            add_triple(movie, "directed_by",
                       "director_" + std::to_string(rng.uniform_int(0, cfg.directors - 1)));
            add_triple(movie, "written_by",
                       "writer_" + std::to_string(rng.uniform_int(0, cfg.writers - 1)));
            for (int64_t a : distinct(cfg.actors_per_movie, cfg.actors)) {
                add_triple(movie, "starred_actors", "actor_" + std::to_string(a));
            }
            for (int64_t g : distinct(cfg.genres_per_movie, cfg.genres)) {
                add_triple(movie, "has_genre", "genre_" + std::to_string(g));
            }
            add_triple(movie, "release_year",
                       "year_" + std::to_string(1950 + rng.uniform_int(0, cfg.years - 1)));
        }
    }
};

std::vector<std::string> entity_names(const KnowledgeBase& kb, const std::vector<EntityId>& ids) {
    std::vector<std::string> out;
    out.reserve(ids.size());
    for (EntityId e : ids) out.push_back(kb.entities().name(e));
    return out;
}

} // namespace

GeneratedData generate(const GenConfig& cfg) {
    cfg.validate();
    Builder b(cfg);
    b.build_kb();

    GeneratedData data;
    data.templates = template_set(cfg.template_set, cfg.spurious_fraction);

    // Instance selection runs against the pre-planting KB; answers are
    // recomputed on the final KB before emission.
    KnowledgeBase kb = KnowledgeBase::from_raw(b.triples);

    struct Instance {
        size_t template_idx;
        std::string topic; // entity name
    };
    std::vector<Instance> instances;

    for (size_t ti = 0; ti < data.templates.size(); ++ti) {
        const Template& tpl = data.templates[ti];
        const std::vector<RelationId> path = resolve_path(kb, tpl.path);

        std::vector<std::string> candidates;
        for (const std::string& movie : b.movie_names) {
            const EntityId topic = kb.entities().lookup(movie);
            const OracleResult res = oracle_answers(kb, topic, path);
            if (res.answers.empty()) continue;
            bool has_empty_hop = false;
            for (const auto& hop : res.hops) has_empty_hop = has_empty_hop || hop.empty();
            if (!has_empty_hop) candidates.push_back(movie);
        }
        if (candidates.empty()) {
            continue; // template with no valid instantiation: skip
        }
        b.rng.shuffle(candidates);
        const int64_t want = std::min<int64_t>(cfg.questions_per_template,
                                               static_cast<int64_t>(candidates.size()));
        for (int64_t i = 0; i < want; ++i) {
            instances.push_back({ti, candidates[static_cast<size_t>(i)]});
        }
    }

    // Plant decoys: for every spurious instance make sure the true path keeps
    // at least one answer the decoy cannot reach, by giving a movie reachable
    // only through the true branch a fresh final-hop edge.
    for (const Instance& inst : instances) {
        const Template& tpl = data.templates[inst.template_idx];
        if (!tpl.spurious()) continue;
        const EntityId topic = kb.entities().lookup(inst.topic);
        const OracleResult truth = oracle_answers(kb, topic, resolve_path(kb, tpl.path));
        const OracleResult decoy = oracle_answers(kb, topic, resolve_path(kb, tpl.decoy));
        if (decoy.answers.empty()) continue;
        std::vector<EntityId> exclusive;
        std::set_difference(truth.answers.begin(), truth.answers.end(), decoy.answers.begin(),
                            decoy.answers.end(), std::back_inserter(exclusive));
        if (!exclusive.empty()) continue;

        // Movies on the true branch but outside the decoy branch at hop 2.
        std::vector<EntityId> own;
        std::set_difference(truth.hops[1].begin(), truth.hops[1].end(), decoy.hops[1].begin(),
                            decoy.hops[1].end(), std::back_inserter(own));
        if (own.empty()) continue; // degenerate overlap; leave as-is

        const std::string& final_rel = tpl.path.back();
        const std::string tail_prefix = final_rel == "has_genre"       ? "genre_"
                                        : final_rel == "release_year"  ? "year_"
                                        : final_rel == "starred_actors" ? "actor_"
                                        : final_rel == "written_by"    ? "writer_"
                                                                        : "director_";
        std::set<std::string> blocked;
        for (EntityId e : decoy.answers) blocked.insert(kb.entities().name(e));
        const int64_t pool = final_rel == "has_genre"        ? cfg.genres
                             : final_rel == "release_year"   ? cfg.years
                             : final_rel == "starred_actors" ? cfg.actors
                             : final_rel == "written_by"     ? cfg.writers
                                                             : cfg.directors;
        std::string fresh;
        for (int64_t i = 0; i < pool; ++i) {
            std::string name = tail_prefix + std::to_string(final_rel == "release_year" ? 1950 + i : i);
            if (blocked.count(name) == 0) {
                fresh = std::move(name);
                break;
            }
        }
        if (fresh.empty()) continue; // every candidate tail is decoy-reachable
        if (b.add_triple(kb.entities().name(own.front()), final_rel, fresh)) {
            ++data.planted_triples;
        }
    }

    if (data.planted_triples > 0) kb = KnowledgeBase::from_raw(b.triples);

    // Emit questions with final-KB oracle outputs.
    std::vector<std::vector<Question>> per_template(data.templates.size());
    int64_t qid = 0;
    for (const Instance& inst : instances) {
        const Template& tpl = data.templates[inst.template_idx];
        const EntityId topic = kb.entities().lookup(inst.topic);
        const OracleResult res = oracle_answers(kb, topic, resolve_path(kb, tpl.path));
        if (res.answers.empty()) continue; // planting cannot empty a set, but stay safe

        Question q;
        q.id = "q" + std::to_string(qid++);
        std::string text = tpl.pattern;
        const size_t slot = text.find("[X]");
        text = text.substr(0, slot) + inst.topic + text.substr(slot + 3);
        std::istringstream toks(text);
        std::string tok;
        while (toks >> tok) q.tokens.push_back(tok);
        q.topic_entities = {topic};
        q.answers = res.answers;
        if (tpl.hops() > 1) {
            q.has_gold_intermediates = true;
            for (int h = 0; h + 1 < tpl.hops(); ++h) {
                q.gold_intermediates.push_back(res.hops[static_cast<size_t>(h)]);
            }
        }
        q.template_id = tpl.id;
        per_template[inst.template_idx].push_back(std::move(q));
    }

    for (auto& qs : per_template) {
        const int64_t n = static_cast<int64_t>(qs.size());
        for (int64_t i = 0; i < n; ++i) {
            if (i < cfg.split_train) {
                data.train.push_back(std::move(qs[static_cast<size_t>(i)]));
            } else if (i < cfg.split_train + cfg.split_dev) {
                data.dev.push_back(std::move(qs[static_cast<size_t>(i)]));
            } else if (i < cfg.split_train + cfg.split_dev + cfg.split_test) {
                data.test.push_back(std::move(qs[static_cast<size_t>(i)]));
            }
        }
    }

    // Decoy reach statistics over 3-hop test questions.
    for (const Question& q : data.test) {
        const Template* tpl = nullptr;
        for (const Template& t : data.templates) {
            if (t.id == q.template_id) tpl = &t;
        }
        if (tpl == nullptr || tpl->hops() != 3) continue;
        ++data.test3_total;
        if (!tpl->spurious()) continue;
        const OracleResult decoy =
            oracle_answers(kb, q.topic_entities[0], resolve_path(kb, tpl->decoy));
        std::vector<EntityId> overlap;
        std::set_intersection(decoy.answers.begin(), decoy.answers.end(), q.answers.begin(),
                              q.answers.end(), std::back_inserter(overlap));
        if (!overlap.empty()) ++data.test3_with_decoy_overlap;
    }

    data.kb = std::move(kb);
    return data;
}

void write_dataset(const GeneratedData& data, const std::string& dir) {
    save_triples(data.kb, dir + "/kb.tsv");
    save_questions(data.train, data.kb, dir + "/train.jsonl");
    save_questions(data.dev, data.kb, dir + "/dev.jsonl");
    save_questions(data.test, data.kb, dir + "/test.jsonl");

    ordered_json templates = ordered_json::array();
    for (const Template& t : data.templates) {
        ordered_json j;
        j["id"] = t.id;
        j["pattern"] = t.pattern;
        j["path"] = t.path;
        if (t.spurious()) j["decoy"] = t.decoy;
        j["hops"] = t.hops();
        templates.push_back(std::move(j));
    }
    std::ofstream out(dir + "/templates.json", std::ios::binary);
    if (!out) throw DataError("cannot write " + dir + "/templates.json");
    out << templates.dump(2) << "\n";
}

} // namespace kbqa::synth

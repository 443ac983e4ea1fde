#include "kbqa/retrieval.hpp"

#include <algorithm>
#include <deque>
#include <numeric>

#include "kbqa/errors.hpp"

namespace kbqa {

void PprConfig::validate() const {
    if (epsilon <= 0.0) throw ConfigError("ppr.epsilon must be > 0");
    if (alpha <= 0.0 || alpha >= 1.0) throw ConfigError("ppr.alpha must be in (0, 1)");
    if (top_m < 1) throw ConfigError("ppr.top_m must be >= 1");
    if (pre_hops < 0) throw ConfigError("ppr.pre_hops must be >= 0");
}

Subgraph restrict_khop(const KnowledgeBase& kb, const std::vector<EntityId>& topics, int64_t k) {
    if (topics.empty()) throw DataError("restrict_khop: no topic entities");
    if (k < 1) throw ConfigError("restrict_khop: hop radius must be >= 1");
    std::vector<int64_t> depth(static_cast<size_t>(kb.num_entities()), -1);
    std::deque<EntityId> frontier;
    for (EntityId e : topics) {
        kb.check_entity(e);
        if (depth[static_cast<size_t>(e)] < 0) {
            depth[static_cast<size_t>(e)] = 0;
            frontier.push_back(e);
        }
    }
    std::vector<EntityId> reached;
    while (!frontier.empty()) {
        const EntityId u = frontier.front();
        frontier.pop_front();
        reached.push_back(u);
        if (depth[static_cast<size_t>(u)] == k) continue;
        for (int32_t idx : kb.incoming_index(u)) {
            const EntityId v = kb.directed_edges()[static_cast<size_t>(idx)].head;
            if (depth[static_cast<size_t>(v)] < 0) {
                depth[static_cast<size_t>(v)] = depth[static_cast<size_t>(u)] + 1;
                frontier.push_back(v);
            }
        }
    }
    return induce_subgraph(kb, reached);
}

std::vector<double> ppr_scores(const Subgraph& graph, const std::vector<int32_t>& seeds,
                               const PprConfig& cfg) {
    cfg.validate();
    if (seeds.empty()) throw DataError("ppr_scores: no seeds");
    const int64_t n = graph.num_entities();
    std::vector<double> score(static_cast<size_t>(n), 0.0);
    std::vector<double> residual(static_cast<size_t>(n), 0.0);
    std::vector<bool> queued(static_cast<size_t>(n), false);
    std::deque<int32_t> queue;

    const double seed_mass = 1.0 / static_cast<double>(seeds.size());
    for (int32_t s : seeds) {
        if (s < 0 || s >= n) throw DataError("ppr_scores: seed outside graph");
        residual[static_cast<size_t>(s)] += seed_mass;
    }

    auto eligible = [&](int32_t u) {
        const double deg = static_cast<double>(graph.degree(u));
        return residual[static_cast<size_t>(u)] >= cfg.epsilon * deg;
    };
    for (int32_t s : seeds) {
        if (!queued[static_cast<size_t>(s)] && eligible(s)) {
            queued[static_cast<size_t>(s)] = true;
            queue.push_back(s);
        }
    }

    // Lazy push: half the non-teleported mass stays home, half spreads over
    // the out-edges. Dangling nodes absorb their residual outright.
    while (!queue.empty()) {
        const int32_t u = queue.front();
        queue.pop_front();
        queued[static_cast<size_t>(u)] = false;
        if (!eligible(u)) continue;
        const double ru = residual[static_cast<size_t>(u)];
        const int64_t deg = graph.degree(u);
        if (deg == 0) {
            score[static_cast<size_t>(u)] += ru;
            residual[static_cast<size_t>(u)] = 0.0;
            continue;
        }
        score[static_cast<size_t>(u)] += cfg.alpha * ru;
        residual[static_cast<size_t>(u)] = (1.0 - cfg.alpha) * ru * 0.5;
        const double push = (1.0 - cfg.alpha) * ru * 0.5 / static_cast<double>(deg);
        for (int32_t eidx : graph.outgoing(u)) {
            const int32_t v = graph.edges().dst[static_cast<size_t>(eidx)];
            residual[static_cast<size_t>(v)] += push;
            if (!queued[static_cast<size_t>(v)] && eligible(v)) {
                queued[static_cast<size_t>(v)] = true;
                queue.push_back(v);
            }
        }
        if (!queued[static_cast<size_t>(u)] && eligible(u)) {
            queued[static_cast<size_t>(u)] = true;
            queue.push_back(u);
        }
    }
    return score;
}

double CoverageReport::coverage_ratio() const {
    if (entries.empty()) return 0.0;
    int64_t covered = 0;
    for (const auto& e : entries) covered += e.answer_covered ? 1 : 0;
    return static_cast<double>(covered) / static_cast<double>(entries.size());
}

double CoverageReport::mean_entities() const {
    if (entries.empty()) return 0.0;
    int64_t total = 0;
    for (const auto& e : entries) total += e.num_entities;
    return static_cast<double>(total) / static_cast<double>(entries.size());
}

Subgraph build_question_subgraph(const KnowledgeBase& kb, const std::vector<EntityId>& topics,
                                 const std::vector<EntityId>& answers, const PprConfig& cfg,
                                 QuestionCoverage* coverage) {
    cfg.validate();
    if (topics.empty()) throw DataError("build_question_subgraph: no topic entities");

    Subgraph base;
    if (cfg.pre_hops > 0) {
        base = restrict_khop(kb, topics, cfg.pre_hops);
    } else {
        std::vector<EntityId> all(static_cast<size_t>(kb.num_entities()));
        std::iota(all.begin(), all.end(), 0);
        base = induce_subgraph(kb, all);
    }

    std::vector<int32_t> seeds;
    for (EntityId t : topics) {
        const int32_t local = base.to_local(t);
        if (local < 0) throw DataError("build_question_subgraph: topic entity left the graph");
        seeds.push_back(local);
    }
    const std::vector<double> scores = ppr_scores(base, seeds, cfg);

    std::vector<int32_t> order(static_cast<size_t>(base.num_entities()));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int32_t a, int32_t b) {
        if (scores[static_cast<size_t>(a)] != scores[static_cast<size_t>(b)]) {
            return scores[static_cast<size_t>(a)] > scores[static_cast<size_t>(b)];
        }
        return base.to_global(a) < base.to_global(b);
    });

    std::vector<EntityId> selected;
    std::vector<bool> taken(static_cast<size_t>(base.num_entities()), false);
    for (int32_t s : seeds) {
        if (!taken[static_cast<size_t>(s)]) {
            taken[static_cast<size_t>(s)] = true;
            selected.push_back(base.to_global(s));
        }
    }
    for (int32_t local : order) {
        if (static_cast<int64_t>(selected.size()) >= cfg.top_m) break;
        if (taken[static_cast<size_t>(local)]) continue;
        taken[static_cast<size_t>(local)] = true;
        selected.push_back(base.to_global(local));
    }

    Subgraph sub = induce_subgraph(kb, selected, /*add_self_loops=*/true);
    if (coverage != nullptr) {
        coverage->answer_covered = false;
        for (EntityId a : answers) {
            if (sub.to_local(a) >= 0) {
                coverage->answer_covered = true;
                break;
            }
        }
        coverage->num_entities = sub.num_entities();
    }
    return sub;
}

} // namespace kbqa

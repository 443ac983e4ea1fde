#include "kbqa/reports.hpp"

#include <algorithm>
#include <fstream>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "kbqa/config.hpp"
#include "kbqa/errors.hpp"

namespace kbqa::reports {

namespace {

using ordered_json = nlohmann::ordered_json;

// Doubles go through format_double -> string -> parse so the JSON layer never
// invents its own formatting.
double canonical(double v) { return std::strtod(format_double(v).c_str(), nullptr); }

ordered_json metrics_json(const std::string& split, const train::Metrics& m) {
    ordered_json j;
    j["split"] = split;
    j["questions"] = m.count;
    j["hits1"] = canonical(m.hits1);
    j["f1"] = canonical(m.f1);
    j["precision"] = canonical(m.precision);
    j["recall"] = canonical(m.recall);
    j["f1_threshold"] = canonical(m.threshold);
    return j;
}

ordered_json hop_json(const train::HopMetrics& h) {
    ordered_json j;
    j["hop"] = h.hop;
    j["precision"] = canonical(h.precision);
    j["recall"] = canonical(h.recall);
    j["f1"] = canonical(h.f1);
    j["questions"] = h.count;
    return j;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    return out;
}

} // namespace

void write_metrics(const std::string& path, const std::string& split,
                   const train::Metrics& metrics, const std::vector<train::HopMetrics>& per_hop) {
    ordered_json j = metrics_json(split, metrics);
    if (!per_hop.empty()) {
        ordered_json hops = ordered_json::array();
        for (const auto& h : per_hop) hops.push_back(hop_json(h));
        j["per_hop"] = std::move(hops);
    }
    auto out = open_out(path);
    out << j.dump(2) << "\n";
}

std::string metrics_table(
    const std::vector<std::pair<std::string, train::Metrics>>& rows,
    const std::vector<std::pair<std::string, std::vector<train::HopMetrics>>>& hop_rows) {
    std::ostringstream os;
    char line[160];
    std::snprintf(line, sizeof(line), "%-12s %10s %10s %10s %10s %6s\n", "split", "hits@1", "f1",
                  "precision", "recall", "n");
    os << line;
    for (const auto& [split, m] : rows) {
        std::snprintf(line, sizeof(line), "%-12s %10.4f %10.4f %10.4f %10.4f %6lld\n",
                      split.c_str(), m.hits1, m.f1, m.precision, m.recall,
                      static_cast<long long>(m.count));
        os << line;
    }
    for (const auto& [split, hops] : hop_rows) {
        for (const auto& h : hops) {
            std::snprintf(line, sizeof(line), "%-12s hop %d  P %.4f  R %.4f  F1 %.4f  (n=%lld)\n",
                          split.c_str(), h.hop, h.precision, h.recall, h.f1,
                          static_cast<long long>(h.count));
            os << line;
        }
    }
    return os.str();
}

void write_coverage(const std::string& entries_path, const std::string& summary_path,
                    const CoverageReport& report) {
    {
        auto out = open_out(entries_path);
        for (const auto& e : report.entries) {
            ordered_json j;
            j["id"] = e.question_id;
            j["answer_covered"] = e.answer_covered;
            j["entities"] = e.num_entities;
            out << j.dump() << "\n";
        }
    }
    ordered_json summary;
    summary["questions"] = report.entries.size();
    summary["coverage_ratio"] = canonical(report.coverage_ratio());
    summary["mean_entities"] = canonical(report.mean_entities());
    auto out = open_out(summary_path);
    out << summary.dump(2) << "\n";
}

void write_epoch_log(const std::string& path, const std::vector<train::EpochLog>& log) {
    auto out = open_out(path);
    for (const auto& e : log) {
        ordered_json j;
        j["epoch"] = e.epoch;
        j["loss"] = canonical(e.loss_total);
        j["loss_forward"] = canonical(e.loss_forward);
        j["loss_backward"] = canonical(e.loss_backward);
        j["loss_correspondence"] = canonical(e.loss_correspondence);
        j["loss_distill"] = canonical(e.loss_distill);
        if (e.evaluated) j["dev_hits1"] = canonical(e.dev_hits);
        out << j.dump() << "\n";
    }
}

namespace {

ordered_json entity_list(const ad::Tensor& dist, const PreparedQuestion& pq,
                         const KnowledgeBase& kb, double threshold) {
    std::vector<int32_t> locals;
    for (int64_t i = 0; i < dist.size(); ++i) {
        if (dist.at(i) >= threshold) locals.push_back(static_cast<int32_t>(i));
    }
    std::sort(locals.begin(), locals.end(), [&](int32_t a, int32_t b) {
        if (dist.at(a) != dist.at(b)) return dist.at(a) > dist.at(b);
        return pq.sub.to_global(a) < pq.sub.to_global(b);
    });
    ordered_json out = ordered_json::array();
    for (int32_t l : locals) {
        ordered_json e;
        e["entity"] = kb.entities().name(pq.sub.to_global(l));
        e["p"] = canonical(dist.at(l));
        out.push_back(std::move(e));
    }
    return out;
}

void dump_direction(std::ostream& out, const char* direction, const model::ReasoningTrace& trace,
                    const PreparedQuestion& pq, const KnowledgeBase& kb, double threshold) {
    for (size_t k = 0; k < trace.states.size(); ++k) {
        ordered_json j;
        j["direction"] = direction;
        j["step"] = trace.states[k].step;
        if (k > 0) {
            const ad::Tensor& att = trace.instructions[k - 1].attention.value();
            ordered_json weights = ordered_json::array();
            for (int64_t i = 0; i < att.size(); ++i) weights.push_back(canonical(att.at(i)));
            j["attention"] = std::move(weights);
        }
        j["entities"] = entity_list(trace.states[k].distribution.value(), pq, kb, threshold);
        out << j.dump() << "\n";
    }
}

} // namespace

void dump_trace(std::ostream& out, const model::Network& net, const model::TeacherTrace& trace,
                const PreparedQuestion& pq, const KnowledgeBase& kb, double threshold) {
    if (trace.forward.has_value()) {
        dump_direction(out, "forward", *trace.forward, pq, kb, threshold);
    }
    if (trace.backward.has_value()) {
        dump_direction(out, "backward", *trace.backward, pq, kb, threshold);
    }
    if (trace.forward.has_value() && trace.backward.has_value()) {
        const auto signals = model::supervision_signals(trace);
        for (size_t k = 0; k < signals.size(); ++k) {
            ordered_json j;
            j["direction"] = "supervision";
            j["step"] = static_cast<int64_t>(k + 1);
            j["entities"] = entity_list(signals[k], pq, kb, threshold);
            out << j.dump() << "\n";
        }
    }
    (void)net;
}

void save_supervision(const std::string& path, const std::vector<PreparedQuestion>& prepared,
                      const std::vector<std::vector<ad::Tensor>>& signals,
                      const KnowledgeBase& kb) {
    auto out = open_out(path);
    for (size_t i = 0; i < prepared.size(); ++i) {
        const PreparedQuestion& pq = prepared[i];
        for (size_t k = 0; k < signals[i].size(); ++k) {
            const ad::Tensor& dist = signals[i][k];
            ordered_json p = ordered_json::object();
            for (int64_t e = 0; e < dist.size(); ++e) {
                if (dist.at(e) > 0.0) {
                    p[kb.entities().name(pq.sub.to_global(static_cast<int32_t>(e)))] =
                        canonical(dist.at(e));
                }
            }
            ordered_json j;
            j["id"] = pq.question->id;
            j["k"] = static_cast<int64_t>(k + 1);
            j["p"] = std::move(p);
            out << j.dump() << "\n";
        }
    }
}

std::vector<std::vector<ad::Tensor>> load_supervision(const std::string& path,
                                                      const std::vector<PreparedQuestion>& prepared,
                                                      const KnowledgeBase& kb, int64_t steps) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open supervision file: " + path);
    std::unordered_map<std::string, size_t> by_id;
    for (size_t i = 0; i < prepared.size(); ++i) by_id[prepared[i].question->id] = i;

    std::vector<std::vector<ad::Tensor>> out(prepared.size());
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
        const std::string id = j.at("id").get<std::string>();
        const int64_t k = j.at("k").get<int64_t>();
        auto it = by_id.find(id);
        if (it == by_id.end()) continue; // signal for a question outside this split
        if (k < 1 || k > steps - 1) {
            throw DataError(path + ":" + std::to_string(lineno) + ": step " + std::to_string(k) +
                            " outside 1.." + std::to_string(steps - 1));
        }
        const PreparedQuestion& pq = prepared[it->second];
        auto& slots = out[it->second];
        if (slots.empty()) slots.resize(static_cast<size_t>(steps - 1));
        ad::Tensor dist({pq.sub.num_entities()});
        for (const auto& [name, value] : j.at("p").items()) {
            const EntityId global = kb.entities().lookup(name);
            const int32_t local = global < 0 ? -1 : pq.sub.to_local(global);
            if (local < 0) {
                throw DataError(path + ":" + std::to_string(lineno) + ": entity '" + name +
                                "' not in the question subgraph");
            }
            dist.at(local) = value.get<double>();
        }
        slots[static_cast<size_t>(k - 1)] = std::move(dist);
    }
    return out;
}

} // namespace kbqa::reports

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "kbqa/dataset.hpp"
#include "kbqa/network.hpp"
#include "kbqa/retrieval.hpp"
#include "kbqa/train.hpp"

namespace kbqa::reports {

// All record files are line-delimited JSON (or single JSON documents) with
// fixed key order and round-trip float formatting, so reruns with identical
// inputs produce byte-identical bytes.

void write_metrics(const std::string& path, const std::string& split,
                   const train::Metrics& metrics, const std::vector<train::HopMetrics>& per_hop);

std::string metrics_table(const std::vector<std::pair<std::string, train::Metrics>>& rows,
                          const std::vector<std::pair<std::string, std::vector<train::HopMetrics>>>&
                              hop_rows);

void write_coverage(const std::string& entries_path, const std::string& summary_path,
                    const CoverageReport& report);

void write_epoch_log(const std::string& path, const std::vector<train::EpochLog>& log);

// Per-step trace records for one question. Teacher traces dump both
// directions plus the averaged supervision signal.
void dump_trace(std::ostream& out, const model::Network& net, const model::TeacherTrace& trace,
                const PreparedQuestion& pq, const KnowledgeBase& kb, double threshold);

// Supervision signal exchange format: one record per (question, step) with a
// sparse name->probability map. Probabilities round-trip exactly.
void save_supervision(const std::string& path, const std::vector<PreparedQuestion>& prepared,
                      const std::vector<std::vector<ad::Tensor>>& signals,
                      const KnowledgeBase& kb);
std::vector<std::vector<ad::Tensor>> load_supervision(const std::string& path,
                                                      const std::vector<PreparedQuestion>& prepared,
                                                      const KnowledgeBase& kb, int64_t steps);

} // namespace kbqa::reports

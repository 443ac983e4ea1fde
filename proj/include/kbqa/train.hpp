#pragma once

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "kbqa/checkpoint.hpp"
#include "kbqa/config.hpp"
#include "kbqa/dataset.hpp"
#include "kbqa/network.hpp"
#include "kbqa/params.hpp"

namespace kbqa::train {

struct TrainConfig {
    model::ModelConfig model;
    PprConfig ppr;
    int64_t batch_size = 40;
    ad::AdamConfig adam;
    int64_t max_epochs = 100;
    int64_t eval_every = 5;
    int64_t patience = 5;
    uint64_t seed = 1;
    double lambda_student = 0.05;
    double lambda_backward = 0.1;
    double lambda_correspondence = 0.01;
    ad::KlOrder kl_order = ad::KlOrder::target_weighted;
    double kl_smoothing = 1e-8;
    model::NetworkKind network_kind = model::NetworkKind::student;
    bool distill = false;
    int64_t workers = 2;
    double f1_threshold = -1.0; // < 0: tune on dev
    double intermediate_threshold = 0.01;

    // Resolves train.teacher_arch / train.ablation into a network kind.
    // Teacher mode rejects the student-only ablation; student mode disables
    // distillation under it.
    static TrainConfig from(const Config& cfg, bool teacher_mode);
};

struct EpochLog {
    int64_t epoch = 0;
    double loss_total = 0.0;
    double loss_forward = 0.0;
    double loss_backward = 0.0;
    double loss_correspondence = 0.0;
    double loss_distill = 0.0;
    bool evaluated = false;
    double dev_hits = 0.0;
};

struct HopMetrics {
    int hop = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    int64_t count = 0;
};

struct Metrics {
    double hits1 = 0.0;
    double f1 = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    int64_t count = 0;
    double threshold = 0.0;
};

struct TrainResult {
    Checkpoint checkpoint;
    std::vector<EpochLog> log;
    double best_dev_hits = 0.0;
    int64_t best_epoch = 0;
    int64_t skipped_questions = 0; // train questions without answers in their subgraph
    CoverageReport train_coverage;
    CoverageReport dev_coverage;
};

// Teacher pre-training: minimizes L_t = L_f + lambda_b L_b + lambda_c L_c by
// mini-batch Adam, early-stops on dev Hits@1 and retains the best epoch.
TrainResult train_teacher(const Dataset& data, const Config& cfg, std::ostream* progress);

// Student training: L_s = L_1 + lambda L_2 with supervision signals from the
// frozen teacher (recomputed here unless `supervision` is provided). A null
// teacher trains the plain reasoner.
TrainResult train_student(const Dataset& data, const Checkpoint* teacher, const Config& cfg,
                          std::ostream* progress,
                          const std::vector<std::vector<ad::Tensor>>* supervision = nullptr);

// A checkpointed network reconstructed against a dataset's KB.
struct Runtime {
    Vocab vocab;
    std::unique_ptr<model::Network> net;
    TrainConfig cfg;
    Config raw_config;

    Runtime() : raw_config(Config::defaults()) {}
};
Runtime runtime_from_checkpoint(const Checkpoint& ckpt, const KnowledgeBase& kb);

Checkpoint make_checkpoint(const model::Network& net, const Config& cfg, const Vocab& vocab,
                           const KnowledgeBase& kb);

// ---- evaluation --------------------------------------------------------------

// Final answer distribution per question, inference mode. Backward-only
// networks answer with their backward distribution (scored against topics).
std::vector<ad::Tensor> final_distributions(const model::Network& net,
                                            const std::vector<PreparedQuestion>& prepared,
                                            int64_t workers);

// Intermediate signals per question: p^(k) for single-direction networks,
// p_t^(k) for bidirectional teachers; k = 1..n-1.
std::vector<std::vector<ad::Tensor>> intermediate_signals(
    const model::Network& net, const std::vector<PreparedQuestion>& prepared, int64_t workers);

double hits_at_1(const model::Network& net, const std::vector<PreparedQuestion>& prepared,
                 int64_t workers);

Metrics metrics_from_finals(const model::Network& net,
                            const std::vector<PreparedQuestion>& prepared,
                            const std::vector<ad::Tensor>& finals, double threshold);

Metrics evaluate(const model::Network& net, const std::vector<PreparedQuestion>& prepared,
                 double f1_threshold, int64_t workers);

// Dev-tuned F1 threshold over the fixed grid; ties keep the smaller value.
double tune_f1_threshold(const model::Network& net, const std::vector<PreparedQuestion>& dev,
                         int64_t workers);

// Per-hop precision/recall/F1 of intermediate signals at `threshold`,
// restricted to questions whose gold path length matches the model's steps.
// Raises DataError when no question carries gold intermediates.
std::vector<HopMetrics> evaluate_intermediate(const model::Network& net,
                                              const std::vector<PreparedQuestion>& prepared,
                                              double threshold, int64_t workers);

// Exactly one train question per template, chosen deterministically by seed.
std::vector<Question> one_shot_subsample(const std::vector<Question>& questions, uint64_t seed);

// Bitwise check of the hybrid junction identities; throws NumericError.
void verify_hybrid_tying(const model::TeacherTrace& trace);

} // namespace kbqa::train

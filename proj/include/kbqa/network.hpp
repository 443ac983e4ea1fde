#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "kbqa/model.hpp"

namespace kbqa::model {

// Network kinds. A student is a single forward reasoner; the unidirectional
// teacher ablations are structurally identical but keep their own tag so
// checkpoints stay self-describing. Parallel teachers hold two disjoint
// reasoners; hybrid teachers run one reasoner in both directions with shared
// instructions and a cycled junction.
enum class NetworkKind {
    student,
    teacher_forward_only,
    teacher_backward_only,
    teacher_parallel,
    teacher_hybrid,
};

std::string to_string(NetworkKind kind);
NetworkKind network_kind_from_string(const std::string& s);

struct TeacherTrace {
    NetworkKind kind = NetworkKind::student;
    std::optional<ReasoningTrace> forward;
    std::optional<ReasoningTrace> backward;

    int steps() const;
};

// Averaged intermediate supervision signal p_t^(k), k = 1..n-1. Bidirectional
// traces average p_f^(k) and p_b^(n-k); unidirectional traces pass through
// the one they have.
std::vector<ad::Tensor> supervision_signals(const TeacherTrace& trace);

struct TeacherLoss {
    ad::Var total;
    double forward_value = 0.0;
    double backward_value = 0.0;
    double correspondence_value = 0.0;
};

class Network {
public:
    Network(NetworkKind kind, ModelConfig cfg, int64_t vocab_size, int64_t num_relations,
            Rng& rng);

    NetworkKind kind() const { return kind_; }
    const ModelConfig& config() const { return mcfg_; }
    ad::Parameters& params() { return params_; }
    const ad::Parameters& params() const { return params_; }

    bool has_forward() const { return kind_ != NetworkKind::teacher_backward_only; }
    bool has_backward() const {
        return kind_ == NetworkKind::teacher_backward_only ||
               kind_ == NetworkKind::teacher_parallel || kind_ == NetworkKind::teacher_hybrid;
    }

    struct Binding {
        NsmModel::Binding primary;
        NsmModel::Binding secondary; // parallel only: the backward reasoner
    };
    Binding bind(ad::Tape& tape, std::vector<ad::Tensor>* grads) const;

    // Runs the network on one question. `topic_dist` seeds forward reasoning;
    // `answer_dist` seeds backward reasoning (parallel/backward-only) and may
    // be empty when no backward pass exists. Both are local-id distributions.
    TeacherTrace run(const Binding& b, const std::vector<int32_t>& token_ids, const Subgraph& sub,
                     const ad::Tensor& topic_dist, const ad::Tensor& answer_dist) const;

    // Runs only the direction that produces the answer distribution; cheaper
    // for evaluation of bidirectional teachers.
    TeacherTrace run_answer_direction(const Binding& b, const std::vector<int32_t>& token_ids,
                                      const Subgraph& sub, const ad::Tensor& topic_dist,
                                      const ad::Tensor& answer_dist) const;

    // L_t = L_f + lambda_b L_b + lambda_c L_c over the available directions.
    // Unidirectional variants contribute their single reasoning loss with
    // weight 1.
    TeacherLoss teacher_loss(const TeacherTrace& trace, const ad::Tensor& target_forward,
                             const ad::Tensor& target_backward, double lambda_b, double lambda_c,
                             ad::KlOrder order, double eps) const;

    // The distribution that answers the question at evaluation time:
    // p_f^(n) for forward-capable networks, p_b^(n) for backward-only.
    const ad::Var& answer_distribution(const TeacherTrace& trace) const;

private:
    NetworkKind kind_;
    ModelConfig mcfg_;
    ad::Parameters params_;
    std::unique_ptr<NsmModel> primary_;   // every kind
    std::unique_ptr<NsmModel> secondary_; // parallel backward reasoner
};

} // namespace kbqa::model

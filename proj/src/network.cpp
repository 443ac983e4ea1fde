#include "kbqa/network.hpp"

#include <algorithm>

#include "kbqa/errors.hpp"

namespace kbqa::model {

using ad::Tape;
using ad::Tensor;
using ad::Var;

std::string to_string(NetworkKind kind) {
    switch (kind) {
        case NetworkKind::student: return "student";
        case NetworkKind::teacher_forward_only: return "teacher-forward-only";
        case NetworkKind::teacher_backward_only: return "teacher-backward-only";
        case NetworkKind::teacher_parallel: return "teacher-parallel";
        case NetworkKind::teacher_hybrid: return "teacher-hybrid";
    }
    throw NumericError("bad network kind");
}

NetworkKind network_kind_from_string(const std::string& s) {
    for (NetworkKind k :
         {NetworkKind::student, NetworkKind::teacher_forward_only,
          NetworkKind::teacher_backward_only, NetworkKind::teacher_parallel,
          NetworkKind::teacher_hybrid}) {
        if (to_string(k) == s) return k;
    }
    throw ConfigError("unknown network kind: " + s);
}

int TeacherTrace::steps() const {
    const ReasoningTrace& t = forward.has_value() ? *forward : *backward;
    return static_cast<int>(t.states.size()) - 1;
}

std::vector<Tensor> supervision_signals(const TeacherTrace& trace) {
    const int n = trace.steps();
    std::vector<Tensor> signals;
    for (int k = 1; k <= n - 1; ++k) {
        if (trace.forward.has_value() && trace.backward.has_value()) {
            const Tensor& pf = trace.forward->states[static_cast<size_t>(k)].distribution.value();
            const Tensor& pb =
                trace.backward->states[static_cast<size_t>(n - k)].distribution.value();
            Tensor avg(pf.shape());
            for (int64_t i = 0; i < pf.size(); ++i) avg.at(i) = 0.5 * (pf.at(i) + pb.at(i));
            signals.push_back(std::move(avg));
        } else if (trace.forward.has_value()) {
            signals.push_back(trace.forward->states[static_cast<size_t>(k)].distribution.value());
        } else {
            signals.push_back(
                trace.backward->states[static_cast<size_t>(n - k)].distribution.value());
        }
    }
    return signals;
}

Network::Network(NetworkKind kind, ModelConfig cfg, int64_t vocab_size, int64_t num_relations,
                 Rng& rng)
    : kind_(kind), mcfg_(cfg) {
    if (kind_ == NetworkKind::teacher_parallel) {
        primary_ = std::make_unique<NsmModel>(params_, "fwd.", cfg, vocab_size, num_relations, rng);
        secondary_ =
            std::make_unique<NsmModel>(params_, "bwd.", cfg, vocab_size, num_relations, rng);
    } else {
        // Single reasoner; the empty prefix keeps init draws identical across
        // student, unidirectional and hybrid variants under one seed.
        primary_ = std::make_unique<NsmModel>(params_, "", cfg, vocab_size, num_relations, rng);
    }
}

Network::Binding Network::bind(Tape& tape, std::vector<Tensor>* grads) const {
    Binding b;
    b.primary = primary_->bind(tape, grads);
    if (secondary_) b.secondary = secondary_->bind(tape, grads);
    return b;
}

TeacherTrace Network::run(const Binding& b, const std::vector<int32_t>& token_ids,
                          const Subgraph& sub, const Tensor& topic_dist,
                          const Tensor& answer_dist) const {
    TeacherTrace trace;
    trace.kind = kind_;
    Tape& tape = *b.primary.tape;

    switch (kind_) {
        case NetworkKind::student:
        case NetworkKind::teacher_forward_only: {
            trace.forward = primary_->forward(b.primary, token_ids, sub, tape.constant(topic_dist));
            break;
        }
        case NetworkKind::teacher_backward_only: {
            if (answer_dist.empty()) throw DataError("backward reasoning needs answer entities");
            trace.backward =
                primary_->forward(b.primary, token_ids, sub, tape.constant(answer_dist));
            break;
        }
        case NetworkKind::teacher_parallel: {
            if (answer_dist.empty()) throw DataError("backward reasoning needs answer entities");
            trace.forward = primary_->forward(b.primary, token_ids, sub, tape.constant(topic_dist));
            trace.backward =
                secondary_->forward(b.secondary, token_ids, sub, tape.constant(answer_dist));
            break;
        }
        case NetworkKind::teacher_hybrid: {
            ReasoningTrace fwd =
                primary_->forward(b.primary, token_ids, sub, tape.constant(topic_dist));
            // Cycled junction: backward starts from the forward finals and
            // consumes the forward instructions in reverse order. Gradients
            // flow through the junction (same tape nodes, no detach).
            std::vector<InstructionState> reversed(fwd.instructions.rbegin(),
                                                   fwd.instructions.rend());
            ReasoningState initial{0, fwd.states.back().embeddings,
                                   fwd.states.back().distribution};
            trace.backward =
                primary_->forward_with(b.primary, fwd.encoded, reversed, initial, sub);
            trace.forward = std::move(fwd);
            break;
        }
    }
    return trace;
}

TeacherTrace Network::run_answer_direction(const Binding& b, const std::vector<int32_t>& token_ids,
                                           const Subgraph& sub, const Tensor& topic_dist,
                                           const Tensor& answer_dist) const {
    TeacherTrace trace;
    trace.kind = kind_;
    Tape& tape = *b.primary.tape;
    if (kind_ == NetworkKind::teacher_backward_only) {
        if (answer_dist.empty()) throw DataError("backward reasoning needs answer entities");
        trace.backward = primary_->forward(b.primary, token_ids, sub, tape.constant(answer_dist));
    } else {
        trace.forward = primary_->forward(b.primary, token_ids, sub, tape.constant(topic_dist));
    }
    return trace;
}

TeacherLoss Network::teacher_loss(const TeacherTrace& trace, const Tensor& target_forward,
                                  const Tensor& target_backward, double lambda_b, double lambda_c,
                                  ad::KlOrder order, double eps) const {
    Tape& tape = *(trace.forward.has_value() ? trace.forward->final_distribution().tape
                                             : trace.backward->final_distribution().tape);
    TeacherLoss out;
    std::optional<Var> total;
    auto accumulate = [&](Var term, double weight) {
        Var weighted = weight == 1.0 ? term : ad::scale(term, weight);
        total = total.has_value() ? ad::add(*total, weighted) : weighted;
    };

    if (trace.forward.has_value()) {
        Var lf = ad::kl_div(trace.forward->final_distribution(),
                            tape.constant(target_forward), order, eps);
        out.forward_value = lf.value().item();
        accumulate(lf, 1.0);
    }
    if (trace.backward.has_value()) {
        Var lb = ad::kl_div(trace.backward->final_distribution(),
                            tape.constant(target_backward), order, eps);
        out.backward_value = lb.value().item();
        const bool unidirectional = !trace.forward.has_value();
        accumulate(lb, unidirectional ? 1.0 : lambda_b);
    }
    if (trace.forward.has_value() && trace.backward.has_value() && lambda_c != 0.0) {
        const int n = trace.steps();
        std::optional<Var> lc;
        for (int k = 1; k <= n - 1; ++k) {
            Var term = ad::js_div(trace.forward->states[static_cast<size_t>(k)].distribution,
                                  trace.backward->states[static_cast<size_t>(n - k)].distribution,
                                  eps);
            lc = lc.has_value() ? ad::add(*lc, term) : term;
        }
        if (lc.has_value()) {
            out.correspondence_value = lc->value().item();
            accumulate(*lc, lambda_c);
        }
    }
    out.total = *total;
    return out;
}

const Var& Network::answer_distribution(const TeacherTrace& trace) const {
    if (trace.forward.has_value()) return trace.forward->final_distribution();
    return trace.backward->final_distribution();
}

} // namespace kbqa::model

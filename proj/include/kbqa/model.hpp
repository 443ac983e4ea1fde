#pragma once

#include <string>
#include <vector>

#include "kbqa/kb.hpp"
#include "kbqa/params.hpp"
#include "kbqa/rng.hpp"
#include "kbqa/tape.hpp"

namespace kbqa::model {

struct ModelConfig {
    int64_t dim = 100;        // hidden / embedding dimension d
    int64_t steps = 3;        // reasoning steps n
    double init_scale = 0.1;  // uniform bound for embedding tables
};

struct EncodedQuestion {
    ad::Var hidden;  // l x d
    ad::Var summary; // d, last hidden state
};

struct InstructionState {
    int step = 0;        // k, 1-based
    ad::Var instruction; // i^(k), d
    ad::Var query;       // q^(k), d
    ad::Var attention;   // alpha^(k), length l
};

struct ReasoningState {
    int step = 0;          // k, 0-based
    ad::Var embeddings;    // E^(k), |entities| x d
    ad::Var distribution;  // p^(k), |entities|
};

struct ReasoningTrace {
    EncodedQuestion encoded;
    std::vector<InstructionState> instructions; // k = 1..n
    std::vector<ReasoningState> states;         // k = 0..n

    const ad::Var& final_distribution() const { return states.back().distribution; }
};

// One reasoning network: sequence encoder, instruction component, graph
// reasoning component. Parameters are registered into a shared store under
// `prefix`, so several networks (e.g. the two directions of a parallel
// teacher) can coexist without collisions.
class NsmModel {
public:
    NsmModel(ad::Parameters& params, std::string prefix, ModelConfig cfg, int64_t vocab_size,
             int64_t num_relations, Rng& rng);

    const ModelConfig& config() const { return cfg_; }

    // Leaf vars for this model's parameters, one tape at a time. A null grad
    // buffer binds constants (inference mode).
    struct Binding {
        ad::Tape* tape = nullptr;
        std::vector<ad::Var> vars; // indexed by parameter store index
        const ad::Var& at(int idx) const { return vars[static_cast<size_t>(idx)]; }
    };
    Binding bind(ad::Tape& tape, std::vector<ad::Tensor>* grads) const;

    EncodedQuestion encode_question(const Binding& b, const std::vector<int32_t>& token_ids) const;

    // q^(k) = [i^(k-1); q] W_k + b_k; scores_j = (W_a (q^(k) o h_j) + b_a) . w_s;
    // alpha = softmax(scores); i^(k) = sum_j alpha_j h_j.
    InstructionState instruction_step(const Binding& b, const EncodedQuestion& enc,
                                      ad::Var prev_instruction, int step) const;

    // e^(0) = sigmoid(sum over incoming edges of r W_T), rows over local entities.
    ad::Var init_entity_embeddings(const Binding& b, const Subgraph& sub) const;

    // Relation match rows for one step: sigmoid(i^(k) o (R_local W_R)).
    ad::Var relation_transform(const Binding& b, const Subgraph& sub) const; // R_local W_R, cached per tape by caller
    ad::Var local_relation_rows(const Binding& b, const Subgraph& sub) const; // R_local

    ReasoningState reasoning_step(const Binding& b, const InstructionState& inst,
                                  const ReasoningState& prev, const Subgraph& sub,
                                  ad::Var rel_transformed) const;

    // Full n-step rollout from an initial distribution p0 (local ids).
    ReasoningTrace forward(const Binding& b, const std::vector<int32_t>& token_ids,
                           const Subgraph& sub, ad::Var p0) const;

    // Rollout that consumes externally supplied instructions and initial
    // state; used by the hybrid teacher's backward pass.
    ReasoningTrace forward_with(const Binding& b, EncodedQuestion enc,
                                const std::vector<InstructionState>& instructions,
                                ReasoningState initial, const Subgraph& sub) const;

private:
    ad::Var zero_instruction(ad::Tape& tape) const;

    ModelConfig cfg_;
    std::string prefix_;
    std::vector<int> param_ids_; // all parameter indices owned by this model
    ad::Parameters* params_;

    int word_emb_, rel_emb_;
    struct LstmGate {
        int w, u, b;
    };
    LstmGate gi_, gf_, go_, gg_;
    std::vector<int> instr_w_, instr_b_; // per step k = 1..n
    int attn_w_, attn_b_, attn_s_;
    int wt_, wr_;
    int ffn_w_, ffn_b_;
    int dist_w_;
};

// Frequency-normalized distribution over local entities: each listed entity
// gets 1/k mass. Duplicates are ignored.
ad::Tensor ground_truth_distribution(const std::vector<int32_t>& locals, int64_t num_entities);

} // namespace kbqa::model

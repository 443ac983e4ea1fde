#include "kbqa/model.hpp"

#include <cmath>

#include "kbqa/errors.hpp"

namespace kbqa::model {

using ad::Tape;
using ad::Tensor;
using ad::Var;

namespace {

// Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) for weight matrices.
Tensor weight_init(Rng& rng, int64_t fan_in, std::vector<int64_t> shape) {
    return ad::uniform_init(rng, std::move(shape), 1.0 / std::sqrt(static_cast<double>(fan_in)));
}

} // namespace

NsmModel::NsmModel(ad::Parameters& params, std::string prefix, ModelConfig cfg, int64_t vocab_size,
                   int64_t num_relations, Rng& rng)
    : cfg_(cfg), prefix_(std::move(prefix)), params_(&params) {
    const int64_t d = cfg_.dim;
    if (d < 1) throw ConfigError("model.dim must be >= 1");
    if (cfg_.steps < 1) throw ConfigError("model.steps must be >= 1");

    auto reg = [&](const std::string& name, Tensor init) {
        const int idx = params.add(prefix_ + name, std::move(init));
        param_ids_.push_back(idx);
        return idx;
    };

    word_emb_ = reg("word_emb", ad::uniform_init(rng, {vocab_size, d}, cfg_.init_scale));
    rel_emb_ = reg("rel_emb", ad::uniform_init(rng, {num_relations, d}, cfg_.init_scale));

    auto gate = [&](const char* g) {
        LstmGate out;
        out.w = reg(std::string("lstm.W") + g, weight_init(rng, d, {d, d}));
        out.u = reg(std::string("lstm.U") + g, weight_init(rng, d, {d, d}));
        out.b = reg(std::string("lstm.b") + g, Tensor({d}));
        return out;
    };
    gi_ = gate("i");
    gf_ = gate("f");
    go_ = gate("o");
    gg_ = gate("g");

    for (int64_t k = 1; k <= cfg_.steps; ++k) {
        instr_w_.push_back(
            reg("instr.W" + std::to_string(k), weight_init(rng, 2 * d, {2 * d, d})));
        instr_b_.push_back(reg("instr.b" + std::to_string(k), Tensor({d})));
    }
    attn_w_ = reg("instr.Wa", weight_init(rng, d, {d, d}));
    attn_b_ = reg("instr.ba", Tensor({d}));
    attn_s_ = reg("instr.ws", weight_init(rng, d, {d}));

    wt_ = reg("reason.Wt", weight_init(rng, d, {d, d}));
    wr_ = reg("reason.Wr", weight_init(rng, d, {d, d}));
    ffn_w_ = reg("reason.ffn.W", weight_init(rng, 2 * d, {2 * d, d}));
    ffn_b_ = reg("reason.ffn.b", Tensor({d}));
    dist_w_ = reg("reason.w", weight_init(rng, d, {d}));
}

NsmModel::Binding NsmModel::bind(Tape& tape, std::vector<Tensor>* grads) const {
    Binding b;
    b.tape = &tape;
    b.vars.resize(static_cast<size_t>(params_->count()));
    for (int idx : param_ids_) {
        Tensor* sink = grads == nullptr ? nullptr : &(*grads)[static_cast<size_t>(idx)];
        b.vars[static_cast<size_t>(idx)] = tape.leaf(params_->value(idx), sink);
    }
    return b;
}

EncodedQuestion NsmModel::encode_question(const Binding& b,
                                          const std::vector<int32_t>& token_ids) const {
    if (token_ids.empty()) throw DataError("encode_question: empty token list");
    Tape& tape = *b.tape;
    const int64_t d = cfg_.dim;

    const Var X = ad::embedding_rows(b.at(word_emb_), token_ids);
    Var h = tape.constant(Tensor({d}));
    Var c = tape.constant(Tensor({d}));
    std::vector<Var> hs;
    hs.reserve(token_ids.size());
    for (size_t t = 0; t < token_ids.size(); ++t) {
        const Var x = ad::row(X, static_cast<int64_t>(t));
        auto gate = [&](const LstmGate& g) {
            return ad::add(ad::add(ad::matmul(x, b.at(g.w)), ad::matmul(h, b.at(g.u))),
                           b.at(g.b));
        };
        const Var ig = ad::sigmoid(gate(gi_));
        const Var fg = ad::sigmoid(gate(gf_));
        const Var og = ad::sigmoid(gate(go_));
        const Var gg = ad::tanh(gate(gg_));
        c = ad::add(ad::mul(fg, c), ad::mul(ig, gg));
        h = ad::mul(og, ad::tanh(c));
        hs.push_back(h);
    }
    return EncodedQuestion{ad::stack_rows(hs), hs.back()};
}

InstructionState NsmModel::instruction_step(const Binding& b, const EncodedQuestion& enc,
                                            Var prev_instruction, int step) const {
    if (step < 1 || step > static_cast<int>(cfg_.steps)) {
        throw NumericError("instruction_step: step " + std::to_string(step) + " out of range");
    }
    const size_t k = static_cast<size_t>(step - 1);
    const Var cat = ad::concat(prev_instruction, enc.summary);
    const Var query = ad::add(ad::matmul(cat, b.at(instr_w_[k])), b.at(instr_b_[k]));
    const Var gated = ad::rowwise_mul(enc.hidden, query);
    const Var proj = ad::rowwise_add(ad::matmul(gated, b.at(attn_w_)), b.at(attn_b_));
    const Var scores = ad::matmul(proj, b.at(attn_s_));
    const Var attention = ad::softmax(scores);
    const Var instruction = ad::matmul(attention, enc.hidden);
    return InstructionState{step, instruction, query, attention};
}

Var NsmModel::local_relation_rows(const Binding& b, const Subgraph& sub) const {
    std::vector<int32_t> ids;
    ids.reserve(static_cast<size_t>(sub.num_relations()));
    for (int64_t r = 0; r < sub.num_relations(); ++r) {
        ids.push_back(sub.rel_to_global(static_cast<int32_t>(r)));
    }
    return ad::embedding_rows(b.at(rel_emb_), ids);
}

Var NsmModel::init_entity_embeddings(const Binding& b, const Subgraph& sub) const {
    const Var rel_rows = local_relation_rows(b, sub);
    const Var transformed = ad::matmul(rel_rows, b.at(wt_));
    return ad::sigmoid(ad::edge_scatter(transformed, sub.edges(), sub.num_entities()));
}

Var NsmModel::relation_transform(const Binding& b, const Subgraph& sub) const {
    return ad::matmul(local_relation_rows(b, sub), b.at(wr_));
}

ReasoningState NsmModel::reasoning_step(const Binding& b, const InstructionState& inst,
                                        const ReasoningState& prev, const Subgraph& sub,
                                        Var rel_transformed) const {
    const Var match = ad::sigmoid(ad::rowwise_mul(rel_transformed, inst.instruction));
    const Var aggregated =
        ad::edge_scatter_weighted(prev.distribution, match, sub.edges(), sub.num_entities());
    const Var cat = ad::concat(prev.embeddings, aggregated);
    const Var updated = ad::relu(ad::rowwise_add(ad::matmul(cat, b.at(ffn_w_)), b.at(ffn_b_)));
    const Var scores = ad::matmul(updated, b.at(dist_w_));
    const Var dist = ad::softmax(scores);
    return ReasoningState{prev.step + 1, updated, dist};
}

ReasoningTrace NsmModel::forward(const Binding& b, const std::vector<int32_t>& token_ids,
                                 const Subgraph& sub, Var p0) const {
    ReasoningTrace trace;
    trace.encoded = encode_question(b, token_ids);
    ReasoningState state{0, init_entity_embeddings(b, sub), p0};
    trace.states.push_back(state);
    const Var rel_transformed = relation_transform(b, sub);
    Var instruction = zero_instruction(*b.tape);
    for (int k = 1; k <= static_cast<int>(cfg_.steps); ++k) {
        InstructionState inst = instruction_step(b, trace.encoded, instruction, k);
        instruction = inst.instruction;
        state = reasoning_step(b, inst, state, sub, rel_transformed);
        trace.instructions.push_back(std::move(inst));
        trace.states.push_back(state);
    }
    return trace;
}

ReasoningTrace NsmModel::forward_with(const Binding& b, EncodedQuestion enc,
                                      const std::vector<InstructionState>& instructions,
                                      ReasoningState initial, const Subgraph& sub) const {
    if (static_cast<int64_t>(instructions.size()) != cfg_.steps) {
        throw NumericError("forward_with: expected " + std::to_string(cfg_.steps) +
                           " instructions, got " + std::to_string(instructions.size()));
    }
    ReasoningTrace trace;
    trace.encoded = std::move(enc);
    trace.instructions = instructions;
    initial.step = 0;
    trace.states.push_back(initial);
    const Var rel_transformed = relation_transform(b, sub);
    ReasoningState state = trace.states[0];
    for (int k = 1; k <= static_cast<int>(cfg_.steps); ++k) {
        state = reasoning_step(b, trace.instructions[static_cast<size_t>(k - 1)], state, sub,
                               rel_transformed);
        trace.states.push_back(state);
    }
    return trace;
}

Var NsmModel::zero_instruction(Tape& tape) const { return tape.constant(Tensor({cfg_.dim})); }

Tensor ground_truth_distribution(const std::vector<int32_t>& locals, int64_t num_entities) {
    Tensor p({num_entities});
    std::vector<bool> seen(static_cast<size_t>(num_entities), false);
    int64_t count = 0;
    for (int32_t e : locals) {
        if (e < 0 || e >= num_entities) {
            throw NumericError("ground_truth_distribution: entity out of range");
        }
        if (!seen[static_cast<size_t>(e)]) {
            seen[static_cast<size_t>(e)] = true;
            ++count;
        }
    }
    if (count == 0) throw NumericError("ground_truth_distribution: no entities");
    const double mass = 1.0 / static_cast<double>(count);
    for (int64_t i = 0; i < num_entities; ++i) {
        if (seen[static_cast<size_t>(i)]) p.at(i) = mass;
    }
    return p;
}

} // namespace kbqa::model

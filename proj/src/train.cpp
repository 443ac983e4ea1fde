#include "kbqa/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <map>
#include <mutex>
#include <ostream>
#include <thread>

#include "kbqa/errors.hpp"
#include "kbqa/rng.hpp"

namespace kbqa::train {

using ad::Tensor;
using ad::Var;
using model::Network;
using model::NetworkKind;
using model::TeacherTrace;

namespace {

constexpr double kF1Grid[] = {0.001, 0.005, 0.01, 0.05, 0.1, 0.3, 0.5};

int64_t resolve_workers(int64_t requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int64_t>(hw);
}

// Static round-robin assignment: item i runs on worker i % W, each worker
// walks its items in increasing order. Output slots keep results
// deterministic regardless of scheduling.
void parallel_for(int64_t n, int64_t workers, const std::function<void(int64_t)>& fn) {
    if (n <= 0) return;
    const int64_t w = std::min<int64_t>(std::max<int64_t>(workers, 1), n);
    if (w == 1) {
        for (int64_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::mutex err_mutex;
    std::exception_ptr first_error;
    std::vector<std::thread> threads;
    threads.reserve(static_cast<size_t>(w));
    for (int64_t t = 0; t < w; ++t) {
        threads.emplace_back([&, t]() {
            try {
                for (int64_t i = t; i < n; i += w) fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (auto& th : threads) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

// Gold entities a network's answer distribution is scored against.
const std::vector<EntityId>& gold_globals(const Network& net, const PreparedQuestion& pq) {
    if (net.kind() == NetworkKind::teacher_backward_only) return pq.question->topic_entities;
    return pq.question->answers;
}

int32_t argmax_lowest_id(const Tensor& dist) {
    int32_t best = 0;
    for (int64_t i = 1; i < dist.size(); ++i) {
        if (dist.at(i) > dist.at(best)) best = static_cast<int32_t>(i);
    }
    return best; // local ids ascend with global ids, so first max = lowest id
}

struct PrfRow {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

PrfRow prf(const std::vector<EntityId>& predicted, const std::vector<EntityId>& gold) {
    PrfRow row;
    if (gold.empty()) return row;
    int64_t inter = 0;
    for (EntityId p : predicted) {
        if (std::binary_search(gold.begin(), gold.end(), p)) ++inter;
    }
    row.precision = predicted.empty()
                        ? 0.0
                        : static_cast<double>(inter) / static_cast<double>(predicted.size());
    row.recall = static_cast<double>(inter) / static_cast<double>(gold.size());
    row.f1 = (row.precision + row.recall) > 0.0
                 ? 2.0 * row.precision * row.recall / (row.precision + row.recall)
                 : 0.0;
    return row;
}

std::vector<EntityId> thresholded_globals(const Tensor& dist, const Subgraph& sub,
                                          double threshold) {
    std::vector<EntityId> out;
    for (int64_t i = 0; i < dist.size(); ++i) {
        if (dist.at(i) >= threshold) out.push_back(sub.to_global(static_cast<int32_t>(i)));
    }
    return out; // sorted: local order follows global order
}

// Aggregation order is canonical (question id ascending), so metrics are
// invariant under permutations of the dataset file.
std::vector<size_t> canonical_order(const std::vector<PreparedQuestion>& prepared) {
    std::vector<size_t> order(prepared.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        return prepared[a].question->id < prepared[b].question->id;
    });
    return order;
}

} // namespace

TrainConfig TrainConfig::from(const Config& cfg, bool teacher_mode) {
    TrainConfig tc;
    tc.model.dim = cfg.get_int("model.dim");
    tc.model.steps = cfg.get_int("model.steps");
    tc.model.init_scale = cfg.get_float("model.init_scale");
    tc.ppr.epsilon = cfg.get_float("ppr.epsilon");
    tc.ppr.alpha = cfg.get_float("ppr.alpha");
    tc.ppr.top_m = cfg.get_int("ppr.top_m");
    tc.ppr.pre_hops = cfg.get_int("ppr.pre_hops");
    tc.ppr.validate();
    tc.batch_size = cfg.get_int("train.batch_size");
    if (tc.batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
    tc.adam.learning_rate = cfg.get_float("train.learning_rate");
    tc.adam.beta1 = cfg.get_float("train.adam_beta1");
    tc.adam.beta2 = cfg.get_float("train.adam_beta2");
    tc.adam.epsilon = cfg.get_float("train.adam_epsilon");
    tc.max_epochs = cfg.get_int("train.max_epochs");
    tc.eval_every = std::max<int64_t>(1, cfg.get_int("train.eval_every"));
    tc.patience = std::max<int64_t>(1, cfg.get_int("train.patience"));
    tc.seed = static_cast<uint64_t>(cfg.get_int("train.seed"));
    tc.lambda_student = cfg.get_float("train.lambda");
    tc.lambda_backward = cfg.get_float("train.lambda_backward");
    tc.lambda_correspondence = cfg.get_float("train.lambda_correspondence");
    if (tc.lambda_student < 0 || tc.lambda_backward < 0 || tc.lambda_correspondence < 0) {
        throw ConfigError("loss weights must be >= 0");
    }
    tc.kl_order = cfg.get_string("train.kl_order") == "paper_literal"
                      ? ad::KlOrder::paper_literal
                      : ad::KlOrder::target_weighted;
    tc.kl_smoothing = cfg.get_float("train.kl_smoothing");
    tc.workers = resolve_workers(cfg.get_int("train.workers"));
    tc.f1_threshold = cfg.get_float("eval.f1_threshold");
    tc.intermediate_threshold = cfg.get_float("eval.intermediate_threshold");

    const std::string& ablation = cfg.get_string("train.ablation");
    const std::string& arch = cfg.get_string("train.teacher_arch");
    if (teacher_mode) {
        if (ablation == "student-only") {
            throw ConfigError("train-teacher does not accept the student-only ablation");
        }
        if (ablation == "forward-only") {
            tc.network_kind = NetworkKind::teacher_forward_only;
        } else if (ablation == "backward-only") {
            tc.network_kind = NetworkKind::teacher_backward_only;
        } else {
            tc.network_kind = arch == "parallel" ? NetworkKind::teacher_parallel
                                                 : NetworkKind::teacher_hybrid;
            if (ablation == "no-correspondence") tc.lambda_correspondence = 0.0;
        }
    } else {
        tc.network_kind = NetworkKind::student;
        tc.distill = ablation != "student-only";
    }
    return tc;
}

void verify_hybrid_tying(const TeacherTrace& trace) {
    if (!trace.forward.has_value() || !trace.backward.has_value()) {
        throw NumericError("hybrid tying check needs both directions");
    }
    const int n = trace.steps();
    auto expect_same = [](const Tensor& a, const Tensor& b, const char* what) {
        if (!a.same_shape(b) ||
            std::memcmp(a.data(), b.data(), static_cast<size_t>(a.size()) * sizeof(double)) != 0) {
            throw NumericError(std::string("hybrid tying violated: ") + what);
        }
    };
    expect_same(trace.backward->states[0].distribution.value(),
                trace.forward->states[static_cast<size_t>(n)].distribution.value(),
                "p_b(0) != p_f(n)");
    expect_same(trace.backward->states[0].embeddings.value(),
                trace.forward->states[static_cast<size_t>(n)].embeddings.value(),
                "E_b(0) != E_f(n)");
    for (int k = 1; k <= n; ++k) {
        expect_same(trace.backward->instructions[static_cast<size_t>(k - 1)].instruction.value(),
                    trace.forward->instructions[static_cast<size_t>(n - k)].instruction.value(),
                    "i_b(k) != i_f(n+1-k)");
    }
}

namespace {

struct FitOutput {
    std::vector<EpochLog> log;
    double best_dev_hits = -1.0;
    int64_t best_epoch = 0;
    int64_t skipped = 0;
};

FitOutput fit(Network& net, const TrainConfig& cfg, const std::vector<PreparedQuestion>& train_set,
              const std::vector<PreparedQuestion>& dev_set, Rng& rng,
              const std::vector<std::vector<Tensor>>* supervision, std::ostream* progress) {
    const bool is_student = net.kind() == NetworkKind::student;
    FitOutput out;

    std::vector<int64_t> trainable;
    for (size_t i = 0; i < train_set.size(); ++i) {
        if (train_set[i].trainable) trainable.push_back(static_cast<int64_t>(i));
    }
    out.skipped = static_cast<int64_t>(train_set.size() - trainable.size());
    if (out.skipped > 0 && progress != nullptr) {
        *progress << "warning: skipping " << out.skipped
                  << " train questions with no answer in their subgraph\n";
    }
    if (trainable.empty()) throw DataError("no trainable questions in the train split");

    const int64_t workers = resolve_workers(cfg.workers);
    std::vector<std::vector<Tensor>> grad_bufs;
    for (int64_t w = 0; w < workers; ++w) grad_bufs.push_back(net.params().make_grad_buffer());
    ad::AdamState adam(net.params(), cfg.adam);

    std::vector<Tensor> best_values;
    int64_t evals_since_best = 0;
    bool stop = false;

    for (int64_t epoch = 1; epoch <= cfg.max_epochs && !stop; ++epoch) {
        rng.shuffle(trainable);
        EpochLog log_entry;
        log_entry.epoch = epoch;
        int64_t seen = 0;

        for (size_t start = 0; start < trainable.size(); start += static_cast<size_t>(cfg.batch_size)) {
            const size_t end = std::min(trainable.size(), start + static_cast<size_t>(cfg.batch_size));
            const int64_t members = static_cast<int64_t>(end - start);
            for (auto& buf : grad_bufs) {
                for (Tensor& g : buf) g.fill(0.0);
            }
            std::vector<double> loss_total(static_cast<size_t>(members), 0.0);
            std::vector<double> loss_f(static_cast<size_t>(members), 0.0);
            std::vector<double> loss_b(static_cast<size_t>(members), 0.0);
            std::vector<double> loss_c(static_cast<size_t>(members), 0.0);
            std::vector<double> loss_d(static_cast<size_t>(members), 0.0);

            parallel_for(members, workers, [&](int64_t m) {
                const PreparedQuestion& pq =
                    train_set[static_cast<size_t>(trainable[start + static_cast<size_t>(m)])];
                ad::Tape tape;
                auto binding = net.bind(tape, &grad_bufs[static_cast<size_t>(m % workers)]);
                TeacherTrace trace =
                    net.run(binding, pq.tokens, pq.sub, pq.topic_dist, pq.answer_dist);
                Var loss;
                if (is_student) {
                    Var l1 = ad::kl_div(trace.forward->final_distribution(),
                                        tape.constant(pq.answer_dist), cfg.kl_order,
                                        cfg.kl_smoothing);
                    loss_f[static_cast<size_t>(m)] = l1.value().item();
                    loss = l1;
                    if (supervision != nullptr && cfg.lambda_student != 0.0) {
                        const auto& signals =
                            (*supervision)[static_cast<size_t>(trainable[start + static_cast<size_t>(m)])];
                        Var l2;
                        for (size_t k = 0; k < signals.size(); ++k) {
                            Var term = ad::kl_div(
                                trace.forward->states[k + 1].distribution,
                                tape.constant(signals[k]), cfg.kl_order, cfg.kl_smoothing);
                            l2 = l2.valid() ? ad::add(l2, term) : term;
                        }
                        if (l2.valid()) {
                            loss_d[static_cast<size_t>(m)] = l2.value().item();
                            loss = ad::add(loss, ad::scale(l2, cfg.lambda_student));
                        }
                    }
                } else {
                    model::TeacherLoss tl = net.teacher_loss(
                        trace, pq.answer_dist, pq.topic_dist, cfg.lambda_backward,
                        cfg.lambda_correspondence, cfg.kl_order, cfg.kl_smoothing);
                    loss = tl.total;
                    loss_f[static_cast<size_t>(m)] = tl.forward_value;
                    loss_b[static_cast<size_t>(m)] = tl.backward_value;
                    loss_c[static_cast<size_t>(m)] = tl.correspondence_value;
                }
                loss_total[static_cast<size_t>(m)] = loss.value().item();
                tape.backward(loss, 1.0 / static_cast<double>(members));
            });

            for (int64_t m = 0; m < members; ++m) {
                if (!std::isfinite(loss_total[static_cast<size_t>(m)])) {
                    const PreparedQuestion& pq =
                        train_set[static_cast<size_t>(trainable[start + static_cast<size_t>(m)])];
                    throw NumericError("non-finite loss at epoch " + std::to_string(epoch) +
                                       ", question " + pq.question->id);
                }
                log_entry.loss_total += loss_total[static_cast<size_t>(m)];
                log_entry.loss_forward += loss_f[static_cast<size_t>(m)];
                log_entry.loss_backward += loss_b[static_cast<size_t>(m)];
                log_entry.loss_correspondence += loss_c[static_cast<size_t>(m)];
                log_entry.loss_distill += loss_d[static_cast<size_t>(m)];
            }
            seen += members;

            for (int64_t w = 1; w < workers; ++w) {
                for (size_t p = 0; p < grad_bufs[0].size(); ++p) {
                    Tensor& dst = grad_bufs[0][p];
                    const Tensor& src = grad_bufs[static_cast<size_t>(w)][p];
                    for (int64_t i = 0; i < dst.size(); ++i) dst.at(i) += src.at(i);
                }
            }
            adam.step(net.params(), grad_bufs[0]);
        }

        log_entry.loss_total /= static_cast<double>(seen);
        log_entry.loss_forward /= static_cast<double>(seen);
        log_entry.loss_backward /= static_cast<double>(seen);
        log_entry.loss_correspondence /= static_cast<double>(seen);
        log_entry.loss_distill /= static_cast<double>(seen);

        if (net.kind() == NetworkKind::teacher_hybrid) {
            const PreparedQuestion& pq = train_set[static_cast<size_t>(trainable[0])];
            ad::Tape tape;
            auto binding = net.bind(tape, nullptr);
            verify_hybrid_tying(net.run(binding, pq.tokens, pq.sub, pq.topic_dist, pq.answer_dist));
        }

        if (epoch % cfg.eval_every == 0 || epoch == cfg.max_epochs) {
            log_entry.evaluated = true;
            log_entry.dev_hits = hits_at_1(net, dev_set, workers);
            if (log_entry.dev_hits > out.best_dev_hits) {
                out.best_dev_hits = log_entry.dev_hits;
                out.best_epoch = epoch;
                best_values.clear();
                for (int p = 0; p < net.params().count(); ++p) {
                    best_values.push_back(net.params().value(p));
                }
                evals_since_best = 0;
            } else if (++evals_since_best >= cfg.patience) {
                stop = true;
            }
        }
        if (progress != nullptr) {
            *progress << "epoch " << epoch << " loss " << log_entry.loss_total;
            if (log_entry.evaluated) *progress << " dev_hits " << log_entry.dev_hits;
            *progress << "\n";
        }
        out.log.push_back(log_entry);
    }

    if (!best_values.empty()) {
        for (int p = 0; p < net.params().count(); ++p) {
            net.params().value(p) = best_values[static_cast<size_t>(p)];
        }
    }
    return out;
}

std::vector<std::vector<Tensor>> teacher_supervision(const Network& teacher,
                                                     const std::vector<PreparedQuestion>& prepared,
                                                     int64_t workers) {
    std::vector<std::vector<Tensor>> out(prepared.size());
    parallel_for(static_cast<int64_t>(prepared.size()), workers, [&](int64_t i) {
        const PreparedQuestion& pq = prepared[static_cast<size_t>(i)];
        if (!pq.trainable && teacher.has_backward()) return; // backward pass needs answers
        ad::Tape tape;
        auto binding = teacher.bind(tape, nullptr);
        TeacherTrace trace = teacher.run(binding, pq.tokens, pq.sub, pq.topic_dist, pq.answer_dist);
        out[static_cast<size_t>(i)] = model::supervision_signals(trace);
    });
    return out;
}

} // namespace

TrainResult train_teacher(const Dataset& data, const Config& cfg, std::ostream* progress) {
    const TrainConfig tc = TrainConfig::from(cfg, /*teacher_mode=*/true);
    Rng rng(tc.seed);
    const Vocab vocab = Vocab::build({&data.train, &data.dev, &data.test});
    Network net(tc.network_kind, tc.model, vocab.size(), data.kb.num_relations(), rng);

    TrainResult result;
    const auto train_prepared =
        prepare_questions(data.kb, data.train, vocab, tc.ppr, &result.train_coverage);
    const auto dev_prepared =
        prepare_questions(data.kb, data.dev, vocab, tc.ppr, &result.dev_coverage);

    FitOutput fo = fit(net, tc, train_prepared, dev_prepared, rng, nullptr, progress);
    result.log = std::move(fo.log);
    result.best_dev_hits = fo.best_dev_hits;
    result.best_epoch = fo.best_epoch;
    result.skipped_questions = fo.skipped;
    result.checkpoint = make_checkpoint(net, cfg, vocab, data.kb);
    return result;
}

TrainResult train_student(const Dataset& data, const Checkpoint* teacher, const Config& cfg,
                          std::ostream* progress,
                          const std::vector<std::vector<Tensor>>* supervision) {
    const TrainConfig tc = TrainConfig::from(cfg, /*teacher_mode=*/false);
    Rng rng(tc.seed);
    const Vocab vocab = Vocab::build({&data.train, &data.dev, &data.test});
    Network net(NetworkKind::student, tc.model, vocab.size(), data.kb.num_relations(), rng);

    TrainResult result;
    const auto train_prepared =
        prepare_questions(data.kb, data.train, vocab, tc.ppr, &result.train_coverage);
    const auto dev_prepared =
        prepare_questions(data.kb, data.dev, vocab, tc.ppr, &result.dev_coverage);

    std::vector<std::vector<Tensor>> computed;
    const std::vector<std::vector<Tensor>>* signals = nullptr;
    if (tc.distill && teacher != nullptr) {
        Runtime truntime = runtime_from_checkpoint(*teacher, data.kb);
        if (truntime.cfg.model.steps != tc.model.steps) {
            throw ConfigError("teacher was trained with " +
                              std::to_string(truntime.cfg.model.steps) +
                              " reasoning steps, student configured for " +
                              std::to_string(tc.model.steps));
        }
        if (supervision != nullptr) {
            signals = supervision;
        } else {
            computed = teacher_supervision(*truntime.net, train_prepared, tc.workers);
            signals = &computed;
        }
    } else if (tc.distill && teacher == nullptr) {
        throw ConfigError("student distillation requires a teacher checkpoint "
                          "(or the student-only ablation)");
    }

    FitOutput fo = fit(net, tc, train_prepared, dev_prepared, rng, signals, progress);
    result.log = std::move(fo.log);
    result.best_dev_hits = fo.best_dev_hits;
    result.best_epoch = fo.best_epoch;
    result.skipped_questions = fo.skipped;
    result.checkpoint = make_checkpoint(net, cfg, vocab, data.kb);
    return result;
}

Checkpoint make_checkpoint(const Network& net, const Config& cfg, const Vocab& vocab,
                           const KnowledgeBase& kb) {
    Checkpoint ckpt;
    ckpt.kind = model::to_string(net.kind());
    ckpt.config_snapshot = cfg.snapshot();
    ckpt.vocab = vocab.words();
    ckpt.relations = kb.relations().names();
    for (int p = 0; p < net.params().count(); ++p) {
        ckpt.param_names.push_back(net.params().name(p));
        ckpt.param_values.push_back(net.params().value(p));
    }
    return ckpt;
}

Runtime runtime_from_checkpoint(const Checkpoint& ckpt, const KnowledgeBase& kb) {
    Runtime rt;
    rt.raw_config = Config::from_text(ckpt.config_snapshot);
    const NetworkKind kind = model::network_kind_from_string(ckpt.kind);
    rt.cfg = TrainConfig::from(rt.raw_config, kind != NetworkKind::student);
    rt.cfg.network_kind = kind;
    rt.vocab = Vocab::from_words(ckpt.vocab);

    if (ckpt.relations != kb.relations().names()) {
        throw ConfigError("checkpoint relations do not match this knowledge base");
    }

    Rng dummy(0);
    rt.net = std::make_unique<Network>(kind, rt.cfg.model, rt.vocab.size(), kb.num_relations(),
                                       dummy);
    ad::Parameters& params = rt.net->params();
    if (static_cast<size_t>(params.count()) != ckpt.param_names.size()) {
        throw DataError("checkpoint parameter count mismatch");
    }
    for (size_t i = 0; i < ckpt.param_names.size(); ++i) {
        const int idx = params.index_of(ckpt.param_names[i]);
        if (idx < 0) throw DataError("checkpoint has unknown parameter " + ckpt.param_names[i]);
        if (!params.value(idx).same_shape(ckpt.param_values[i])) {
            throw DataError("checkpoint parameter " + ckpt.param_names[i] + " has shape " +
                            ckpt.param_values[i].shape_str() + ", expected " +
                            params.value(idx).shape_str());
        }
        params.value(idx) = ckpt.param_values[i];
    }
    return rt;
}

std::vector<Tensor> final_distributions(const Network& net,
                                        const std::vector<PreparedQuestion>& prepared,
                                        int64_t workers) {
    std::vector<Tensor> out(prepared.size());
    const bool needs_answers = net.kind() == NetworkKind::teacher_backward_only;
    parallel_for(static_cast<int64_t>(prepared.size()), resolve_workers(workers), [&](int64_t i) {
        const PreparedQuestion& pq = prepared[static_cast<size_t>(i)];
        if (needs_answers && pq.answer_dist.empty()) return; // cannot run; counted as miss
        ad::Tape tape;
        auto binding = net.bind(tape, nullptr);
        TeacherTrace trace =
            net.run_answer_direction(binding, pq.tokens, pq.sub, pq.topic_dist, pq.answer_dist);
        out[static_cast<size_t>(i)] = net.answer_distribution(trace).value();
    });
    return out;
}

std::vector<std::vector<Tensor>> intermediate_signals(const Network& net,
                                                      const std::vector<PreparedQuestion>& prepared,
                                                      int64_t workers) {
    std::vector<std::vector<Tensor>> out(prepared.size());
    parallel_for(static_cast<int64_t>(prepared.size()), resolve_workers(workers), [&](int64_t i) {
        const PreparedQuestion& pq = prepared[static_cast<size_t>(i)];
        if (net.has_backward() && pq.answer_dist.empty()) return;
        ad::Tape tape;
        auto binding = net.bind(tape, nullptr);
        TeacherTrace trace = net.run(binding, pq.tokens, pq.sub, pq.topic_dist, pq.answer_dist);
        out[static_cast<size_t>(i)] = model::supervision_signals(trace);
    });
    return out;
}

Metrics metrics_from_finals(const Network& net, const std::vector<PreparedQuestion>& prepared,
                            const std::vector<Tensor>& finals, double threshold) {
    Metrics m;
    m.threshold = threshold;
    for (size_t i : canonical_order(prepared)) {
        const PreparedQuestion& pq = prepared[i];
        const Tensor& dist = finals[i];
        m.count += 1;
        if (dist.empty()) continue; // no candidates: counted as a miss
        const std::vector<EntityId>& gold = gold_globals(net, pq);
        const EntityId top = pq.sub.to_global(argmax_lowest_id(dist));
        if (std::binary_search(gold.begin(), gold.end(), top)) m.hits1 += 1.0;
        const PrfRow row = prf(thresholded_globals(dist, pq.sub, threshold), gold);
        m.precision += row.precision;
        m.recall += row.recall;
        m.f1 += row.f1;
    }
    if (m.count > 0) {
        const double n = static_cast<double>(m.count);
        m.hits1 /= n;
        m.precision /= n;
        m.recall /= n;
        m.f1 /= n;
    }
    return m;
}

double hits_at_1(const Network& net, const std::vector<PreparedQuestion>& prepared,
                 int64_t workers) {
    const std::vector<Tensor> finals = final_distributions(net, prepared, workers);
    double hits = 0.0;
    int64_t count = 0;
    for (size_t i = 0; i < prepared.size(); ++i) {
        ++count;
        if (finals[i].empty()) continue;
        const std::vector<EntityId>& gold = gold_globals(net, prepared[i]);
        const EntityId top = prepared[i].sub.to_global(argmax_lowest_id(finals[i]));
        if (std::binary_search(gold.begin(), gold.end(), top)) hits += 1.0;
    }
    return count == 0 ? 0.0 : hits / static_cast<double>(count);
}

Metrics evaluate(const Network& net, const std::vector<PreparedQuestion>& prepared,
                 double f1_threshold, int64_t workers) {
    return metrics_from_finals(net, prepared, final_distributions(net, prepared, workers),
                               f1_threshold);
}

double tune_f1_threshold(const Network& net, const std::vector<PreparedQuestion>& dev,
                         int64_t workers) {
    const std::vector<Tensor> finals = final_distributions(net, dev, workers);
    double best_threshold = kF1Grid[0];
    double best_f1 = -1.0;
    for (double threshold : kF1Grid) {
        const Metrics m = metrics_from_finals(net, dev, finals, threshold);
        if (m.f1 > best_f1) {
            best_f1 = m.f1;
            best_threshold = threshold;
        }
    }
    return best_threshold;
}

std::vector<HopMetrics> evaluate_intermediate(const Network& net,
                                              const std::vector<PreparedQuestion>& prepared,
                                              double threshold, int64_t workers) {
    const int64_t steps = net.config().steps;
    bool any_gold = false;
    for (const PreparedQuestion& pq : prepared) {
        any_gold = any_gold || pq.question->has_gold_intermediates;
    }
    if (!any_gold) {
        throw DataError("dataset carries no gold intermediate entities; "
                        "intermediate evaluation unsupported");
    }
    const auto signals = intermediate_signals(net, prepared, workers);
    std::vector<HopMetrics> hops(static_cast<size_t>(steps - 1));
    for (size_t h = 0; h < hops.size(); ++h) hops[h].hop = static_cast<int>(h + 1);

    for (size_t i : canonical_order(prepared)) {
        const PreparedQuestion& pq = prepared[i];
        if (!pq.question->has_gold_intermediates) continue;
        if (static_cast<int64_t>(pq.question->gold_intermediates.size()) != steps - 1) continue;
        if (signals[i].empty()) continue;
        for (size_t h = 0; h < hops.size(); ++h) {
            const PrfRow row = prf(thresholded_globals(signals[i][h], pq.sub, threshold),
                                   pq.question->gold_intermediates[h]);
            hops[h].precision += row.precision;
            hops[h].recall += row.recall;
            hops[h].f1 += row.f1;
            hops[h].count += 1;
        }
    }
    for (auto& hop : hops) {
        if (hop.count > 0) {
            const double n = static_cast<double>(hop.count);
            hop.precision /= n;
            hop.recall /= n;
            hop.f1 /= n;
        }
    }
    return hops;
}

std::vector<Question> one_shot_subsample(const std::vector<Question>& questions, uint64_t seed) {
    std::map<std::string, std::vector<size_t>> groups;
    for (size_t i = 0; i < questions.size(); ++i) {
        if (questions[i].template_id.empty()) {
            throw DataError("question " + questions[i].id +
                            " has no template id; one-shot subsampling unsupported");
        }
        groups[questions[i].template_id].push_back(i);
    }
    Rng rng(seed);
    std::vector<Question> out;
    for (const auto& [tpl, members] : groups) {
        const size_t pick =
            static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(members.size()) - 1));
        out.push_back(questions[members[pick]]);
    }
    return out;
}

} // namespace kbqa::train

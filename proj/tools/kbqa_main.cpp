// kbqa: synthetic-KB multi-hop question answering engine.
//
// Subcommands: gen-data, train-teacher, train-student, eval, trace,
// export-supervision. Every command is deterministic given (config, seed,
// data); record files are byte-stable across reruns.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "kbqa/checkpoint.hpp"
#include "kbqa/config.hpp"
#include "kbqa/dataset.hpp"
#include "kbqa/errors.hpp"
#include "kbqa/reports.hpp"
#include "kbqa/synth.hpp"
#include "kbqa/train.hpp"

namespace fs = std::filesystem;
using namespace kbqa;
using ordered_json = nlohmann::ordered_json;

namespace {

struct CommonOpts {
    std::string config_path;
    std::vector<std::string> sets;
    int64_t seed = -1;
};

Config load_config(const CommonOpts& opts) {
    Config cfg = opts.config_path.empty() ? Config::defaults() : Config::load(opts.config_path);
    if (const char* env = std::getenv("KBQA_SEED")) {
        cfg.set("train.seed", env);
        cfg.set("gen.seed", env);
    }
    if (const char* env = std::getenv("KBQA_WORKERS")) {
        cfg.set("train.workers", env);
    }
    for (const std::string& kv : opts.sets) {
        const size_t eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
        cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (opts.seed >= 0) {
        cfg.set("train.seed", std::to_string(opts.seed));
        cfg.set("gen.seed", std::to_string(opts.seed));
    }
    return cfg;
}

void add_common(CLI::App* cmd, CommonOpts& opts, bool config_required = false) {
    auto* c = cmd->add_option("--config", opts.config_path, "configuration file (key = value)");
    if (config_required) c->required();
    cmd->add_option("--set", opts.sets, "override a config key (key=value, repeatable)");
    cmd->add_option("--seed", opts.seed, "override train.seed and gen.seed");
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << text;
}

// Run directories are append-only: every file is written exactly once.
void prepare_run_dir(const std::string& run_dir, const Config& cfg) {
    fs::create_directories(run_dir);
    fs::create_directories(run_dir + "/checkpoints");
    write_text(run_dir + "/config.snapshot", cfg.snapshot());
}

void write_train_outputs(const std::string& run_dir, const Config& cfg,
                         const train::TrainResult& result) {
    reports::write_epoch_log(run_dir + "/log.jsonl", result.log);
    reports::write_coverage(run_dir + "/coverage_train.jsonl",
                            run_dir + "/coverage_train_summary.json", result.train_coverage);
    reports::write_coverage(run_dir + "/coverage_dev.jsonl",
                            run_dir + "/coverage_dev_summary.json", result.dev_coverage);

    const std::string ckpt_rel = "checkpoints/ckpt-" + cfg.hash_hex() + "-e" +
                                 std::to_string(result.best_epoch) + ".bin";
    save_checkpoint(result.checkpoint, run_dir + "/" + ckpt_rel);
    save_checkpoint(result.checkpoint, run_dir + "/best.ckpt");

    ordered_json j;
    j["kind"] = result.checkpoint.kind;
    j["best_epoch"] = result.best_epoch;
    j["best_dev_hits1"] = std::strtod(format_double(result.best_dev_hits).c_str(), nullptr);
    j["skipped_train_questions"] = result.skipped_questions;
    j["checkpoint"] = ckpt_rel;
    write_text(run_dir + "/result.json", j.dump(2) + "\n");
}

int cmd_gen_data(const CommonOpts& common, const std::string& out_dir, bool force) {
    const Config cfg = load_config(common);
    if (fs::exists(out_dir) && !fs::is_empty(out_dir) && !force) {
        throw ConfigError("output directory " + out_dir + " is not empty (use --force)");
    }
    fs::create_directories(out_dir);
    const synth::GenConfig gen_cfg = synth::GenConfig::from(cfg);
    const synth::GeneratedData data = synth::generate(gen_cfg);
    synth::write_dataset(data, out_dir);

    ordered_json manifest;
    manifest["seed"] = static_cast<int64_t>(gen_cfg.seed);
    manifest["template_set"] = gen_cfg.template_set;
    manifest["entities"] = data.kb.num_entities();
    manifest["raw_triples"] = data.kb.num_raw_triples();
    manifest["directed_edges"] = data.kb.num_directed_edges();
    manifest["questions"] = {{"train", data.train.size()},
                             {"dev", data.dev.size()},
                             {"test", data.test.size()}};
    manifest["planted_triples"] = data.planted_triples;
    ordered_json decoy;
    decoy["test_3hop_questions"] = data.test3_total;
    decoy["with_decoy_overlap"] = data.test3_with_decoy_overlap;
    manifest["decoy_stats"] = std::move(decoy);
    manifest["config"] = cfg.snapshot();
    write_text(out_dir + "/manifest.json", manifest.dump(2) + "\n");

    std::cerr << "generated " << data.kb.num_raw_triples() << " triples, " << data.train.size()
              << "/" << data.dev.size() << "/" << data.test.size() << " questions\n";
    return 0;
}

int cmd_train_teacher(const CommonOpts& common, const std::string& data_dir,
                      const std::string& run_dir) {
    const Config cfg = load_config(common);
    const Dataset data = Dataset::load(data_dir);
    prepare_run_dir(run_dir, cfg);
    const train::TrainResult result = train::train_teacher(data, cfg, &std::cerr);
    write_train_outputs(run_dir, cfg, result);
    std::cerr << "best dev hits@1 " << result.best_dev_hits << " at epoch " << result.best_epoch
              << "\n";
    return 0;
}

int cmd_train_student(const CommonOpts& common, const std::string& data_dir,
                      const std::string& run_dir, const std::string& teacher_path,
                      const std::string& supervision_path, bool one_shot) {
    const Config cfg = load_config(common);
    Dataset data = Dataset::load(data_dir);
    if (one_shot) {
        data.train = train::one_shot_subsample(
            data.train, static_cast<uint64_t>(cfg.get_int("train.seed")));
    }
    prepare_run_dir(run_dir, cfg);

    std::optional<Checkpoint> teacher;
    if (!teacher_path.empty()) teacher = load_checkpoint(teacher_path);

    train::TrainResult result;
    if (!supervision_path.empty()) {
        if (!teacher.has_value()) {
            throw ConfigError("--supervision needs --teacher for configuration checks");
        }
        // Supervision is loaded against the student's prepared subgraphs.
        const train::TrainConfig tc = train::TrainConfig::from(cfg, false);
        const Vocab vocab = Vocab::build({&data.train, &data.dev, &data.test});
        const auto prepared = prepare_questions(data.kb, data.train, vocab, tc.ppr, nullptr);
        const auto signals =
            reports::load_supervision(supervision_path, prepared, data.kb, tc.model.steps);
        result = train::train_student(data, teacher.has_value() ? &*teacher : nullptr, cfg,
                                      &std::cerr, &signals);
    } else {
        result = train::train_student(data, teacher.has_value() ? &*teacher : nullptr, cfg,
                                      &std::cerr, nullptr);
    }
    write_train_outputs(run_dir, cfg, result);
    std::cerr << "best dev hits@1 " << result.best_dev_hits << " at epoch " << result.best_epoch
              << "\n";
    return 0;
}

int cmd_eval(const CommonOpts& common, const std::string& ckpt_path, const std::string& data_dir,
             const std::string& out_dir, bool intermediate) {
    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    const Dataset data = Dataset::load(data_dir);
    train::Runtime rt = train::runtime_from_checkpoint(ckpt, data.kb);
    // CLI overrides apply on top of the checkpoint's stored configuration.
    Config cfg = rt.raw_config;
    for (const std::string& kv : common.sets) {
        const size_t eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
        cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    const train::TrainConfig tc =
        train::TrainConfig::from(cfg, rt.net->kind() != model::NetworkKind::student);

    fs::create_directories(out_dir);
    CoverageReport dev_cov, test_cov;
    const auto dev = prepare_questions(data.kb, data.dev, rt.vocab, tc.ppr, &dev_cov);
    const auto test = prepare_questions(data.kb, data.test, rt.vocab, tc.ppr, &test_cov);

    const double threshold = tc.f1_threshold >= 0.0
                                 ? tc.f1_threshold
                                 : train::tune_f1_threshold(*rt.net, dev, tc.workers);
    train::Metrics dev_metrics = train::evaluate(*rt.net, dev, threshold, tc.workers);
    train::Metrics test_metrics = train::evaluate(*rt.net, test, threshold, tc.workers);

    std::vector<train::HopMetrics> dev_hops, test_hops;
    if (intermediate) {
        dev_hops = train::evaluate_intermediate(*rt.net, dev, tc.intermediate_threshold,
                                                tc.workers);
        test_hops = train::evaluate_intermediate(*rt.net, test, tc.intermediate_threshold,
                                                 tc.workers);
    }

    reports::write_metrics(out_dir + "/metrics_dev.json", "dev", dev_metrics, dev_hops);
    reports::write_metrics(out_dir + "/metrics_test.json", "test", test_metrics, test_hops);
    reports::write_coverage(out_dir + "/coverage_dev.jsonl",
                            out_dir + "/coverage_dev_summary.json", dev_cov);
    reports::write_coverage(out_dir + "/coverage_test.jsonl",
                            out_dir + "/coverage_test_summary.json", test_cov);
    const std::string table = reports::metrics_table(
        {{"dev", dev_metrics}, {"test", test_metrics}},
        intermediate ? std::vector<std::pair<std::string, std::vector<train::HopMetrics>>>{
                           {"dev", dev_hops}, {"test", test_hops}}
                     : std::vector<std::pair<std::string, std::vector<train::HopMetrics>>>{});
    write_text(out_dir + "/metrics.txt", table);
    std::cout << table;
    return 0;
}

int cmd_trace(const CommonOpts& common, const std::string& ckpt_path, const std::string& data_dir,
              const std::string& question_id, double threshold, const std::string& out_path) {
    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    const Dataset data = Dataset::load(data_dir);
    train::Runtime rt = train::runtime_from_checkpoint(ckpt, data.kb);
    (void)common;

    const Question* found = nullptr;
    const std::vector<Question>* splits[] = {&data.train, &data.dev, &data.test};
    for (const auto* split : splits) {
        for (const Question& q : *split) {
            if (q.id == question_id) found = &q;
        }
    }
    if (found == nullptr) throw DataError("unknown question id: " + question_id);

    const std::vector<Question> one = {*found};
    const auto prepared = prepare_questions(data.kb, one, rt.vocab, rt.cfg.ppr, nullptr);
    const PreparedQuestion& pq = prepared[0];

    ad::Tape tape;
    auto binding = rt.net->bind(tape, nullptr);
    const model::TeacherTrace trace =
        rt.net->run(binding, pq.tokens, pq.sub, pq.topic_dist, pq.answer_dist);

    if (out_path.empty()) {
        reports::dump_trace(std::cout, *rt.net, trace, pq, data.kb, threshold);
    } else {
        std::ofstream out(out_path, std::ios::binary);
        if (!out) throw DataError("cannot write " + out_path);
        reports::dump_trace(out, *rt.net, trace, pq, data.kb, threshold);
    }
    return 0;
}

int cmd_export_supervision(const CommonOpts& common, const std::string& ckpt_path,
                           const std::string& data_dir, const std::string& out_path) {
    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    const Dataset data = Dataset::load(data_dir);
    train::Runtime rt = train::runtime_from_checkpoint(ckpt, data.kb);
    (void)common;
    if (rt.net->kind() == model::NetworkKind::student) {
        throw ConfigError("supervision export needs a teacher checkpoint");
    }
    const auto prepared = prepare_questions(data.kb, data.train, rt.vocab, rt.cfg.ppr, nullptr);
    const auto signals = train::intermediate_signals(*rt.net, prepared, rt.cfg.workers);
    reports::save_supervision(out_path, prepared, signals, data.kb);
    std::cerr << "wrote supervision signals for " << prepared.size() << " questions\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"multi-hop KBQA engine over synthetic knowledge bases"};
    app.require_subcommand(1);

    CommonOpts gen_common;
    std::string gen_out;
    bool gen_force = false;
    auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
    add_common(gen, gen_common);
    gen->add_option("--out", gen_out, "output directory")->required();
    gen->add_flag("--force", gen_force, "overwrite a non-empty output directory");

    CommonOpts tt_common;
    std::string tt_data, tt_run, tt_arch, tt_ablation;
    auto* tt = app.add_subcommand("train-teacher", "pre-train the teacher network");
    add_common(tt, tt_common);
    tt->add_option("--data", tt_data, "dataset directory")->required();
    tt->add_option("--run", tt_run, "run directory")->required();
    tt->add_option("--arch", tt_arch, "teacher architecture: parallel | hybrid");
    tt->add_option("--ablation", tt_ablation,
                   "full | forward-only | backward-only | no-correspondence");

    CommonOpts ts_common;
    std::string ts_data, ts_run, ts_teacher, ts_supervision, ts_ablation;
    bool ts_one_shot = false;
    auto* ts = app.add_subcommand("train-student", "train the student network");
    add_common(ts, ts_common);
    ts->add_option("--data", ts_data, "dataset directory")->required();
    ts->add_option("--run", ts_run, "run directory")->required();
    ts->add_option("--teacher", ts_teacher, "teacher checkpoint for distillation");
    ts->add_option("--supervision", ts_supervision, "precomputed supervision signal file");
    ts->add_option("--ablation", ts_ablation, "full | student-only");
    ts->add_flag("--one-shot", ts_one_shot, "subsample one train question per template");

    CommonOpts ev_common;
    std::string ev_ckpt, ev_data, ev_out;
    bool ev_intermediate = false;
    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
    add_common(ev, ev_common);
    ev->add_option("--checkpoint", ev_ckpt, "checkpoint file")->required();
    ev->add_option("--data", ev_data, "dataset directory")->required();
    ev->add_option("--out", ev_out, "output directory")->required();
    ev->add_flag("--intermediate", ev_intermediate, "also report per-hop intermediate metrics");

    CommonOpts tr_common;
    std::string tr_ckpt, tr_data, tr_question, tr_out;
    double tr_threshold = 0.01;
    auto* tr = app.add_subcommand("trace", "dump per-step entity distributions for one question");
    add_common(tr, tr_common);
    tr->add_option("--checkpoint", tr_ckpt, "checkpoint file")->required();
    tr->add_option("--data", tr_data, "dataset directory")->required();
    tr->add_option("--question", tr_question, "question id")->required();
    tr->add_option("--threshold", tr_threshold, "probability display threshold (default 0.01)");
    tr->add_option("--out", tr_out, "output file (default: stdout)");

    CommonOpts ex_common;
    std::string ex_ckpt, ex_data, ex_out;
    auto* ex = app.add_subcommand("export-supervision",
                                  "export teacher supervision signals for offline training");
    add_common(ex, ex_common);
    ex->add_option("--checkpoint", ex_ckpt, "teacher checkpoint")->required();
    ex->add_option("--data", ex_data, "dataset directory")->required();
    ex->add_option("--out", ex_out, "output file")->required();

    try {
        app.parse(argc, argv);
        if (gen->parsed()) return cmd_gen_data(gen_common, gen_out, gen_force);
        if (tt->parsed()) {
            if (!tt_arch.empty()) tt_common.sets.push_back("train.teacher_arch=" + tt_arch);
            if (!tt_ablation.empty()) tt_common.sets.push_back("train.ablation=" + tt_ablation);
            return cmd_train_teacher(tt_common, tt_data, tt_run);
        }
        if (ts->parsed()) {
            if (!ts_ablation.empty()) ts_common.sets.push_back("train.ablation=" + ts_ablation);
            return cmd_train_student(ts_common, ts_data, ts_run, ts_teacher, ts_supervision,
                                     ts_one_shot);
        }
        if (ev->parsed()) return cmd_eval(ev_common, ev_ckpt, ev_data, ev_out, ev_intermediate);
        if (tr->parsed()) {
            return cmd_trace(tr_common, tr_ckpt, tr_data, tr_question, tr_threshold, tr_out);
        }
        if (ex->parsed()) return cmd_export_supervision(ex_common, ex_ckpt, ex_data, ex_out);
        return static_cast<int>(ExitCode::internal);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : static_cast<int>(ExitCode::config);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return static_cast<int>(ExitCode::config);
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return static_cast<int>(ExitCode::data);
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return static_cast<int>(ExitCode::numeric);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(ExitCode::internal);
    }
}

#include "kbqa/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "kbqa/errors.hpp"

namespace kbqa {

std::string format_double(double v) {
    for (int precision = 1; precision <= 17; ++precision) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.*g", precision, v);
        if (std::strtod(buf, nullptr) == v) return buf;
    }
    return "0"; // unreachable for finite v
}

namespace {

std::string trim(const std::string& s) {
    const size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

} // namespace

Config Config::defaults() {
    Config c;
    auto add_int = [&c](const char* key, int64_t v) {
        c.entries_[key] = Entry{Type::integer, std::to_string(v), {}};
    };
    auto add_float = [&c](const char* key, double v) {
        c.entries_[key] = Entry{Type::real, format_double(v), {}};
    };
    auto add_text = [&c](const char* key, const char* v, std::vector<std::string> choices = {}) {
        c.entries_[key] = Entry{Type::text, v, std::move(choices)};
    };

    // synthetic data generation
    add_int("gen.movies", 100);
    add_int("gen.actors", 60);
    add_int("gen.directors", 10);
    add_int("gen.writers", 25);
    add_int("gen.genres", 18);
    add_int("gen.years", 30);
    add_int("gen.actors_per_movie", 2);
    add_int("gen.genres_per_movie", 1);
    add_text("gen.template_set", "mixed", {"mixed", "spurious3"});
    add_int("gen.questions_per_template", 50);
    add_int("gen.split_train", 36);
    add_int("gen.split_dev", 7);
    add_int("gen.split_test", 7);
    add_float("gen.spurious_fraction", 0.5);
    add_int("gen.seed", 7);

    // subgraph retrieval
    add_float("ppr.epsilon", 1e-6);
    add_float("ppr.alpha", 0.15);
    add_int("ppr.top_m", 500);
    add_int("ppr.pre_hops", 0);

    // model
    add_int("model.dim", 100);
    add_int("model.steps", 3);
    add_float("model.init_scale", 0.1);

    // training
    add_int("train.batch_size", 40);
    add_float("train.learning_rate", 0.001);
    add_float("train.adam_beta1", 0.9);
    add_float("train.adam_beta2", 0.999);
    add_float("train.adam_epsilon", 1e-8);
    add_int("train.max_epochs", 100);
    add_int("train.eval_every", 5);
    add_int("train.patience", 5);
    add_int("train.seed", 1);
    add_float("train.lambda", 0.05);
    add_float("train.lambda_backward", 0.1);
    add_float("train.lambda_correspondence", 0.01);
    add_text("train.kl_order", "target_weighted", {"target_weighted", "paper_literal"});
    add_float("train.kl_smoothing", 1e-8);
    add_int("train.workers", 2); // 0 = hardware concurrency
    add_text("train.teacher_arch", "hybrid", {"parallel", "hybrid"});
    add_text("train.ablation", "full",
             {"full", "forward-only", "backward-only", "no-correspondence", "student-only"});

    // evaluation
    add_float("eval.f1_threshold", -1.0); // -1: tune on dev over the fixed grid
    add_float("eval.intermediate_threshold", 0.01);
    add_float("trace.threshold", 0.01);
    return c;
}

namespace {

Config parse_stream(std::istream& in, const std::string& origin) {
    Config c = Config::defaults();
    std::string line;
    int64_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
        }
        c.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return c;
}

} // namespace

Config Config::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    return parse_stream(in, path);
}

Config Config::from_text(const std::string& text) {
    std::istringstream in(text);
    return parse_stream(in, "<config>");
}

void Config::set(const std::string& key, const std::string& value) {
    auto it = entries_.find(key);
    if (it == entries_.end()) throw ConfigError("unknown config key: " + key);
    Entry& e = it->second;
    switch (e.type) {
        case Type::integer: {
            char* end = nullptr;
            const long long v = std::strtoll(value.c_str(), &end, 10);
            if (end == value.c_str() || *end != '\0') {
                throw ConfigError("config key " + key + ": expected integer, got '" + value + "'");
            }
            e.value = std::to_string(v);
            break;
        }
        case Type::real: {
            char* end = nullptr;
            const double v = std::strtod(value.c_str(), &end);
            if (end == value.c_str() || *end != '\0') {
                throw ConfigError("config key " + key + ": expected number, got '" + value + "'");
            }
            e.value = format_double(v);
            break;
        }
        case Type::text: {
            if (!e.choices.empty()) {
                bool ok = false;
                for (const auto& choice : e.choices) ok = ok || choice == value;
                if (!ok) {
                    std::string allowed;
                    for (const auto& choice : e.choices) {
                        if (!allowed.empty()) allowed += ", ";
                        allowed += choice;
                    }
                    throw ConfigError("config key " + key + ": '" + value + "' not one of {" +
                                      allowed + "}");
                }
            }
            e.value = value;
            break;
        }
    }
}

int64_t Config::get_int(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end() || it->second.type != Type::integer) {
        throw ConfigError("not an integer config key: " + key);
    }
    return std::strtoll(it->second.value.c_str(), nullptr, 10);
}

double Config::get_float(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end() || it->second.type != Type::real) {
        throw ConfigError("not a float config key: " + key);
    }
    return std::strtod(it->second.value.c_str(), nullptr);
}

const std::string& Config::get_string(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end() || it->second.type != Type::text) {
        throw ConfigError("not a string config key: " + key);
    }
    return it->second.value;
}

std::string Config::snapshot() const {
    std::ostringstream os;
    for (const auto& [key, entry] : entries_) os << key << " = " << entry.value << "\n";
    return os.str();
}

uint64_t Config::hash() const {
    const std::string s = snapshot();
    uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string Config::hash_hex() const {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash()));
    return std::string(buf, 8); // first 8 hex chars are plenty for run naming
}

} // namespace kbqa

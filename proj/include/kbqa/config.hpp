#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace kbqa {

// Flat `key = value` configuration with a typed schema and full defaulting.
// Unknown keys, type errors and enum violations raise ConfigError. The
// snapshot is canonical (sorted keys, round-trip float formatting), so equal
// configurations hash equally.
class Config {
public:
    static Config defaults();
    static Config load(const std::string& path);     // defaults overlaid with file contents
    static Config from_text(const std::string& text); // same format, in-memory

    void set(const std::string& key, const std::string& value); // validates

    int64_t get_int(const std::string& key) const;
    double get_float(const std::string& key) const;
    const std::string& get_string(const std::string& key) const;

    std::string snapshot() const;
    uint64_t hash() const; // FNV-1a over the snapshot
    std::string hash_hex() const;

private:
    enum class Type { integer, real, text };
    struct Entry {
        Type type;
        std::string value; // canonical textual form
        std::vector<std::string> choices; // for text entries; empty = free-form
    };

    std::map<std::string, Entry> entries_;
};

// Canonical shortest round-trip formatting for doubles; used everywhere a
// float lands in a byte-compared artifact.
std::string format_double(double v);

} // namespace kbqa

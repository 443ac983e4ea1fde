#include "kbqa/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "kbqa/errors.hpp"

namespace kbqa {

namespace {

constexpr char kMagic[8] = {'K', 'B', 'Q', 'A', 'C', 'K', 'P', 'T'};
constexpr uint32_t kVersion = 1;

void require_little_endian() {
    if constexpr (std::endian::native != std::endian::little) {
        throw DataError("checkpoint format requires a little-endian host");
    }
}

template <typename T>
void write_raw(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw DataError("truncated checkpoint");
    return v;
}

void write_string(std::ostream& out, const std::string& s) {
    write_raw<uint64_t>(out, s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
    const uint64_t len = read_raw<uint64_t>(in);
    if (len > (1ULL << 32)) throw DataError("corrupt checkpoint string length");
    std::string s(static_cast<size_t>(len), '\0');
    in.read(s.data(), static_cast<std::streamsize>(len));
    if (!in) throw DataError("truncated checkpoint");
    return s;
}

void write_string_list(std::ostream& out, const std::vector<std::string>& v) {
    write_raw<uint64_t>(out, v.size());
    for (const auto& s : v) write_string(out, s);
}

std::vector<std::string> read_string_list(std::istream& in) {
    const uint64_t n = read_raw<uint64_t>(in);
    std::vector<std::string> v;
    v.reserve(static_cast<size_t>(n));
    for (uint64_t i = 0; i < n; ++i) v.push_back(read_string(in));
    return v;
}

} // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    require_little_endian();
    if (ckpt.param_names.size() != ckpt.param_values.size()) {
        throw DataError("checkpoint: parameter name/value count mismatch");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint: " + path);
    out.write(kMagic, sizeof(kMagic));
    write_raw<uint32_t>(out, kVersion);
    write_string(out, ckpt.kind);
    write_string(out, ckpt.config_snapshot);
    write_string_list(out, ckpt.vocab);
    write_string_list(out, ckpt.relations);
    write_raw<uint64_t>(out, ckpt.param_values.size());
    for (size_t i = 0; i < ckpt.param_values.size(); ++i) {
        write_string(out, ckpt.param_names[i]);
        const ad::Tensor& t = ckpt.param_values[i];
        write_raw<uint32_t>(out, static_cast<uint32_t>(t.ndim()));
        for (int64_t dim : t.shape()) write_raw<int64_t>(out, dim);
        out.write(reinterpret_cast<const char*>(t.data()),
                  static_cast<std::streamsize>(t.size() * static_cast<int64_t>(sizeof(double))));
    }
    if (!out) throw DataError("failed writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    require_little_endian();
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw DataError("not a checkpoint file: " + path);
    }
    const uint32_t version = read_raw<uint32_t>(in);
    if (version != kVersion) {
        throw DataError("checkpoint version " + std::to_string(version) + " unsupported (want " +
                        std::to_string(kVersion) + ")");
    }
    Checkpoint ckpt;
    ckpt.kind = read_string(in);
    ckpt.config_snapshot = read_string(in);
    ckpt.vocab = read_string_list(in);
    ckpt.relations = read_string_list(in);
    const uint64_t count = read_raw<uint64_t>(in);
    for (uint64_t i = 0; i < count; ++i) {
        ckpt.param_names.push_back(read_string(in));
        const uint32_t ndim = read_raw<uint32_t>(in);
        if (ndim > 2) throw DataError("corrupt checkpoint tensor rank");
        std::vector<int64_t> shape;
        for (uint32_t d = 0; d < ndim; ++d) shape.push_back(read_raw<int64_t>(in));
        ad::Tensor t(shape);
        in.read(reinterpret_cast<char*>(t.data()),
                static_cast<std::streamsize>(t.size() * static_cast<int64_t>(sizeof(double))));
        if (!in) throw DataError("truncated checkpoint tensor data");
        ckpt.param_values.push_back(std::move(t));
    }
    return ckpt;
}

} // namespace kbqa

#include "ari/artifacts.hpp"

#include <cstring>
#include <fstream>

#include "ari/types.hpp"

namespace ari {

using nlohmann::json;

namespace {

void write_u32(std::ostream& out, uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_u64(std::ostream& out, uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_string(std::ostream& out, const std::string& s) {
    write_u32(out, static_cast<uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

uint32_t read_u32(std::istream& in) {
    uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}
uint64_t read_u64(std::istream& in) {
    uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}
std::string read_string(std::istream& in) {
    const uint32_t len = read_u32(in);
    std::string s(len, '\0');
    in.read(s.data(), len);
    return s;
}

void check_magic(std::istream& in, const char* magic, const std::string& path) {
    char buf[4];
    in.read(buf, 4);
    if (!in || std::memcmp(buf, magic, 4) != 0) {
        throw ValidationError(path + ": bad magic, not a " + magic + " file");
    }
}

}  // namespace

void save_features(const std::filesystem::path& path, const FeatureMatrix& feats) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write features: " + path.string());
    out.write("ARIX", 4);
    write_u32(out, 1);
    write_u32(out, static_cast<uint32_t>(feats.space));
    write_u64(out, feats.vocab_hash);
    write_u64(out, feats.rows());
    write_u64(out, feats.dim);
    for (std::size_t i = 0; i < feats.rows(); ++i) {
        write_string(out, feats.ids[i]);
        out.write(reinterpret_cast<const char*>(feats.row(i)),
                  static_cast<std::streamsize>(feats.dim * sizeof(double)));
    }
    if (!out) throw ValidationError("short write: " + path.string());
}

FeatureMatrix load_features(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open features: " + path.string());
    check_magic(in, "ARIX", path.string());
    const uint32_t version = read_u32(in);
    if (version != 1) throw ValidationError(path.string() + ": unsupported version");
    FeatureMatrix feats;
    feats.space = static_cast<FeatureSpace>(read_u32(in));
    feats.vocab_hash = read_u64(in);
    const uint64_t rows = read_u64(in);
    feats.dim = read_u64(in);
    feats.ids.reserve(rows);
    feats.data.resize(rows * feats.dim);
    for (uint64_t i = 0; i < rows; ++i) {
        feats.ids.push_back(read_string(in));
        in.read(reinterpret_cast<char*>(feats.data.data() + i * feats.dim),
                static_cast<std::streamsize>(feats.dim * sizeof(double)));
    }
    if (!in) throw ValidationError("truncated features file: " + path.string());
    return feats;
}

void save_firings(const std::filesystem::path& path, const FiringTable& table,
                  const std::vector<std::string>& rule_ids) {
    if (rule_ids.size() != table.n_rules) {
        throw ValidationError("save_firings: rule id count mismatch");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write firings: " + path.string());
    out.write("ARIF", 4);
    write_u32(out, 1);
    write_u64(out, table.n_rules);
    for (const std::string& id : rule_ids) write_string(out, id);
    write_u64(out, table.rows());
    for (std::size_t i = 0; i < table.rows(); ++i) {
        write_string(out, table.example_ids[i]);
        out.write(reinterpret_cast<const char*>(table.entries.data() + i * table.n_rules),
                  static_cast<std::streamsize>(table.n_rules * sizeof(int16_t)));
    }
    if (!out) throw ValidationError("short write: " + path.string());
}

LoadedFirings load_firings(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open firings: " + path.string());
    check_magic(in, "ARIF", path.string());
    const uint32_t version = read_u32(in);
    if (version != 1) throw ValidationError(path.string() + ": unsupported version");
    LoadedFirings out;
    out.table.n_rules = read_u64(in);
    out.rule_ids.reserve(out.table.n_rules);
    for (std::size_t j = 0; j < out.table.n_rules; ++j) out.rule_ids.push_back(read_string(in));
    const uint64_t rows = read_u64(in);
    out.table.example_ids.reserve(rows);
    out.table.entries.resize(rows * out.table.n_rules);
    for (uint64_t i = 0; i < rows; ++i) {
        out.table.example_ids.push_back(read_string(in));
        in.read(reinterpret_cast<char*>(out.table.entries.data() + i * out.table.n_rules),
                static_cast<std::streamsize>(out.table.n_rules * sizeof(int16_t)));
    }
    if (!in) throw ValidationError("truncated firings file: " + path.string());
    return out;
}

void write_json_file(const std::filesystem::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write: " + path.string());
    out << j.dump(2) << "\n";
}

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open: " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

}  // namespace ari

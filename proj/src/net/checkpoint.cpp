#include "puseg/net/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "puseg/errors.hpp"

namespace puseg {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

namespace {

constexpr const char* kMagic = "PUSEG1";

template <typename T>
void write_block(std::ostream& out, const std::string& name, std::span<const T> values) {
    out << name << ' ' << (sizeof(T) == 4 ? "f32" : "f64") << ' ' << values.size() << '\n';
    out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size_bytes()));
}

struct Block {
    std::string dtype;
    std::vector<char> bytes;
};

std::string read_line(std::istream& in, const std::filesystem::path& path) {
    std::string line;
    if (!std::getline(in, line)) throw IoError("truncated checkpoint '" + path.string() + "'");
    return line;
}

template <typename T>
void copy_block(const Block& b, std::span<T> dst, const std::string& name) {
    const std::string want = sizeof(T) == 4 ? "f32" : "f64";
    if (b.dtype != want || b.bytes.size() != dst.size_bytes())
        throw IoError("checkpoint parameter '" + name + "' has wrong type or size");
    std::memcpy(dst.data(), b.bytes.data(), b.bytes.size());
}

}  // namespace

void save_model(const std::filesystem::path& path, SegModel& model) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw IoError("cannot write '" + path.string() + "'");
        const auto params = model.backbone().parameters();
        out << kMagic << '\n'
            << "backbone_kind " << model.backbone_kind() << '\n'
            << "feature_dim " << model.feature_dim() << '\n'
            << "param_count " << params.size() + 2 << '\n';
        for (const auto& p : params) write_block<float>(out, p.name, p.value);
        write_block<double>(out, "head.weight", model.head().weights);
        write_block<double>(out, "head.bias", std::span<const double>(&model.head().bias, 1));
        if (!out) throw IoError("failed writing '" + path.string() + "'");
    }
    std::filesystem::rename(tmp, path);
}

SegModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint '" + path.string() + "'");
    if (read_line(in, path) != kMagic) throw IoError("'" + path.string() + "' is not a PUSEG1 checkpoint");

    auto field = [&](const std::string& key) {
        std::istringstream ss(read_line(in, path));
        std::string k, v;
        ss >> k >> v;
        if (k != key) throw IoError("checkpoint: expected '" + key + "'");
        return v;
    };
    const std::string kind = field("backbone_kind");
    const int feature_dim = std::stoi(field("feature_dim"));
    const int count = std::stoi(field("param_count"));

    std::map<std::string, Block> blocks;
    for (int i = 0; i < count; ++i) {
        std::istringstream ss(read_line(in, path));
        std::string name;
        Block b;
        std::size_t n = 0;
        if (!(ss >> name >> b.dtype >> n)) throw IoError("checkpoint: malformed parameter header");
        b.bytes.resize(n * (b.dtype == "f32" ? 4 : 8));
        if (!in.read(b.bytes.data(), static_cast<std::streamsize>(b.bytes.size())))
            throw IoError("checkpoint: truncated parameter '" + name + "'");
        blocks.emplace(name, std::move(b));
    }

    SegModel model(make_backbone(kind));
    if (model.feature_dim() != feature_dim) throw IoError("checkpoint feature_dim does not match backbone");
    for (auto& p : model.backbone().parameters()) {
        auto it = blocks.find(p.name);
        if (it == blocks.end()) throw IoError("checkpoint is missing parameter '" + p.name + "'");
        copy_block(it->second, p.value, p.name);
    }
    auto hw = blocks.find("head.weight");
    auto hb = blocks.find("head.bias");
    if (hw == blocks.end() || hb == blocks.end()) throw IoError("checkpoint is missing the head");
    copy_block(hw->second, std::span<double>(model.head().weights), "head.weight");
    copy_block(hb->second, std::span<double>(&model.head().bias, 1), "head.bias");
    return model;
}

}  // namespace puseg

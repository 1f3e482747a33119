#include "bsr/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <vector>

namespace bsr {

namespace {

constexpr char kMagic[8] = {'B', 'S', 'R', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_f32(std::string& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

class Reader {
public:
    explicit Reader(std::string bytes) : bytes_(std::move(bytes)) {}

    void raw(void* dst, std::size_t n, const char* what) {
        if (pos_ + n > bytes_.size()) {
            throw CheckpointError(CheckpointError::Kind::Truncated,
                                  std::string("checkpoint truncated while reading ") + what);
        }
        std::memcpy(dst, bytes_.data() + pos_, n);
        pos_ += n;
    }
    std::uint32_t u32(const char* what) {
        unsigned char b[4];
        raw(b, 4, what);
        return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
               (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    }
    float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
    std::string str(const char* what) {
        const std::uint32_t len = u32(what);
        if (len > 4096) {
            throw CheckpointError(CheckpointError::Kind::Malformed,
                                  std::string("implausible string length in ") + what);
        }
        std::string s(len, '\0');
        raw(s.data(), len, what);
        return s;
    }
    bool exhausted() const { return pos_ == bytes_.size(); }

private:
    std::string bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const Classifier& model, const std::string& path) {
    if (!model.defined()) throw std::invalid_argument("save_checkpoint: undefined model");
    std::string out;
    out.append(kMagic, sizeof(kMagic));
    put_u32(out, kVersion);
    put_u32(out, static_cast<std::uint32_t>(model.architecture_id().size()));
    out.append(model.architecture_id());
    for (int e : model.input_shape()) put_u32(out, static_cast<std::uint32_t>(e));
    put_u32(out, static_cast<std::uint32_t>(model.num_classes()));
    put_u32(out, static_cast<std::uint32_t>(model.parameters().size()));
    for (const auto& [name, t] : model.parameters()) {
        put_u32(out, static_cast<std::uint32_t>(name.size()));
        out.append(name);
        put_u32(out, static_cast<std::uint32_t>(t.rank()));
        for (int e : t.shape()) put_u32(out, static_cast<std::uint32_t>(e));
        for (float v : t.data()) put_f32(out, v);
    }

    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw CheckpointError(CheckpointError::Kind::Io, "cannot open " + tmp);
        f.write(out.data(), static_cast<std::streamsize>(out.size()));
        if (!f) throw CheckpointError(CheckpointError::Kind::Io, "write failed for " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        std::remove(tmp.c_str());
        throw CheckpointError(CheckpointError::Kind::Io, "rename to " + path + " failed");
    }
}

Classifier load_checkpoint(const std::string& path) {
    std::string bytes;
    {
        std::ifstream f(path, std::ios::binary);
        if (!f) throw CheckpointError(CheckpointError::Kind::Io, "cannot open " + path);
        bytes.assign(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
    }
    Reader r(std::move(bytes));

    char magic[8];
    r.raw(magic, sizeof(magic), "magic");
    if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw CheckpointError(CheckpointError::Kind::BadMagic, "bad magic in " + path);
    }
    const std::uint32_t version = r.u32("version");
    if (version != kVersion) {
        throw CheckpointError(CheckpointError::Kind::VersionMismatch,
                              "unsupported checkpoint version " + std::to_string(version) +
                                  " (expected " + std::to_string(kVersion) + ")");
    }
    const std::string arch = r.str("architecture id");
    Shape input_shape(3);
    for (int& e : input_shape) e = static_cast<int>(r.u32("input shape"));
    const int num_classes = static_cast<int>(r.u32("class count"));
    const std::uint32_t count = r.u32("tensor count");
    if (count > 1024) {
        throw CheckpointError(CheckpointError::Kind::Malformed, "implausible tensor count");
    }

    std::vector<std::pair<std::string, Tensor>> params;
    params.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        std::string name = r.str("tensor name");
        const std::uint32_t rank = r.u32("tensor rank");
        if (rank > 8) {
            throw CheckpointError(CheckpointError::Kind::Malformed,
                                  "implausible rank for tensor " + name);
        }
        Shape shape(rank);
        std::int64_t n = 1;
        for (std::uint32_t d = 0; d < rank; ++d) {
            shape[d] = static_cast<int>(r.u32("tensor extent"));
            n *= shape[d];
            if (shape[d] <= 0 || n > (1 << 28)) {
                throw CheckpointError(CheckpointError::Kind::Malformed,
                                      "implausible extents for tensor " + name);
            }
        }
        Tensor t = Tensor::zeros(shape);
        for (float& v : t.data()) v = r.f32("tensor payload");
        params.emplace_back(std::move(name), std::move(t));
    }
    if (!r.exhausted()) {
        throw CheckpointError(CheckpointError::Kind::Malformed,
                              "trailing bytes after checkpoint payload in " + path);
    }
    try {
        return Classifier::from_parameters(arch, input_shape, num_classes, std::move(params));
    } catch (const std::invalid_argument& e) {
        throw CheckpointError(CheckpointError::Kind::Malformed, e.what());
    }
}

}  // namespace bsr

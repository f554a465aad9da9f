#include "septensor/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace septensor {

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (auto b : bytes) {
        h ^= b;
        h *= 0x100000001b3ULL;
    }
    return h;
}

namespace {

class Writer {
public:
    void raw(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        out_.insert(out_.end(), b, b + n);
    }
    template <class U>
    void uint(U v) {
        for (std::size_t i = 0; i < sizeof(U); ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f64(double v) { uint(std::bit_cast<std::uint64_t>(v)); }
    std::vector<std::uint8_t>& bytes() { return out_; }

private:
    std::vector<std::uint8_t> out_;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}
    void raw(void* p, std::size_t n) {
        need(n);
        std::memcpy(p, in_.data() + pos_, n);
        pos_ += n;
    }
    template <class U>
    U uint() {
        need(sizeof(U));
        U v = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<U>(in_[pos_ + i]) << (8 * i));
        pos_ += sizeof(U);
        return v;
    }
    double f64() { return std::bit_cast<double>(uint<std::uint64_t>()); }
    [[nodiscard]] std::size_t position() const { return pos_; }
    [[nodiscard]] std::size_t remaining() const { return in_.size() - pos_; }

private:
    void need(std::size_t n) const {
        if (in_.size() - pos_ < n) throw CheckpointError("checkpoint is truncated");
    }
    std::span<const std::uint8_t> in_;
    std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize_model(const SeparatedModel& model) {
    const auto& spec = model.spec();
    Writer w;
    w.raw(kCheckpointMagic, sizeof kCheckpointMagic);
    w.uint<std::uint32_t>(kCheckpointVersion);
    w.uint<std::uint32_t>(static_cast<std::uint32_t>(spec.kind));
    w.uint<std::uint64_t>(spec.dim);
    w.uint<std::uint64_t>(spec.rank);
    for (const auto& net : spec.networks) {
        w.uint<std::uint64_t>(net.depth);
        w.uint<std::uint64_t>(net.hidden_width);
        w.uint<std::uint64_t>(net.output_width);
        w.uint<std::uint32_t>(static_cast<std::uint32_t>(net.activation));
        w.f64(net.input_scale);
        w.f64(net.input_shift);
    }
    const auto params = model.parameters();
    w.uint<std::uint64_t>(params.size());
    for (double p : params) w.f64(p);
    w.uint<std::uint64_t>(fnv1a64(w.bytes()));
    return std::move(w.bytes());
}

SeparatedModel deserialize_model(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < sizeof kCheckpointMagic + 8) throw CheckpointError("checkpoint is truncated");
    const auto body = bytes.first(bytes.size() - 8);
    Reader tail(bytes.last(8));
    if (tail.uint<std::uint64_t>() != fnv1a64(body)) throw CheckpointError("checkpoint checksum mismatch");

    Reader r(body);
    char magic[8];
    r.raw(magic, sizeof magic);
    if (std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) throw CheckpointError("not a septensor checkpoint");
    if (r.uint<std::uint32_t>() != kCheckpointVersion) throw CheckpointError("unsupported checkpoint version");

    ModelSpec spec;
    const auto kind = r.uint<std::uint32_t>();
    if (kind > 2) throw CheckpointError("unknown model kind in checkpoint");
    spec.kind = static_cast<Decomposition>(kind);
    spec.dim = r.uint<std::uint64_t>();
    spec.rank = r.uint<std::uint64_t>();
    if (spec.dim < 2 || spec.dim > 64) throw CheckpointError("implausible dimension in checkpoint");
    for (std::size_t k = 0; k < spec.dim; ++k) {
        NetworkConfig c;
        c.depth = r.uint<std::uint64_t>();
        c.hidden_width = r.uint<std::uint64_t>();
        c.output_width = r.uint<std::uint64_t>();
        const auto act = r.uint<std::uint32_t>();
        if (act > 1) throw CheckpointError("unknown activation in checkpoint");
        c.activation = static_cast<Activation>(act);
        c.input_scale = r.f64();
        c.input_shift = r.f64();
        spec.networks.push_back(c);
    }
    const auto count = r.uint<std::uint64_t>();
    if (count != r.remaining() / 8 || r.remaining() % 8 != 0)
        throw CheckpointError("checkpoint parameter count does not match payload");
    std::vector<double> params(count);
    for (auto& p : params) p = r.f64();
    try {
        return SeparatedModel(std::move(spec), std::move(params));
    } catch (const std::invalid_argument& e) {
        throw CheckpointError(std::string("inconsistent checkpoint header: ") + e.what());
    }
}

void save_checkpoint(const SeparatedModel& model, const std::filesystem::path& path) {
    const auto bytes = serialize_model(model);
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw CheckpointError("cannot open " + tmp.string() + " for writing");
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw CheckpointError("failed writing " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

SeparatedModel load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open " + path.string());
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize_model(bytes);
}

}  // namespace septensor

#include "qaspr/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace qaspr {

namespace {

constexpr char kMagic[6] = {'Q', 'A', 'S', 'P', 'R', '\x01'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& in, const char* what) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw std::runtime_error(std::string("checkpoint truncated reading ") + what);
    return v;
}

void put_string(std::ostream& out, const std::string& s) {
    put<std::uint64_t>(out, s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in, const char* what) {
    auto n = get<std::uint64_t>(in, what);
    if (n > (1ULL << 32)) throw std::runtime_error(std::string("checkpoint: implausible length for ") + what);
    std::string s(n, '\0');
    in.read(s.data(), static_cast<std::streamsize>(n));
    if (!in) throw std::runtime_error(std::string("checkpoint truncated reading ") + what);
    return s;
}

}  // namespace

void write_checkpoint(std::ostream& out, const nlohmann::json& metadata, const nn::ParamStore& params) {
    out.write(kMagic, sizeof kMagic);
    put_string(out, metadata.dump());
    for (nn::ParamId p = 0; p < params.size(); ++p) {
        const auto& t = params.value(p);
        put_string(out, params.name(p));
        put<std::uint32_t>(out, static_cast<std::uint32_t>(t.shape.size()));
        for (auto d : t.shape) put<std::uint64_t>(out, d);
        out.write(reinterpret_cast<const char*>(t.data.data()), static_cast<std::streamsize>(t.data.size() * 8));
    }
    if (!out) throw std::runtime_error("checkpoint write failed");
}

void save_checkpoint(const std::filesystem::path& path, const nlohmann::json& metadata, const nn::ParamStore& params) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    write_checkpoint(out, metadata, params);
}

Checkpoint read_checkpoint(std::istream& in) {
    char magic[sizeof kMagic];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw std::runtime_error("not a QASPR checkpoint");
    Checkpoint ck;
    ck.metadata = nlohmann::json::parse(get_string(in, "metadata"));
    while (in.peek() != std::char_traits<char>::eof()) {
        auto name = get_string(in, "tensor name");
        auto rank = get<std::uint32_t>(in, "rank");
        if (rank > 8) throw std::runtime_error("checkpoint: tensor '" + name + "' has implausible rank");
        std::vector<std::size_t> shape(rank);
        for (auto& d : shape) d = get<std::uint64_t>(in, "dims");
        nn::Tensor t(shape);
        in.read(reinterpret_cast<char*>(t.data.data()), static_cast<std::streamsize>(t.data.size() * 8));
        if (!in) throw std::runtime_error("checkpoint truncated in tensor '" + name + "'");
        ck.params.add(std::move(name), std::move(t));
    }
    return ck;
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    return read_checkpoint(in);
}

}  // namespace qaspr

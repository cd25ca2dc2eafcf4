#include "vague/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "vague/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint serialization assumes a little-endian host");

namespace vague {

namespace {

constexpr char kMagic[8] = {'V', 'A', 'G', 'C', 'K', 'P', 'T', '1'};

template <typename T>
void write_raw(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::istream& is, const char* what) {
    T v{};
    if (!is.read(reinterpret_cast<char*>(&v), sizeof(T)))
        throw DataError(std::string("checkpoint: truncated while reading ") + what);
    return v;
}

} // namespace

void Checkpoint::add(const std::string& name, nn::Tensor t) {
    for (const auto& [n, _] : params)
        if (n == name) throw UsageError("checkpoint: duplicate parameter '" + name + "'");
    params.emplace_back(name, std::move(t));
}

bool Checkpoint::has(const std::string& name) const {
    for (const auto& [n, _] : params)
        if (n == name) return true;
    return false;
}

const nn::Tensor& Checkpoint::get(const std::string& name) const {
    for (const auto& [n, t] : params)
        if (n == name) return t;
    throw DataError("checkpoint: missing parameter '" + name + "'");
}

std::string Checkpoint::kind() const {
    if (!config.contains("kind") || !config["kind"].is_string())
        throw DataError("checkpoint: config has no 'kind' entry");
    return config["kind"].get<std::string>();
}

void Checkpoint::save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("checkpoint: cannot open '" + path + "' for writing");
    os.write(kMagic, sizeof(kMagic));
    std::string cfg = config.dump();
    write_raw<std::uint32_t>(os, static_cast<std::uint32_t>(cfg.size()));
    os.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
    write_raw<std::uint32_t>(os, static_cast<std::uint32_t>(params.size()));
    for (const auto& [name, t] : params) {
        write_raw<std::uint16_t>(os, static_cast<std::uint16_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_raw<std::uint8_t>(os, static_cast<std::uint8_t>(t.ndim()));
        for (std::size_t d : t.shape()) write_raw<std::uint64_t>(os, d);
        os.write(reinterpret_cast<const char*>(t.data()),
                 static_cast<std::streamsize>(t.size() * sizeof(double)));
    }
    if (!os) throw DataError("checkpoint: write to '" + path + "' failed");
}

Checkpoint Checkpoint::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("checkpoint: cannot open '" + path + "'");
    char magic[8];
    if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw DataError("checkpoint: '" + path + "' has no valid magic header");

    Checkpoint ckpt;
    auto cfg_len = read_raw<std::uint32_t>(is, "config length");
    std::string cfg(cfg_len, '\0');
    if (!is.read(cfg.data(), cfg_len)) throw DataError("checkpoint: truncated config");
    try {
        ckpt.config = nlohmann::json::parse(cfg);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("checkpoint: bad config JSON: ") + e.what());
    }

    auto count = read_raw<std::uint32_t>(is, "parameter count");
    for (std::uint32_t k = 0; k < count; ++k) {
        auto name_len = read_raw<std::uint16_t>(is, "name length");
        std::string name(name_len, '\0');
        if (!is.read(name.data(), name_len)) throw DataError("checkpoint: truncated name");
        auto ndim = read_raw<std::uint8_t>(is, "rank");
        std::vector<std::size_t> shape(ndim);
        std::size_t total = 1;
        for (auto& d : shape) {
            d = static_cast<std::size_t>(read_raw<std::uint64_t>(is, "dimension"));
            total *= d;
        }
        nn::Tensor t(shape);
        if (!is.read(reinterpret_cast<char*>(t.data()),
                     static_cast<std::streamsize>(total * sizeof(double))))
            throw DataError("checkpoint: truncated values for '" + name + "'");
        ckpt.params.emplace_back(std::move(name), std::move(t));
    }
    if (is.peek() != std::ifstream::traits_type::eof())
        throw DataError("checkpoint: trailing bytes after last parameter");
    return ckpt;
}

} // namespace vague

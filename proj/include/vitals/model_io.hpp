#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "vitals/error.hpp"
#include "vitals/model.hpp"

namespace vitals {

// Parameter container, little-endian binary:
//
//   magic   8 bytes            "VPPARAM1"
//   u32     format version     (1)
//   u64     config hash        FNV-1a of the canonical config string
//   u64     seed
//   u32+str canonical config string
//   u32     tensor count
//   per tensor: u32+str name, u32 rank, u64 dims[rank], f64 data[product]
//
// The same tensor-block encoding is reused inside checkpoint files.

namespace bio {

inline void write_bytes(std::ostream& os, const void* p, std::size_t n) {
    os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

inline void read_bytes(std::istream& is, void* p, std::size_t n, const char* what) {
    is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    require(is.gcount() == static_cast<std::streamsize>(n), ErrorKind::Format,
            std::string("truncated file while reading ") + what);
}

template <typename T>
void write_pod(std::ostream& os, T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    write_bytes(os, &v, sizeof(T));
}

template <typename T>
T read_pod(std::istream& is, const char* what) {
    T v{};
    read_bytes(is, &v, sizeof(T), what);
    return v;
}

inline void write_string(std::ostream& os, const std::string& s) {
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
    write_bytes(os, s.data(), s.size());
}

inline std::string read_string(std::istream& is, const char* what) {
    const auto n = read_pod<std::uint32_t>(is, what);
    require(n < (1u << 24), ErrorKind::Format, std::string("implausible string length in ") + what);
    std::string s(n, '\0');
    read_bytes(is, s.data(), n, what);
    return s;
}

inline void write_tensor(std::ostream& os, const std::string& name, const Tensor& t) {
    write_string(os, name);
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) write_pod<std::uint64_t>(os, d);
    write_bytes(os, t.data(), t.size() * sizeof(double));
}

inline Tensor read_tensor(std::istream& is, std::string& name) {
    name = read_string(is, "tensor name");
    const auto rank = read_pod<std::uint32_t>(is, "tensor rank");
    require(rank >= 1 && rank <= 8, ErrorKind::Format, "implausible tensor rank");
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(read_pod<std::uint64_t>(is, "tensor dim"));
    Tensor t(shape, 0.0);
    read_bytes(is, t.data(), t.size() * sizeof(double), "tensor data");
    return t;
}

} // namespace bio

inline constexpr char kParamsMagic[8] = {'V', 'P', 'P', 'A', 'R', 'A', 'M', '1'};

inline void write_params_stream(std::ostream& os, const ModelParams& params) {
    bio::write_bytes(os, kParamsMagic, sizeof(kParamsMagic));
    bio::write_pod<std::uint32_t>(os, 1u);
    bio::write_pod<std::uint64_t>(os, params.config.hash());
    bio::write_pod<std::uint64_t>(os, params.seed);
    bio::write_string(os, params.config.canonical_string());

    std::uint32_t count = 0;
    for_each_param(const_cast<ModelParams&>(params),
                   [&count](const std::string&, Tensor&) { ++count; });
    bio::write_pod<std::uint32_t>(os, count);
    for_each_param(const_cast<ModelParams&>(params),
                   [&os](const std::string& name, Tensor& t) { bio::write_tensor(os, name, t); });
}

inline ModelParams read_params_stream(std::istream& is) {
    char magic[8];
    bio::read_bytes(is, magic, sizeof(magic), "magic");
    require(std::memcmp(magic, kParamsMagic, sizeof(magic)) == 0, ErrorKind::Format,
            "not a parameter file (bad magic)");
    const auto version = bio::read_pod<std::uint32_t>(is, "version");
    require(version == 1, ErrorKind::Format,
            "unsupported parameter format version " + std::to_string(version));
    const auto stored_hash = bio::read_pod<std::uint64_t>(is, "config hash");
    const auto seed = bio::read_pod<std::uint64_t>(is, "seed");
    const std::string config_str = bio::read_string(is, "config");
    ModelConfig config = ModelConfig::from_canonical_string(config_str);
    require(config.hash() == stored_hash, ErrorKind::Compatibility,
            "stored config hash does not match stored config");

    // Rebuild the skeleton, then overwrite tensors by name in file order.
    ModelParams params = init_params(config, seed);
    const auto count = bio::read_pod<std::uint32_t>(is, "tensor count");
    std::size_t expected = 0;
    for_each_param(params, [&expected](const std::string&, Tensor&) { ++expected; });
    require(count == expected, ErrorKind::Format, "parameter tensor count mismatch");

    for (std::uint32_t i = 0; i < count; ++i) {
        std::string name;
        Tensor t = bio::read_tensor(is, name);
        bool placed = false;
        for_each_param(params, [&](const std::string& n, Tensor& dst) {
            if (n == name) {
                require(dst.shape() == t.shape(), ErrorKind::Compatibility,
                        "tensor " + name + " has shape " + t.shape_string() + ", expected " +
                            dst.shape_string());
                dst = t;
                placed = true;
            }
        });
        require(placed, ErrorKind::Format, "unknown tensor '" + name + "' in parameter file");
    }
    return params;
}

inline void save_params(const ModelParams& params, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    require(os.good(), ErrorKind::Io, "cannot open " + path.string() + " for writing");
    write_params_stream(os, params);
    os.flush();
    require(os.good(), ErrorKind::Io, "write failed for " + path.string());
}

// Loads a parameter file; when `expected` is given, its config must hash to
// the stored value or the load is refused.
inline ModelParams load_params(const std::filesystem::path& path,
                               const ModelConfig* expected = nullptr) {
    std::ifstream is(path, std::ios::binary);
    require(is.good(), ErrorKind::Format, "cannot open parameter file " + path.string());
    ModelParams params = read_params_stream(is);
    if (expected != nullptr)
        require(expected->hash() == params.config.hash(), ErrorKind::Compatibility,
                "parameter file was trained with config '" + params.config.canonical_string() +
                    "', requested '" + expected->canonical_string() + "'");
    return params;
}

} // namespace vitals

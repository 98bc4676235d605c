#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <utility>
#include <vector>

#include <json.hpp>

namespace polynet {

inline constexpr const char* kVersion = "0.1.0";

inline std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char b : bytes) {
        h ^= b;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string fnv1a64_hex(const std::string& bytes) {
    static const char* digits = "0123456789abcdef";
    std::uint64_t h = fnv1a64(bytes);
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[h & 0xf];
        h >>= 4;
    }
    return out;
}

// Shortest round-trip decimal representation.
inline std::string dtos(double v) {
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    if (res.ec != std::errc()) throw std::runtime_error("dtos: conversion failed");
    return std::string(buf, res.ptr);
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << content;
    if (!out) throw std::runtime_error("write failed for " + path);
}

inline nlohmann::ordered_json make_manifest(const std::string& subcommand,
                                            const nlohmann::ordered_json& config,
                                            std::uint64_t seed, double wall_ms,
                                            const std::vector<std::pair<std::string, std::string>>&
                                                output_digests) {
    nlohmann::ordered_json m;
    m["subcommand"] = subcommand;
    m["config"] = config;
    m["seed"] = seed;
    m["version"] = kVersion;
    m["wall_time_ms"] = wall_ms;
    nlohmann::ordered_json outs = nlohmann::ordered_json::array();
    for (const auto& [path, digest] : output_digests) {
        nlohmann::ordered_json o;
        o["path"] = path;
        o["fnv1a64"] = digest;
        outs.push_back(o);
    }
    m["outputs"] = outs;
    return m;
}

}  // namespace polynet

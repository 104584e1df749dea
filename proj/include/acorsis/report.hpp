#pragma once

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "acorsis/errors.hpp"

namespace acorsis {

inline constexpr std::string_view kToolName = "acorsis";
inline constexpr std::string_view kToolVersion = "0.1.0";

/// Shortest round-trip decimal form of a double.
inline std::string fmt_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    (void)ec;
    return std::string(buf, ptr);
}

inline std::string fmt_fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

/// FNV-1a 64-bit digest of a file's bytes, as "fnv1a64:<hex>".
inline std::string digest_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw csv_error("cannot open '" + path + "'");
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[8192];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        const std::streamsize got = in.gcount();
        for (std::streamsize i = 0; i < got; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
        if (got < static_cast<std::streamsize>(sizeof buf)) break;
    }
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
    return std::string("fnv1a64:") + hex;
}

/// Ordered key-value record embedded at the top of every result file.
struct RunManifest {
    std::vector<std::pair<std::string, std::string>> entries;
    std::vector<std::string> warnings;

    void add(std::string key, std::string value) { entries.emplace_back(std::move(key), std::move(value)); }
    void add(std::string key, double value) { entries.emplace_back(std::move(key), fmt_double(value)); }
    void add(std::string key, long long value) { entries.emplace_back(std::move(key), std::to_string(value)); }
    void warn(std::string message) { warnings.push_back(std::move(message)); }

    void write(std::ostream& os) const {
        os << "[manifest]\n";
        os << "tool\t" << kToolName << ' ' << kToolVersion << '\n';
        for (const auto& [k, v] : entries) os << k << '\t' << v << '\n';
        os << "warnings\t" << warnings.size() << '\n';
        for (const std::string& w : warnings) os << "warning\t" << w << '\n';
    }
};

} // namespace acorsis

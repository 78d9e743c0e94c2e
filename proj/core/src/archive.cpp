// Copyright Contributors to the splatcap project
// SPDX-License-Identifier: Apache-2.0
//
#include "splatcap/archive.hpp"

#include "splatcap/error.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <cstring>
#include <filesystem>

namespace splatcap {

namespace {

constexpr std::size_t kBlock = 512;

std::uint64_t parse_octal(std::string_view field, std::uint64_t offset) {
    std::uint64_t value = 0;
    std::size_t i = 0;
    while (i < field.size() && field[i] == ' ') ++i;
    for (; i < field.size() && field[i] != '\0' && field[i] != ' '; ++i) {
        if (field[i] < '0' || field[i] > '7') throw ParseError("invalid tar header field", offset);
        if (value > (std::uint64_t{1} << 60)) throw ParseError("tar size overflow", offset);
        value = value * 8 + static_cast<std::uint64_t>(field[i] - '0');
    }
    return value;
}

std::string c_field(std::string_view field) {
    return std::string(field.substr(0, std::min(field.size(), field.find('\0'))));
}

std::string safe_path(const std::string& raw, std::uint64_t offset) {
    std::filesystem::path p(raw);
    if (p.is_absolute() || raw.empty()) throw ParseError("unsafe archive path '" + raw + "'", offset);
    std::filesystem::path out;
    for (const auto& part : p) {
        const auto s = part.string();
        if (s == "..") throw ParseError("unsafe archive path '" + raw + "'", offset);
        if (s == "." || s.empty()) continue;
        out /= part;
    }
    return out.generic_string();
}

unsigned header_checksum(std::string_view block) {
    unsigned sum = 0;
    for (std::size_t i = 0; i < kBlock; ++i) {
        const bool in_chksum = i >= 148 && i < 156;
        sum += in_chksum ? ' ' : static_cast<unsigned char>(block[i]);
    }
    return sum;
}

} // namespace

bool is_gzip(std::string_view bytes) {
    return bytes.size() >= 2 && static_cast<unsigned char>(bytes[0]) == 0x1f &&
           static_cast<unsigned char>(bytes[1]) == 0x8b;
}

bool is_tar(std::string_view bytes) {
    return bytes.size() >= kBlock && bytes.substr(257, 5) == "ustar";
}

std::string gunzip(std::string_view bytes, std::size_t max_output) {
    z_stream zs{};
    if (inflateInit2(&zs, 16 + MAX_WBITS) != Z_OK) throw Error("zlib init failed");
    zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(bytes.data()));
    zs.avail_in = static_cast<uInt>(bytes.size());
    std::string out;
    std::array<char, 1 << 16> chunk{};
    int ret = Z_OK;
    while (ret != Z_STREAM_END) {
        zs.next_out = reinterpret_cast<Bytef*>(chunk.data());
        zs.avail_out = static_cast<uInt>(chunk.size());
        ret = inflate(&zs, Z_NO_FLUSH);
        if (ret != Z_OK && ret != Z_STREAM_END) {
            inflateEnd(&zs);
            throw ParseError("corrupt gzip stream", zs.total_in);
        }
        out.append(chunk.data(), chunk.size() - zs.avail_out);
        if (out.size() > max_output) {
            inflateEnd(&zs);
            throw ParseError("gzip output exceeds limit", zs.total_in);
        }
        if (ret == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) {
            inflateEnd(&zs);
            throw TruncatedError(bytes.size() + 1, bytes.size());
        }
    }
    inflateEnd(&zs);
    return out;
}

std::vector<ArchiveEntry> read_tar(std::string_view bytes) {
    std::string inflated;
    if (is_gzip(bytes)) {
        inflated = gunzip(bytes);
        bytes = inflated;
    }
    std::vector<ArchiveEntry> entries;
    std::string long_name;
    std::size_t pos = 0;
    while (pos + kBlock <= bytes.size()) {
        const std::string_view block = bytes.substr(pos, kBlock);
        if (std::all_of(block.begin(), block.end(), [](char c) { return c == '\0'; })) {
            break;
        }
        const auto expected = parse_octal(block.substr(148, 8), pos + 148);
        if (expected != header_checksum(block)) throw ParseError("tar header checksum mismatch", pos);

        const auto size = parse_octal(block.substr(124, 12), pos + 124);
        const char type = block[156];
        const std::size_t data_at = pos + kBlock;
        if (size > bytes.size() - data_at) throw TruncatedError(data_at + size, bytes.size());
        const std::string_view data = bytes.substr(data_at, size);
        pos = data_at + (size + kBlock - 1) / kBlock * kBlock;

        if (type == 'L') { // GNU long name for the next entry
            long_name = c_field(data);
            continue;
        }
        std::string name = c_field(block.substr(0, 100));
        if (block.substr(257, 5) == "ustar") {
            const auto prefix = c_field(block.substr(345, 155));
            if (!prefix.empty()) name = prefix + "/" + name;
        }
        if (!long_name.empty()) {
            name = std::move(long_name);
            long_name.clear();
        }
        if (type == '0' || type == '\0') {
            entries.push_back({safe_path(name, pos), std::string(data)});
        }
        // Directories, links and pax headers carry no payload we use.
    }
    return entries;
}

std::string write_tar(const std::vector<ArchiveEntry>& entries) {
    std::string out;
    for (const auto& e : entries) {
        if (e.path.size() >= 100) throw InvalidParameter("tar path too long: " + e.path);
        std::array<char, kBlock> h{};
        std::memcpy(h.data(), e.path.data(), e.path.size());
        std::snprintf(h.data() + 100, 8, "%07o", 0644u);
        std::snprintf(h.data() + 108, 8, "%07o", 0u);
        std::snprintf(h.data() + 116, 8, "%07o", 0u);
        std::snprintf(h.data() + 124, 12, "%011llo", static_cast<unsigned long long>(e.data.size()));
        std::snprintf(h.data() + 136, 12, "%011o", 0u);
        h[156] = '0';
        std::memcpy(h.data() + 257, "ustar", 6);
        std::memcpy(h.data() + 263, "00", 2);
        const unsigned sum = header_checksum(std::string_view(h.data(), h.size()));
        std::snprintf(h.data() + 148, 8, "%06o", sum);
        h[155] = ' ';
        out.append(h.data(), h.size());
        out += e.data;
        out.append((kBlock - e.data.size() % kBlock) % kBlock, '\0');
    }
    out.append(2 * kBlock, '\0');
    return out;
}

} // namespace splatcap

// Copyright Contributors to the splatcap project
// SPDX-License-Identifier: Apache-2.0
//
#include "splatcap/ply.hpp"

#include "splatcap/error.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <charconv>
#include <cstring>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <unordered_set>
#include <vector>

namespace splatcap {

static_assert(std::endian::native == std::endian::little,
              "the binary PLY codec assumes a little-endian host");

namespace {

enum class PlyFormat { BinaryLittleEndian, Ascii };

enum class ScalarType { Int8, UInt8, Int16, UInt16, Int32, UInt32, Float32, Float64 };

std::optional<ScalarType> parse_scalar_type(std::string_view name) {
    if (name == "char" || name == "int8") return ScalarType::Int8;
    if (name == "uchar" || name == "uint8") return ScalarType::UInt8;
    if (name == "short" || name == "int16") return ScalarType::Int16;
    if (name == "ushort" || name == "uint16") return ScalarType::UInt16;
    if (name == "int" || name == "int32") return ScalarType::Int32;
    if (name == "uint" || name == "uint32") return ScalarType::UInt32;
    if (name == "float" || name == "float32") return ScalarType::Float32;
    if (name == "double" || name == "float64") return ScalarType::Float64;
    return std::nullopt;
}

std::size_t scalar_size(ScalarType t) {
    switch (t) {
    case ScalarType::Int8:
    case ScalarType::UInt8: return 1;
    case ScalarType::Int16:
    case ScalarType::UInt16: return 2;
    case ScalarType::Int32:
    case ScalarType::UInt32:
    case ScalarType::Float32: return 4;
    case ScalarType::Float64: return 8;
    }
    return 0;
}

struct Property {
    std::string name;
    ScalarType type;
    std::size_t offset; // byte offset within a binary record
};

struct Element {
    std::string name;
    std::uint64_t count = 0;
    std::vector<Property> properties;
    std::size_t stride = 0;
};

struct Header {
    PlyFormat format = PlyFormat::BinaryLittleEndian;
    std::vector<Element> elements;
    std::optional<int> sh_degree;
    std::size_t body_offset = 0;
};

std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
        const std::size_t start = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
        if (i > start) out.push_back(line.substr(start, i - start));
    }
    return out;
}

template <typename T>
bool parse_number(std::string_view token, T& out) {
    const char* end = token.data() + token.size();
    auto [ptr, ec] = std::from_chars(token.data(), end, out);
    return ec == std::errc() && ptr == end;
}

Header parse_header(std::string_view bytes) {
    constexpr std::size_t kMaxHeader = 1 << 20;
    Header header;
    std::size_t pos = 0;
    bool saw_format = false;
    int line_no = 0;
    std::unordered_set<std::string> seen;

    auto next_line = [&](std::size_t& line_start) -> std::optional<std::string_view> {
        line_start = pos;
        const std::size_t limit = std::min(bytes.size(), kMaxHeader);
        const auto nl = bytes.find('\n', pos);
        if (nl == std::string_view::npos || nl >= limit) {
            return std::nullopt;
        }
        std::string_view line = bytes.substr(pos, nl - pos);
        pos = nl + 1;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        return line;
    };

    std::size_t line_start = 0;
    for (;;) {
        auto line = next_line(line_start);
        if (!line) {
            throw ParseError("unterminated PLY header (missing end_header)", line_start);
        }
        ++line_no;
        if (line_no == 1) {
            if (*line != "ply") throw ParseError("missing 'ply' magic", 0);
            continue;
        }
        const auto tokens = split_ws(*line);
        if (tokens.empty()) continue;
        const auto& key = tokens[0];
        if (key == "end_header") {
            break;
        } else if (key == "format") {
            if (tokens.size() != 3 || tokens[2] != "1.0") {
                throw ParseError("malformed format line", line_start);
            }
            if (tokens[1] == "binary_little_endian") {
                header.format = PlyFormat::BinaryLittleEndian;
            } else if (tokens[1] == "ascii") {
                header.format = PlyFormat::Ascii;
            } else {
                throw ParseError("unsupported PLY format '" + std::string(tokens[1]) + "'",
                                 line_start);
            }
            saw_format = true;
        } else if (key == "comment") {
            if (tokens.size() == 3 && tokens[1] == "active_sh_degree") {
                int degree = -1;
                if (!parse_number(tokens[2], degree) || degree < 0 || degree > kMaxShDegree) {
                    throw ParseError("invalid active_sh_degree comment", line_start);
                }
                header.sh_degree = degree;
            }
        } else if (key == "obj_info") {
            continue;
        } else if (key == "element") {
            Element e;
            if (tokens.size() != 3 || !parse_number(tokens[2], e.count)) {
                throw ParseError("malformed element line", line_start);
            }
            e.name = std::string(tokens[1]);
            header.elements.push_back(std::move(e));
        } else if (key == "property") {
            if (header.elements.empty()) {
                throw ParseError("property before any element", line_start);
            }
            if (tokens.size() >= 2 && tokens[1] == "list") {
                throw ParseError("list properties are not supported", line_start);
            }
            if (tokens.size() != 3) throw ParseError("malformed property line", line_start);
            const auto type = parse_scalar_type(tokens[1]);
            if (!type) {
                throw ParseError("unknown property type '" + std::string(tokens[1]) + "'",
                                 line_start);
            }
            auto& e = header.elements.back();
            if (!seen.emplace(e.name + '.' + std::string(tokens[2])).second) {
                throw ParseError("duplicate property '" + std::string(tokens[2]) + "'",
                                 line_start);
            }
            e.properties.push_back({std::string(tokens[2]), *type, e.stride});
            e.stride += scalar_size(*type);
        } else {
            throw ParseError("unexpected header keyword '" + std::string(key) + "'", line_start);
        }
    }
    if (!saw_format) throw ParseError("missing format line", pos);
    header.body_offset = pos;
    return header;
}

double load_scalar(const char* p, ScalarType t) {
    switch (t) {
    case ScalarType::Int8: { std::int8_t v; std::memcpy(&v, p, 1); return v; }
    case ScalarType::UInt8: { std::uint8_t v; std::memcpy(&v, p, 1); return v; }
    case ScalarType::Int16: { std::int16_t v; std::memcpy(&v, p, 2); return v; }
    case ScalarType::UInt16: { std::uint16_t v; std::memcpy(&v, p, 2); return v; }
    case ScalarType::Int32: { std::int32_t v; std::memcpy(&v, p, 4); return v; }
    case ScalarType::UInt32: { std::uint32_t v; std::memcpy(&v, p, 4); return v; }
    case ScalarType::Float32: { float v; std::memcpy(&v, p, 4); return v; }
    case ScalarType::Float64: { double v; std::memcpy(&v, p, 8); return v; }
    }
    return 0.0;
}

double parse_ascii_scalar(std::string_view token, ScalarType t, std::size_t offset) {
    bool ok = false;
    double value = 0.0;
    switch (t) {
    case ScalarType::Float32: {
        float f = 0.0f;
        ok = parse_number(token, f);
        value = f;
        break;
    }
    case ScalarType::Float64: ok = parse_number(token, value); break;
    default: {
        long long i = 0;
        ok = parse_number(token, i);
        value = static_cast<double>(i);
        break;
    }
    }
    if (!ok) {
        throw ParseError("invalid ASCII value '" + std::string(token.substr(0, 32)) + "'", offset);
    }
    return value;
}

/// Property names in file order for the splat schema.
const std::vector<std::string>& schema_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> n = {"x", "y", "z", "nx", "ny", "nz"};
        for (int i = 0; i < 3; ++i) n.push_back("f_dc_" + std::to_string(i));
        for (int i = 0; i < 45; ++i) n.push_back("f_rest_" + std::to_string(i));
        n.push_back("opacity");
        for (int i = 0; i < 3; ++i) n.push_back("scale_" + std::to_string(i));
        for (int i = 0; i < 4; ++i) n.push_back("rot_" + std::to_string(i));
        return n;
    }();
    return names;
}

bool is_optional_property(const std::string& name) {
    return name == "nx" || name == "ny" || name == "nz";
}

/// Fills a splat from its 62 schema values (normals ignored).
Splat splat_from_values(const std::array<double, kSplatPlyPropertyCount>& v) {
    Splat s;
    s.position = Vec3(v[0], v[1], v[2]);
    for (int c = 0; c < 3; ++c) {
        s.sh(c, 0) = v[6 + c];
        for (int k = 1; k < kShCoeffCount; ++k) {
            s.sh(c, k) = v[9 + c * 15 + (k - 1)];
        }
    }
    s.opacity_logit = v[54];
    s.log_scale = Vec3(v[55], v[56], v[57]);
    s.rotation = Vec4(v[58], v[59], v[60], v[61]);
    return s;
}

std::array<float, kSplatPlyPropertyCount> values_from_splat(const Splat& s) {
    std::array<float, kSplatPlyPropertyCount> v{};
    for (int i = 0; i < 3; ++i) v[i] = static_cast<float>(s.position[i]);
    // v[3..5] normals stay zero
    for (int c = 0; c < 3; ++c) {
        v[6 + c] = static_cast<float>(s.sh(c, 0));
        for (int k = 1; k < kShCoeffCount; ++k) {
            v[9 + c * 15 + (k - 1)] = static_cast<float>(s.sh(c, k));
        }
    }
    v[54] = static_cast<float>(s.opacity_logit);
    for (int i = 0; i < 3; ++i) v[55 + i] = static_cast<float>(s.log_scale[i]);
    for (int i = 0; i < 4; ++i) v[58 + i] = static_cast<float>(s.rotation[i]);
    return v;
}

std::string header_text(const SplatCloud& cloud, std::string_view format) {
    std::ostringstream h;
    h << "ply\n"
      << "format " << format << " 1.0\n"
      << "comment active_sh_degree " << cloud.active_sh_degree << "\n"
      << "element vertex " << cloud.size() << "\n";
    for (const auto& name : schema_names()) {
        h << "property float " << name << "\n";
    }
    h << "end_header\n";
    return h.str();
}

} // namespace

SplatCloud read_splat_ply(std::string_view bytes) {
    const Header header = parse_header(bytes);

    // Locate the vertex element and the bytes preceding it.
    std::uint64_t skip_bytes = 0;
    const Element* vertex = nullptr;
    for (const auto& e : header.elements) {
        if (e.name == "vertex") {
            vertex = &e;
            break;
        }
        if (header.format == PlyFormat::Ascii && e.count > 0) {
            throw ParseError("ASCII elements before 'vertex' are not supported",
                             header.body_offset);
        }
        if (e.stride != 0 && e.count > std::numeric_limits<std::uint64_t>::max() / e.stride) {
            throw ParseError("element size overflows", header.body_offset);
        }
        skip_bytes += e.count * e.stride;
    }
    if (!vertex) throw SchemaError("vertex", "element missing");

    std::array<const Property*, kSplatPlyPropertyCount> props{};
    const auto& names = schema_names();
    for (int i = 0; i < kSplatPlyPropertyCount; ++i) {
        const auto it = std::find_if(vertex->properties.begin(), vertex->properties.end(),
                                     [&](const Property& p) { return p.name == names[i]; });
        if (it != vertex->properties.end()) {
            props[i] = &*it;
        } else if (!is_optional_property(names[i])) {
            throw SchemaError(names[i]);
        }
    }

    SplatCloud cloud;
    cloud.active_sh_degree = header.sh_degree.value_or(kMaxShDegree);
    const std::uint64_t count = vertex->count;
    std::array<double, kSplatPlyPropertyCount> values{};

    if (header.format == PlyFormat::BinaryLittleEndian) {
        const std::uint64_t available = bytes.size();
        const std::uint64_t stride = vertex->stride;
        if (stride != 0 && count > (std::numeric_limits<std::uint64_t>::max() - skip_bytes -
                                    header.body_offset) /
                                       stride) {
            throw TruncatedError(std::numeric_limits<std::uint64_t>::max(), available);
        }
        const std::uint64_t expected = header.body_offset + skip_bytes + count * stride;
        if (expected > available) {
            throw TruncatedError(expected, available);
        }
        cloud.splats.reserve(count);
        const char* base = bytes.data() + header.body_offset + skip_bytes;
        for (std::uint64_t i = 0; i < count; ++i) {
            const char* record = base + i * stride;
            for (int k = 0; k < kSplatPlyPropertyCount; ++k) {
                values[k] = props[k] ? load_scalar(record + props[k]->offset, props[k]->type) : 0.0;
            }
            cloud.splats.push_back(splat_from_values(values));
        }
    } else {
        // ASCII: whitespace-separated tokens, one record per vertex.
        std::size_t pos = header.body_offset;
        const std::size_t nprops = vertex->properties.size();
        // Every value needs at least two bytes ("0 "), which bounds the count.
        if (nprops > 0 && count > (bytes.size() - pos) / 2 / nprops + 1) {
            throw TruncatedError(pos + count * nprops * 2, bytes.size());
        }
        std::vector<double> record(nprops);
        auto next_token = [&]() -> std::string_view {
            while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) {
                ++pos;
            }
            const std::size_t start = pos;
            while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
                ++pos;
            }
            if (start == pos) throw TruncatedError(start + 1, bytes.size());
            return bytes.substr(start, pos - start);
        };
        cloud.splats.reserve(count);
        for (std::uint64_t i = 0; i < count; ++i) {
            for (std::size_t p = 0; p < nprops; ++p) {
                const std::size_t at = pos;
                record[p] = parse_ascii_scalar(next_token(), vertex->properties[p].type, at);
            }
            for (int k = 0; k < kSplatPlyPropertyCount; ++k) {
                values[k] = props[k] ? record[props[k] - vertex->properties.data()] : 0.0;
            }
            cloud.splats.push_back(splat_from_values(values));
        }
    }
    return cloud;
}

std::string write_splat_ply(const SplatCloud& cloud) {
    std::string out = header_text(cloud, "binary_little_endian");
    const std::size_t header_size = out.size();
    out.resize(header_size + cloud.size() * kSplatPlyPropertyCount * sizeof(float));
    char* dst = out.data() + header_size;
    for (const auto& s : cloud.splats) {
        const auto v = values_from_splat(s);
        std::memcpy(dst, v.data(), sizeof(v));
        dst += sizeof(v);
    }
    return out;
}

std::string write_splat_ply_ascii(const SplatCloud& cloud) {
    std::string out = header_text(cloud, "ascii");
    std::array<char, 32> buf{};
    for (const auto& s : cloud.splats) {
        const auto v = values_from_splat(s);
        for (int k = 0; k < kSplatPlyPropertyCount; ++k) {
            auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v[k]);
            out.append(buf.data(), ptr);
            out.push_back(k + 1 == kSplatPlyPropertyCount ? '\n' : ' ');
        }
    }
    return out;
}

std::string read_file(const std::filesystem::path& path) {
    std::error_code ec;
    if (!std::filesystem::is_regular_file(path, ec)) {
        throw NotFound("file not found: " + path.string());
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("read failed: " + path.string());
    return std::move(ss).str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

SplatCloud load_splat_ply(const std::filesystem::path& path) {
    return read_splat_ply(read_file(path));
}

void save_splat_ply(const std::filesystem::path& path, const SplatCloud& cloud) {
    write_file(path, write_splat_ply(cloud));
}

} // namespace splatcap

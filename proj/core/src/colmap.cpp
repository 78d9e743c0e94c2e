// Copyright Contributors to the splatcap project
// SPDX-License-Identifier: Apache-2.0
//
#include "splatcap/colmap.hpp"

#include "splatcap/archive.hpp"
#include "splatcap/error.hpp"
#include "splatcap/ply.hpp"

#include <charconv>
#include <cmath>
#include <cstring>
#include <limits>
#include <optional>
#include <string_view>

namespace splatcap {

const char* camera_model_name(CameraModel model) {
    switch (model) {
    case CameraModel::SimplePinhole: return "SIMPLE_PINHOLE";
    case CameraModel::Pinhole: return "PINHOLE";
    case CameraModel::SimpleRadial: return "SIMPLE_RADIAL";
    case CameraModel::Radial: return "RADIAL";
    }
    return "UNKNOWN";
}

int camera_model_param_count(CameraModel model) {
    switch (model) {
    case CameraModel::SimplePinhole: return 3;
    case CameraModel::Pinhole: return 4;
    case CameraModel::SimpleRadial: return 4;
    case CameraModel::Radial: return 5;
    }
    return 0;
}

Camera SparseModel::camera_for(const SparseImage& image) const {
    const auto it = cameras.find(image.camera_id);
    if (it == cameras.end()) {
        throw ReferenceError("image '" + image.name + "' references missing camera " +
                             std::to_string(image.camera_id));
    }
    return camera_from_pose(it->second.intrinsics, image.qvec, image.tvec);
}

namespace {

std::optional<CameraModel> model_from_name(std::string_view name) {
    for (int id = 0; id <= 3; ++id) {
        if (name == camera_model_name(static_cast<CameraModel>(id))) {
            return static_cast<CameraModel>(id);
        }
    }
    return std::nullopt;
}

SparseCamera make_camera(CameraModel model, std::uint64_t width, std::uint64_t height,
                         const std::vector<double>& params, std::uint32_t id,
                         std::vector<std::string>& warnings) {
    constexpr std::uint64_t kMaxDim = 1 << 20;
    if (width < 1 || height < 1 || width > kMaxDim || height > kMaxDim) {
        throw InvalidParameter("camera " + std::to_string(id) + " has invalid image size");
    }
    SparseCamera cam;
    cam.model = model;
    cam.intrinsics.width = static_cast<int>(width);
    cam.intrinsics.height = static_cast<int>(height);
    if (model == CameraModel::Pinhole) {
        cam.intrinsics.fx = params[0];
        cam.intrinsics.fy = params[1];
        cam.intrinsics.cx = params[2];
        cam.intrinsics.cy = params[3];
    } else {
        cam.intrinsics.fx = params[0];
        cam.intrinsics.fy = params[0];
        cam.intrinsics.cx = params[1];
        cam.intrinsics.cy = params[2];
        cam.distortion.assign(params.begin() + 3, params.end());
    }
    if (!(cam.intrinsics.fx > 0.0) || !(cam.intrinsics.fy > 0.0) ||
        !std::isfinite(cam.intrinsics.fx) || !std::isfinite(cam.intrinsics.fy) ||
        !std::isfinite(cam.intrinsics.cx) || !std::isfinite(cam.intrinsics.cy)) {
        throw InvalidParameter("camera " + std::to_string(id) + " has invalid focal length");
    }
    if (!cam.distortion.empty()) {
        warnings.push_back("camera " + std::to_string(id) + " uses " + camera_model_name(model) +
                           "; distortion parameters are ignored");
    }
    return cam;
}

Vec4 checked_quaternion(const Vec4& q, const std::string& image_name, std::uint64_t offset) {
    const double n = q.norm();
    if (!(n > 0.0) || !std::isfinite(n)) {
        throw ParseError("image '" + image_name + "' has an invalid rotation", offset);
    }
    return q / n;
}

// ---------------------------------------------------------------- text ----

struct TextLine {
    std::string_view text;
    std::uint64_t offset;
};

std::vector<TextLine> split_lines(std::string_view bytes) {
    std::vector<TextLine> lines;
    std::size_t pos = 0;
    while (pos < bytes.size()) {
        auto nl = bytes.find('\n', pos);
        if (nl == std::string_view::npos) nl = bytes.size();
        std::string_view line = bytes.substr(pos, nl - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.push_back({line, pos});
        pos = nl + 1;
    }
    return lines;
}

bool is_comment_or_blank(std::string_view line) {
    const auto first = line.find_first_not_of(" \t");
    return first == std::string_view::npos || line[first] == '#';
}

class Tokens {
public:
    Tokens(std::string_view line, std::uint64_t offset, const char* file)
        : mLine(line), mOffset(offset), mFile(file) {}

    std::string_view next() {
        while (mPos < mLine.size() && (mLine[mPos] == ' ' || mLine[mPos] == '\t')) ++mPos;
        const std::size_t start = mPos;
        while (mPos < mLine.size() && mLine[mPos] != ' ' && mLine[mPos] != '\t') ++mPos;
        if (start == mPos) fail("unexpected end of line");
        return mLine.substr(start, mPos - start);
    }

    template <typename T>
    T number() {
        const auto tok = next();
        T value{};
        auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
        if (ec != std::errc() || ptr != tok.data() + tok.size()) {
            fail("invalid number '" + std::string(tok.substr(0, 32)) + "'");
        }
        return value;
    }

    std::string rest() {
        while (mPos < mLine.size() && (mLine[mPos] == ' ' || mLine[mPos] == '\t')) ++mPos;
        auto r = mLine.substr(mPos);
        while (!r.empty() && (r.back() == ' ' || r.back() == '\t')) r.remove_suffix(1);
        if (r.empty()) fail("unexpected end of line");
        mPos = mLine.size();
        return std::string(r);
    }

    bool done() const {
        return mLine.find_first_not_of(" \t", mPos) == std::string_view::npos;
    }

    [[noreturn]] void fail(const std::string& what) const {
        throw ParseError(std::string(mFile) + ": " + what, mOffset + mPos);
    }

private:
    std::string_view mLine;
    std::uint64_t mOffset;
    const char* mFile;
    std::size_t mPos = 0;
};

void parse_cameras_text(std::string_view bytes, SparseModel& model) {
    for (const auto& line : split_lines(bytes)) {
        if (is_comment_or_blank(line.text)) continue;
        Tokens t(line.text, line.offset, "cameras.txt");
        const auto id = t.number<std::uint32_t>();
        const auto name = t.next();
        const auto kind = model_from_name(name);
        if (!kind) {
            throw UnsupportedModel("unsupported camera model '" + std::string(name) +
                                   "' for camera " + std::to_string(id));
        }
        const auto width = t.number<std::uint64_t>();
        const auto height = t.number<std::uint64_t>();
        std::vector<double> params(camera_model_param_count(*kind));
        for (auto& p : params) p = t.number<double>();
        if (!t.done()) t.fail("too many camera parameters");
        if (model.cameras.contains(id)) t.fail("duplicate camera id " + std::to_string(id));
        model.cameras[id] = make_camera(*kind, width, height, params, id, model.warnings);
    }
}

void parse_images_text(std::string_view bytes, SparseModel& model) {
    const auto lines = split_lines(bytes);
    std::size_t i = 0;
    while (i < lines.size()) {
        const auto& line = lines[i++];
        if (is_comment_or_blank(line.text)) continue;
        Tokens t(line.text, line.offset, "images.txt");
        SparseImage img;
        img.id = t.number<std::uint32_t>();
        Vec4 q;
        for (int k = 0; k < 4; ++k) q[k] = t.number<double>();
        for (int k = 0; k < 3; ++k) img.tvec[k] = t.number<double>();
        img.camera_id = t.number<std::uint32_t>();
        img.name = t.rest();
        img.qvec = checked_quaternion(q, img.name, line.offset);
        if (!img.tvec.allFinite()) t.fail("non-finite translation");
        // The second line lists 2D observations; it may be empty but is never a comment.
        if (i < lines.size()) ++i;
        model.images.push_back(std::move(img));
    }
}

void parse_points_text(std::string_view bytes, SparseModel& model) {
    for (const auto& line : split_lines(bytes)) {
        if (is_comment_or_blank(line.text)) continue;
        Tokens t(line.text, line.offset, "points3D.txt");
        SparsePoint p;
        p.id = t.number<std::uint64_t>();
        for (int k = 0; k < 3; ++k) p.xyz[k] = t.number<double>();
        for (int k = 0; k < 3; ++k) {
            const auto c = t.number<unsigned>();
            if (c > 255) t.fail("color component out of range");
            p.rgb[k] = static_cast<std::uint8_t>(c);
        }
        p.error = t.number<double>();
        if (!p.xyz.allFinite()) t.fail("non-finite point");
        // Track entries are not needed for seeding.
        model.points.push_back(p);
    }
}

// -------------------------------------------------------------- binary ----

class Reader {
public:
    Reader(std::string_view bytes, const char* file) : mBytes(bytes), mFile(file) {}

    template <typename T>
    T read() {
        require(sizeof(T));
        T v;
        std::memcpy(&v, mBytes.data() + mPos, sizeof(T));
        mPos += sizeof(T);
        return v;
    }

    std::string read_cstring() {
        const auto end = mBytes.find('\0', mPos);
        if (end == std::string_view::npos) fail("unterminated string");
        std::string s(mBytes.substr(mPos, end - mPos));
        mPos = end + 1;
        return s;
    }

    void skip(std::uint64_t n) {
        require(n);
        mPos += n;
    }

    /// Validates that `count` records of at least `min_record` bytes can fit.
    void check_count(std::uint64_t count, std::uint64_t min_record) const {
        if (count > remaining() / min_record) {
            throw TruncatedError(
                count > std::numeric_limits<std::uint64_t>::max() / min_record
                    ? std::numeric_limits<std::uint64_t>::max()
                    : mPos + count * min_record,
                mBytes.size());
        }
    }

    std::uint64_t remaining() const { return mBytes.size() - mPos; }
    std::uint64_t position() const { return mPos; }

    [[noreturn]] void fail(const std::string& what) const {
        throw ParseError(std::string(mFile) + ": " + what, mPos);
    }

private:
    void require(std::uint64_t n) const {
        if (n > remaining()) throw TruncatedError(mPos + n, mBytes.size());
    }

    std::string_view mBytes;
    const char* mFile;
    std::uint64_t mPos = 0;
};

void parse_cameras_binary(std::string_view bytes, SparseModel& model) {
    Reader r(bytes, "cameras.bin");
    const auto count = r.read<std::uint64_t>();
    r.check_count(count, 4 + 4 + 8 + 8 + 3 * 8);
    for (std::uint64_t i = 0; i < count; ++i) {
        const auto id = r.read<std::uint32_t>();
        const auto model_id = r.read<std::int32_t>();
        if (model_id < 0 || model_id > 3) {
            throw UnsupportedModel("unsupported camera model id " + std::to_string(model_id) +
                                   " for camera " + std::to_string(id));
        }
        const auto kind = static_cast<CameraModel>(model_id);
        const auto width = r.read<std::uint64_t>();
        const auto height = r.read<std::uint64_t>();
        std::vector<double> params(camera_model_param_count(kind));
        for (auto& p : params) p = r.read<double>();
        if (model.cameras.contains(id)) r.fail("duplicate camera id " + std::to_string(id));
        model.cameras[id] = make_camera(kind, width, height, params, id, model.warnings);
    }
    if (r.remaining() != 0) r.fail("trailing bytes");
}

void parse_images_binary(std::string_view bytes, SparseModel& model) {
    Reader r(bytes, "images.bin");
    const auto count = r.read<std::uint64_t>();
    r.check_count(count, 4 + 7 * 8 + 4 + 1 + 8);
    model.images.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        const auto at = r.position();
        SparseImage img;
        img.id = r.read<std::uint32_t>();
        Vec4 q;
        for (int k = 0; k < 4; ++k) q[k] = r.read<double>();
        for (int k = 0; k < 3; ++k) img.tvec[k] = r.read<double>();
        img.camera_id = r.read<std::uint32_t>();
        img.name = r.read_cstring();
        img.qvec = checked_quaternion(q, img.name, at);
        if (!img.tvec.allFinite()) r.fail("non-finite translation");
        const auto observations = r.read<std::uint64_t>();
        r.check_count(observations, 24);
        r.skip(observations * 24);
        model.images.push_back(std::move(img));
    }
    if (r.remaining() != 0) r.fail("trailing bytes");
}

void parse_points_binary(std::string_view bytes, SparseModel& model) {
    Reader r(bytes, "points3D.bin");
    const auto count = r.read<std::uint64_t>();
    r.check_count(count, 8 + 3 * 8 + 3 + 8 + 8);
    model.points.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        SparsePoint p;
        p.id = r.read<std::uint64_t>();
        for (int k = 0; k < 3; ++k) p.xyz[k] = r.read<double>();
        for (int k = 0; k < 3; ++k) p.rgb[k] = r.read<std::uint8_t>();
        p.error = r.read<double>();
        if (!p.xyz.allFinite()) r.fail("non-finite point");
        const auto track = r.read<std::uint64_t>();
        r.check_count(track, 8);
        r.skip(track * 8);
        model.points.push_back(p);
    }
    if (r.remaining() != 0) r.fail("trailing bytes");
}

// -------------------------------------------------------------- writers ---

template <typename T>
void put(std::string& out, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

std::string format_double(double v) {
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), ptr);
}

std::vector<double> camera_params(const SparseCamera& cam) {
    const auto& k = cam.intrinsics;
    std::vector<double> params;
    if (cam.model == CameraModel::Pinhole) {
        params = {k.fx, k.fy, k.cx, k.cy};
    } else {
        params = {k.fx, k.cx, k.cy};
        params.insert(params.end(), cam.distortion.begin(), cam.distortion.end());
    }
    return params;
}

} // namespace

SparseModel parse_colmap_sparse(const SparseFiles& files) {
    auto pick = [&](const char* stem) -> std::pair<const std::string*, bool> {
        const std::string bin = std::string(stem) + ".bin";
        const std::string txt = std::string(stem) + ".txt";
        if (auto it = files.find(bin); it != files.end()) return {&it->second, true};
        if (auto it = files.find(txt); it != files.end()) return {&it->second, false};
        throw NotFound(std::string("sparse model is missing ") + stem + ".txt / " + stem +
                       ".bin");
    };
    const auto [cameras, cameras_bin] = pick("cameras");
    const auto [images, images_bin] = pick("images");
    const auto [points, points_bin] = pick("points3D");

    SparseModel model;
    cameras_bin ? parse_cameras_binary(*cameras, model) : parse_cameras_text(*cameras, model);
    images_bin ? parse_images_binary(*images, model) : parse_images_text(*images, model);
    points_bin ? parse_points_binary(*points, model) : parse_points_text(*points, model);

    for (const auto& img : model.images) {
        if (!model.cameras.contains(img.camera_id)) {
            throw ReferenceError("image '" + img.name + "' references missing camera " +
                                 std::to_string(img.camera_id));
        }
    }
    return model;
}

SparseModel read_colmap_sparse(const std::filesystem::path& path) {
    namespace fs = std::filesystem;
    std::error_code ec;
    SparseFiles files;
    const auto name = path.filename().string();
    if (fs::is_regular_file(path, ec) &&
        (name.ends_with(".tar") || name.ends_with(".tar.gz") || name.ends_with(".tgz"))) {
        for (auto& entry : read_tar(read_file(path))) {
            const auto base = fs::path(entry.path).filename().string();
            if (base.starts_with("cameras.") || base.starts_with("images.") ||
                base.starts_with("points3D.")) {
                files[base] = std::move(entry.data);
            }
        }
        return parse_colmap_sparse(files);
    }
    if (!fs::is_directory(path, ec)) {
        throw NotFound("sparse model directory not found: " + path.string());
    }
    fs::path dir = path;
    auto has_model = [](const fs::path& d) {
        std::error_code e;
        return fs::exists(d / "cameras.bin", e) || fs::exists(d / "cameras.txt", e);
    };
    if (!has_model(dir) && has_model(dir / "0")) dir = dir / "0";
    for (const char* stem : {"cameras", "images", "points3D"}) {
        for (const char* ext : {".bin", ".txt"}) {
            const auto file = dir / (std::string(stem) + ext);
            if (fs::is_regular_file(file, ec)) {
                files[file.filename().string()] = read_file(file);
            }
        }
    }
    return parse_colmap_sparse(files);
}

SparseFiles write_colmap_text(const SparseModel& model) {
    std::string cameras = "# Camera list with one line of data per camera:\n"
                          "#   CAMERA_ID, MODEL, WIDTH, HEIGHT, PARAMS[]\n";
    for (const auto& [id, cam] : model.cameras) {
        cameras += std::to_string(id) + " " + camera_model_name(cam.model) + " " +
                   std::to_string(cam.intrinsics.width) + " " +
                   std::to_string(cam.intrinsics.height);
        for (double p : camera_params(cam)) cameras += " " + format_double(p);
        cameras += "\n";
    }
    std::string images = "# Image list with two lines of data per image:\n"
                         "#   IMAGE_ID, QW, QX, QY, QZ, TX, TY, TZ, CAMERA_ID, NAME\n"
                         "#   POINTS2D[] as (X, Y, POINT3D_ID)\n";
    for (const auto& img : model.images) {
        images += std::to_string(img.id);
        for (int k = 0; k < 4; ++k) images += " " + format_double(img.qvec[k]);
        for (int k = 0; k < 3; ++k) images += " " + format_double(img.tvec[k]);
        images += " " + std::to_string(img.camera_id) + " " + img.name + "\n\n";
    }
    std::string points = "# 3D point list with one line of data per point:\n"
                         "#   POINT3D_ID, X, Y, Z, R, G, B, ERROR, TRACK[]\n";
    for (const auto& p : model.points) {
        points += std::to_string(p.id);
        for (int k = 0; k < 3; ++k) points += " " + format_double(p.xyz[k]);
        for (int k = 0; k < 3; ++k) points += " " + std::to_string(p.rgb[k]);
        points += " " + format_double(p.error) + "\n";
    }
    return {{"cameras.txt", cameras}, {"images.txt", images}, {"points3D.txt", points}};
}

SparseFiles write_colmap_binary(const SparseModel& model) {
    std::string cameras;
    put<std::uint64_t>(cameras, model.cameras.size());
    for (const auto& [id, cam] : model.cameras) {
        put<std::uint32_t>(cameras, id);
        put<std::int32_t>(cameras, static_cast<std::int32_t>(cam.model));
        put<std::uint64_t>(cameras, static_cast<std::uint64_t>(cam.intrinsics.width));
        put<std::uint64_t>(cameras, static_cast<std::uint64_t>(cam.intrinsics.height));
        for (double p : camera_params(cam)) put<double>(cameras, p);
    }
    std::string images;
    put<std::uint64_t>(images, model.images.size());
    for (const auto& img : model.images) {
        put<std::uint32_t>(images, img.id);
        for (int k = 0; k < 4; ++k) put<double>(images, img.qvec[k]);
        for (int k = 0; k < 3; ++k) put<double>(images, img.tvec[k]);
        put<std::uint32_t>(images, img.camera_id);
        images += img.name;
        images.push_back('\0');
        put<std::uint64_t>(images, 0);
    }
    std::string points;
    put<std::uint64_t>(points, model.points.size());
    for (const auto& p : model.points) {
        put<std::uint64_t>(points, p.id);
        for (int k = 0; k < 3; ++k) put<double>(points, p.xyz[k]);
        for (int k = 0; k < 3; ++k) put<std::uint8_t>(points, p.rgb[k]);
        put<double>(points, p.error);
        put<std::uint64_t>(points, 0);
    }
    return {{"cameras.bin", cameras}, {"images.bin", images}, {"points3D.bin", points}};
}

void save_colmap_sparse(const std::filesystem::path& directory, const SparseFiles& files) {
    std::error_code ec;
    std::filesystem::create_directories(directory, ec);
    if (ec) throw IoError("cannot create " + directory.string() + ": " + ec.message());
    for (const auto& [name, bytes] : files) {
        write_file(directory / name, bytes);
    }
}

} // namespace splatcap

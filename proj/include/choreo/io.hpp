#pragma once
#ifndef CHOREO_IO_HPP
#define CHOREO_IO_HPP

#include <bit>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "choreo/beat_prior.hpp"
#include "choreo/core.hpp"
#include "choreo/decoder.hpp"
#include "choreo/kinematics.hpp"

namespace choreo {

using json = nlohmann::json;
namespace fs = std::filesystem;

inline constexpr int kSchemaVersion = 1;
inline constexpr char kModelMagic[8] = {'C', 'H', 'O', 'R', 'E', 'O', 'M', '1'};

inline std::string read_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const fs::path& path, std::string_view bytes)
{
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + path.string());
}

// FNV-1a, 64-bit.
inline std::uint64_t fnv1a64(std::string_view bytes) noexcept
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

inline std::string file_digest(const fs::path& path) { return "fnv1a64:" + hex64(fnv1a64(read_file(path))); }

inline std::size_t line_of(std::string_view text, std::size_t offset)
{
    offset = std::min(offset, text.size());
    return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

inline json parse_json(const std::string& text, const std::string& source)
{
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        const std::size_t offset = e.byte > 0 ? e.byte - 1 : 0;
        throw ParseError(source + ": malformed JSON", line_of(text, offset), offset);
    }
}

inline json load_json(const fs::path& path) { return parse_json(read_file(path), path.string()); }

inline std::string dump_json(const json& j) { return j.dump(1, '\t') + "\n"; }

namespace detail {

inline double number_at(const json& v, const std::string& where)
{
    if (!v.is_number()) throw ParseError("expected a number", where);
    return v.get<double>();
}

inline Matrix matrix_from_json(const json& rows, const std::string& where)
{
    if (!rows.is_array()) throw ParseError("expected an array of rows", where);
    const std::size_t n = rows.size();
    std::size_t width = 0;
    std::vector<double> data;
    for (std::size_t r = 0; r < n; ++r) {
        const std::string at = where + "/" + std::to_string(r);
        const json& row = rows[r];
        if (!row.is_array()) throw ParseError("expected a row array", at);
        if (r == 0) width = row.size();
        if (row.size() != width)
            throw ParseError("row has " + std::to_string(row.size()) + " values, expected " + std::to_string(width), at);
        for (std::size_t c = 0; c < row.size(); ++c) data.push_back(number_at(row[c], at + "/" + std::to_string(c)));
    }
    return Matrix(n, width, std::move(data));
}

inline json matrix_to_json(const Matrix& m)
{
    json rows = json::array();
    for (std::size_t r = 0; r < m.rows(); ++r) rows.push_back(std::vector<double>(m.row(r).begin(), m.row(r).end()));
    return rows;
}

inline void check_schema(const json& j, const std::string& source)
{
    if (j.contains("schema") && j["schema"] != kSchemaVersion)
        throw ParseError(source + ": unsupported schema " + j["schema"].dump(), "/schema");
}

} // namespace detail

// Numeric CSV, one frame per line; a non-numeric first line is taken as a header.
inline Matrix parse_csv_matrix(const std::string& text, const std::string& source)
{
    std::vector<double> data;
    std::size_t width = 0, rows = 0, pos = 0, line_no = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        std::string_view line(text.data() + pos, end - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        ++line_no;
        const std::size_t line_start = pos;
        pos = end + 1;
        if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
        std::vector<double> row;
        std::size_t col_start = 0;
        bool header = false;
        while (true) {
            std::size_t comma = line.find(',', col_start);
            if (comma == std::string_view::npos) comma = line.size();
            std::string_view cell = line.substr(col_start, comma - col_start);
            while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
            while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t')) cell.remove_suffix(1);
            double v = 0.0;
            const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (ec != std::errc() || ptr != cell.data() + cell.size()) {
                if (rows == 0 && row.empty() && data.empty()) {
                    header = true;
                    break;
                }
                throw ParseError(source + ": bad number '" + std::string(cell) + "'", line_no, line_start + col_start);
            }
            row.push_back(v);
            if (comma == line.size()) break;
            col_start = comma + 1;
        }
        if (header) continue;
        if (rows == 0) width = row.size();
        if (row.size() != width)
            throw ParseError(source + ": row has " + std::to_string(row.size()) + " columns, expected " + std::to_string(width),
                             line_no, line_start);
        data.insert(data.end(), row.begin(), row.end());
        ++rows;
    }
    return Matrix(rows, width, std::move(data));
}

// Music features from CSV (by extension) or JSON: a bare row array or {"fps", "frames"}.
inline MusicFeatures load_music_features(const fs::path& path)
{
    MusicFeatures mf;
    if (path.extension() == ".csv") {
        mf.frames = parse_csv_matrix(read_file(path), path.string());
    } else {
        const json j = load_json(path);
        if (j.is_object()) {
            detail::check_schema(j, path.string());
            if (!j.contains("frames")) throw ParseError(path.string() + ": missing frames", "/frames");
            mf.frames = detail::matrix_from_json(j["frames"], "/frames");
            if (j.contains("fps")) mf.fps = detail::number_at(j["fps"], "/fps");
        } else {
            mf.frames = detail::matrix_from_json(j, "");
        }
    }
    mf.validate();
    return mf;
}

inline json music_to_json(const MusicFeatures& mf)
{
    return {{"schema", kSchemaVersion}, {"fps", mf.fps}, {"dims", mf.frames.cols()}, {"frames", detail::matrix_to_json(mf.frames)}};
}

// A bare number array or an object with "values" (beat masks and priors).
inline std::vector<double> values_from_json(const json& j, const std::string& source)
{
    const json* arr = &j;
    if (j.is_object()) {
        detail::check_schema(j, source);
        if (!j.contains("values")) throw ParseError(source + ": missing values", "/values");
        arr = &j["values"];
    }
    if (!arr->is_array()) throw ParseError(source + ": expected a number array", "/values");
    std::vector<double> out;
    out.reserve(arr->size());
    for (std::size_t i = 0; i < arr->size(); ++i) out.push_back(detail::number_at((*arr)[i], "/values/" + std::to_string(i)));
    return out;
}

inline json prior_to_json(const BeatPrior& p)
{
    return {{"schema", kSchemaVersion}, {"alpha", p.alpha}, {"values", p.values}};
}

inline json mask_to_json(const BeatMask& m)
{
    std::vector<int> v(m.mask.begin(), m.mask.end());
    return {{"schema", kSchemaVersion}, {"values", v}};
}

inline json motion_to_json(const MotionSequence& m)
{
    return {{"schema", kSchemaVersion}, {"fps", m.fps}, {"dims", m.dims()}, {"frames", detail::matrix_to_json(m.frames)}};
}

inline MotionSequence motion_from_json(const json& j, const std::string& source, std::vector<std::string>* warnings = nullptr)
{
    if (!j.is_object()) throw ParseError(source + ": motion file must be a JSON object", "");
    detail::check_schema(j, source);
    for (const char* key : {"fps", "dims", "frames"})
        if (!j.contains(key)) throw ParseError(source + ": missing field '" + key + "'", std::string("/") + key);
    MotionSequence m;
    m.fps = detail::number_at(j["fps"], "/fps");
    if (!(m.fps > 0.0)) throw ParseError(source + ": fps must be positive", "/fps");
    if (!j["dims"].is_number_unsigned()) throw ParseError(source + ": dims must be a non-negative integer", "/dims");
    const auto dims = j["dims"].get<std::size_t>();
    m.frames = detail::matrix_from_json(j["frames"], "/frames");
    if (m.frames.rows() > 0 && m.frames.cols() != dims)
        throw ParseError(source + ": dims is " + std::to_string(dims) + " but rows have " + std::to_string(m.frames.cols()) + " values",
                         "/frames/0");
    if (m.frames.rows() == 0) m.frames = Matrix(0, dims);
    if (!m.frames.all_finite()) throw ParseError(source + ": non-finite motion values", "/frames");
    if (m.fps != kDefaultFps && warnings)
        warnings->push_back(source + ": fps is " + json(m.fps).dump() + ", the pipeline assumes 30");
    return m;
}

inline MotionSequence load_motion(const fs::path& path, std::vector<std::string>* warnings = nullptr)
{
    return motion_from_json(load_json(path), path.string(), warnings);
}

inline void save_motion(const fs::path& path, const MotionSequence& m) { write_file(path, dump_json(motion_to_json(m))); }

inline json skeleton_to_json(const Skeleton& s)
{
    json offsets = json::array();
    for (const auto& o : s.offsets) offsets.push_back({o[0], o[1], o[2]});
    json pairs = json::array();
    for (auto [a, b] : s.mirror_pairs) pairs.push_back({a, b});
    return {{"schema", kSchemaVersion}, {"joint_names", s.joint_names}, {"parents", s.parents},
            {"offsets", offsets},       {"foot_joints", s.foot_joints}, {"mirror_pairs", pairs}};
}

inline Skeleton skeleton_from_json(const json& j, const std::string& source)
{
    if (!j.is_object()) throw ParseError(source + ": skeleton file must be a JSON object", "");
    detail::check_schema(j, source);
    Skeleton s;
    try {
        s.joint_names = j.at("joint_names").get<std::vector<std::string>>();
        s.parents = j.at("parents").get<std::vector<int>>();
        for (const auto& o : j.at("offsets")) s.offsets.push_back({o.at(0).get<double>(), o.at(1).get<double>(), o.at(2).get<double>()});
        s.foot_joints = j.at("foot_joints").get<std::vector<std::size_t>>();
        for (const auto& p : j.at("mirror_pairs")) s.mirror_pairs.emplace_back(p.at(0).get<std::size_t>(), p.at(1).get<std::size_t>());
    } catch (const json::exception& e) {
        throw ParseError(source + ": " + e.what(), "");
    }
    s.validate();
    return s;
}

inline Skeleton load_skeleton(const fs::path& path) { return skeleton_from_json(load_json(path), path.string()); }

inline json config_to_json(const DecoderConfig& c)
{
    return {{"width", c.width},
            {"blocks", c.blocks},
            {"groups", c.groups},
            {"ffn_expand", c.ffn_expand},
            {"motion_dim", c.motion_dim},
            {"music_dim", c.music_dim},
            {"state_dim", c.state_dim},
            {"diffusion_steps", c.diffusion_steps},
            {"spatial_block_enabled", c.spatial_block_enabled},
            {"spatial_frames", c.spatial_frames},
            {"cmm_bidirectional", c.cmm_bidirectional}};
}

inline DecoderConfig config_from_json(const json& j)
{
    DecoderConfig c;
    try {
        c.width = j.at("width").get<std::size_t>();
        c.blocks = j.at("blocks").get<std::size_t>();
        c.groups = j.at("groups").get<std::size_t>();
        c.ffn_expand = j.at("ffn_expand").get<std::size_t>();
        c.motion_dim = j.at("motion_dim").get<std::size_t>();
        c.music_dim = j.at("music_dim").get<std::size_t>();
        c.state_dim = j.at("state_dim").get<std::size_t>();
        c.diffusion_steps = j.at("diffusion_steps").get<std::size_t>();
        c.spatial_block_enabled = j.at("spatial_block_enabled").get<bool>();
        c.spatial_frames = j.at("spatial_frames").get<std::size_t>();
        c.cmm_bidirectional = j.at("cmm_bidirectional").get<bool>();
    } catch (const json::exception& e) {
        throw ParseError(std::string("model config: ") + e.what(), "/config");
    }
    c.validate();
    return c;
}

namespace detail {

inline void put_u64(std::string& out, std::uint64_t v)
{
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint64_t get_u64(std::string_view in)
{
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[i])) << (8 * i);
    return v;
}

inline void put_f32(std::string& out, double v)
{
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

inline double get_f32(const char* p)
{
    std::uint32_t bits = 0;
    for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
    return static_cast<double>(std::bit_cast<float>(bits));
}

} // namespace detail

// Layout: 8-byte magic, little-endian u64 header length, JSON header (config + tensor
// table), then every tensor as little-endian float32 in table order.
inline std::string serialize_model(DanceDecoder& model)
{
    json tensors = json::array();
    std::string payload;
    std::size_t offset = 0;
    model.visit([&](const std::string& name, Matrix& m, bool trainable) {
        tensors.push_back({{"name", name}, {"shape", {m.rows(), m.cols()}}, {"offset", offset}, {"trainable", trainable}});
        for (double v : m.flat()) detail::put_f32(payload, v);
        offset += m.size();
    });
    const json header = {{"schema", kSchemaVersion}, {"kind", "dance_decoder"}, {"config", config_to_json(model.config())},
                         {"dtype", "float32-le"}, {"tensors", tensors}};
    const std::string h = header.dump();
    std::string out(kModelMagic, sizeof kModelMagic);
    detail::put_u64(out, h.size());
    out += h;
    out += payload;
    return out;
}

inline DanceDecoder deserialize_model(std::string_view bytes, const std::string& source)
{
    if (bytes.size() < 16 || std::memcmp(bytes.data(), kModelMagic, sizeof kModelMagic) != 0)
        throw ParseError(source + ": not a model file", 1, 0);
    const std::uint64_t hlen = detail::get_u64(bytes.substr(8, 8));
    if (hlen > bytes.size() - 16) throw ParseError(source + ": truncated header", 1, 8);
    const json header = parse_json(std::string(bytes.substr(16, hlen)), source + " header");
    detail::check_schema(header, source);
    if (!header.contains("config") || !header.contains("tensors")) throw ParseError(source + ": incomplete header", "/");
    DanceDecoder model(config_from_json(header["config"]));
    const std::string_view payload = bytes.substr(16 + hlen);
    const json& table = header["tensors"];
    std::size_t idx = 0;
    model.visit([&](const std::string& name, Matrix& m, bool) {
        const std::string at = "/tensors/" + std::to_string(idx);
        if (idx >= table.size()) throw ParseError(source + ": tensor table too short", at);
        const json& t = table[idx++];
        if (t.value("name", "") != name) throw ParseError(source + ": expected tensor " + name, at);
        const auto shape = t.at("shape").get<std::vector<std::size_t>>();
        if (shape.size() != 2 || shape[0] != m.rows() || shape[1] != m.cols())
            throw ParseError(source + ": shape mismatch for " + name, at);
        const auto off = t.at("offset").get<std::size_t>();
        if ((off + m.size()) * 4 > payload.size()) throw ParseError(source + ": payload truncated at " + name, at);
        for (std::size_t i = 0; i < m.size(); ++i) m.flat()[i] = detail::get_f32(payload.data() + 4 * (off + i));
    });
    if (idx != table.size()) throw ParseError(source + ": unexpected extra tensors", "/tensors");
    return model;
}

inline void save_model(const fs::path& path, DanceDecoder& model) { write_file(path, serialize_model(model)); }

inline DanceDecoder load_model(const fs::path& path) { return deserialize_model(read_file(path), path.string()); }

struct FileRecord {
    std::string path;
    std::string digest;
};

struct RunManifest {
    std::string tool = "choreo";
    std::string version;
    std::string command;
    json config = json::object();
    std::uint64_t seed = 0;
    std::vector<FileRecord> inputs;
    std::vector<FileRecord> outputs;

    void add_input(const fs::path& p) { inputs.push_back({p.string(), file_digest(p)}); }
    void add_output(const fs::path& p) { outputs.push_back({p.string(), file_digest(p)}); }

    json to_json() const
    {
        auto files = [](const std::vector<FileRecord>& v) {
            json a = json::array();
            for (const auto& f : v) a.push_back({{"path", f.path}, {"digest", f.digest}});
            return a;
        };
        return {{"schema", kSchemaVersion}, {"tool", tool},     {"version", version},       {"command", command},
                {"config", config},         {"seed", seed},     {"inputs", files(inputs)}, {"outputs", files(outputs)}};
    }
};

} // namespace choreo

#endif // CHOREO_IO_HPP

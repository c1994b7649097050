#include "csscan/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace csscan {

namespace {

void append_u32le(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}

std::uint32_t read_u32le(const std::string& s, std::size_t off) {
    return static_cast<std::uint8_t>(s[off]) |
           (static_cast<std::uint32_t>(static_cast<std::uint8_t>(s[off + 1])) << 8) |
           (static_cast<std::uint32_t>(static_cast<std::uint8_t>(s[off + 2])) << 16) |
           (static_cast<std::uint32_t>(static_cast<std::uint8_t>(s[off + 3])) << 24);
}

void append_f32le(std::string& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    append_u32le(out, bits);
}

float read_f32le(const std::string& s, std::size_t off) {
    const std::uint32_t bits = read_u32le(s, off);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

void append_f64le(std::string& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    append_u32le(out, static_cast<std::uint32_t>(bits & 0xffffffffull));
    append_u32le(out, static_cast<std::uint32_t>(bits >> 32));
}

double read_f64le(const std::string& s, std::size_t off) {
    const std::uint64_t lo = read_u32le(s, off);
    const std::uint64_t hi = read_u32le(s, off + 4);
    const std::uint64_t bits = lo | (hi << 32);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open file: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return std::move(ss).str();
}

/// Reads one whitespace-delimited PNM header token, skipping '#' comments.
std::string pnm_token(const std::string& s, std::size_t& pos) {
    while (pos < s.size()) {
        if (std::isspace(static_cast<unsigned char>(s[pos]))) {
            ++pos;
        } else if (s[pos] == '#') {
            while (pos < s.size() && s[pos] != '\n') ++pos;
        } else {
            break;
        }
    }
    std::size_t start = pos;
    while (pos < s.size() && !std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    if (start == pos) throw ValidationError("truncated PNM header");
    return s.substr(start, pos - start);
}

int parse_int(const std::string& tok, const char* what) {
    int v = 0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || p != tok.data() + tok.size())
        throw ValidationError(std::string("bad ") + what + ": " + tok);
    return v;
}

}  // namespace

std::string format_double(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) throw NumericalError("cannot format double");
    return std::string(buf, p);
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ValidationError("cannot write file: " + tmp.string());
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!out) throw ValidationError("short write: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

void write_pgm(const Image& image, const std::filesystem::path& path, int bits) {
    if (bits != 8 && bits != 16) throw ValidationError("PGM bit depth must be 8 or 16");
    image.validate_finite();
    const int maxval = (1 << bits) - 1;
    std::string out = "P5\n" + std::to_string(image.width) + " " +
                      std::to_string(image.height) + "\n" + std::to_string(maxval) + "\n";
    out.reserve(out.size() + image.size() * (bits / 8));
    for (double v : image.data) {
        const double clamped = std::clamp(v, 0.0, 1.0);
        const int q = static_cast<int>(std::lround(clamped * maxval));
        if (bits == 8) {
            out.push_back(static_cast<char>(q));
        } else {
            out.push_back(static_cast<char>((q >> 8) & 0xff));  // big-endian per Netpbm
            out.push_back(static_cast<char>(q & 0xff));
        }
    }
    write_file_atomic(path, out);
}

Image read_pgm(const std::filesystem::path& path) {
    const std::string s = read_file(path);
    std::size_t pos = 0;
    if (pnm_token(s, pos) != "P5") throw ValidationError("not a binary PGM (P5): " + path.string());
    const int width = parse_int(pnm_token(s, pos), "PGM width");
    const int height = parse_int(pnm_token(s, pos), "PGM height");
    const int maxval = parse_int(pnm_token(s, pos), "PGM maxval");
    if (width < 1 || height < 1 || maxval < 1 || maxval > 65535)
        throw ValidationError("bad PGM dimensions/maxval");
    ++pos;  // single whitespace after maxval
    const int bytes = maxval > 255 ? 2 : 1;
    const std::size_t need = static_cast<std::size_t>(width) * height * bytes;
    if (s.size() - pos < need) throw ValidationError("truncated PGM raster");

    Image img(height, width);
    img.peak = static_cast<double>(maxval);
    for (std::size_t i = 0; i < img.size(); ++i) {
        int q;
        if (bytes == 1) {
            q = static_cast<std::uint8_t>(s[pos + i]);
        } else {
            q = (static_cast<std::uint8_t>(s[pos + 2 * i]) << 8) |
                static_cast<std::uint8_t>(s[pos + 2 * i + 1]);
        }
        img.data[i] = static_cast<double>(q) / maxval;
    }
    return img;
}

void write_raw_image(const Image& image, const std::filesystem::path& path) {
    image.validate_finite();
    std::string out = "CSIM";
    append_u32le(out, static_cast<std::uint32_t>(image.height));
    append_u32le(out, static_cast<std::uint32_t>(image.width));
    append_u32le(out, 0);
    out.reserve(16 + image.size() * 4);
    for (double v : image.data) append_f32le(out, static_cast<float>(v));
    write_file_atomic(path, out);
}

Image read_raw_image(const std::filesystem::path& path) {
    const std::string s = read_file(path);
    if (s.size() < 16 || s.compare(0, 4, "CSIM") != 0)
        throw ValidationError("not a CSIM raw image: " + path.string());
    const std::uint32_t height = read_u32le(s, 4);
    const std::uint32_t width = read_u32le(s, 8);
    if (height < 1 || width < 1) throw ValidationError("bad raw image dimensions");
    const std::size_t need = 16 + static_cast<std::size_t>(height) * width * 4;
    if (s.size() < need) throw ValidationError("truncated raw image");
    Image img(static_cast<int>(height), static_cast<int>(width));
    for (std::size_t i = 0; i < img.size(); ++i)
        img.data[i] = static_cast<double>(read_f32le(s, 16 + 4 * i));
    return img;
}

Image read_image_any(const std::filesystem::path& path) {
    const auto ext = path.extension().string();
    if (ext == ".pgm") return read_pgm(path);
    if (ext == ".raw") return read_raw_image(path);
    throw ValidationError("unknown image extension (want .pgm or .raw): " + path.string());
}

void write_pbm(const Mask& mask, const std::filesystem::path& path) {
    std::string out =
        "P4\n" + std::to_string(mask.width) + " " + std::to_string(mask.height) + "\n";
    const int row_bytes = (mask.width + 7) / 8;
    for (int r = 0; r < mask.height; ++r) {
        for (int byte = 0; byte < row_bytes; ++byte) {
            std::uint8_t packed = 0;
            for (int bit = 0; bit < 8; ++bit) {
                const int c = byte * 8 + bit;
                if (c < mask.width && mask.at(r, c)) packed |= (0x80 >> bit);
            }
            out.push_back(static_cast<char>(packed));
        }
    }
    write_file_atomic(path, out);
}

Mask read_pbm(const std::filesystem::path& path) {
    const std::string s = read_file(path);
    std::size_t pos = 0;
    if (pnm_token(s, pos) != "P4") throw ValidationError("not a binary PBM (P4): " + path.string());
    const int width = parse_int(pnm_token(s, pos), "PBM width");
    const int height = parse_int(pnm_token(s, pos), "PBM height");
    if (width < 1 || height < 1) throw ValidationError("bad PBM dimensions");
    ++pos;
    const int row_bytes = (width + 7) / 8;
    if (s.size() - pos < static_cast<std::size_t>(row_bytes) * height)
        throw ValidationError("truncated PBM raster");
    Mask mask(height, width, false);
    for (int r = 0; r < height; ++r)
        for (int c = 0; c < width; ++c) {
            const std::uint8_t byte =
                static_cast<std::uint8_t>(s[pos + static_cast<std::size_t>(r) * row_bytes + c / 8]);
            mask.set(r, c, (byte >> (7 - c % 8)) & 1);
        }
    return mask;
}

void write_mask_index_list(const Mask& mask, const std::filesystem::path& path) {
    std::string out = std::to_string(mask.height) + " " + std::to_string(mask.width) + "\n";
    for (int r = 0; r < mask.height; ++r)
        for (int c = 0; c < mask.width; ++c)
            if (mask.at(r, c))
                out += std::to_string(r) + "," + std::to_string(c) + "\n";
    write_file_atomic(path, out);
}

Mask read_mask_index_list(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open mask list: " + path.string());
    int height = 0, width = 0;
    if (!(in >> height >> width) || height < 1 || width < 1)
        throw ValidationError("bad mask list header (want 'height width')");
    Mask mask(height, width, false);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw ValidationError("bad mask list entry: " + line);
        const int r = parse_int(line.substr(0, comma), "mask row");
        const int c = parse_int(line.substr(comma + 1), "mask col");
        if (r < 0 || r >= height || c < 0 || c >= width)
            throw ValidationError("mask list position out of bounds: " + line);
        mask.set(r, c, true);
    }
    return mask;
}

Mask read_mask_any(const std::filesystem::path& path) {
    const auto ext = path.extension().string();
    if (ext == ".pbm") return read_pbm(path);
    if (ext == ".txt") return read_mask_index_list(path);
    throw ValidationError("unknown mask extension (want .pbm or .txt): " + path.string());
}

void write_plan(const SamplingPlan& plan, const std::filesystem::path& path) {
    std::string out = std::to_string(plan.height) + " " + std::to_string(plan.width) + " " +
                      std::to_string(plan.positions.size()) + " " +
                      format_double(plan.dwell_time_us) + " " + scheme_name(plan.scheme) + " " +
                      std::to_string(plan.seed) + "\n";
    for (auto [r, c] : plan.positions) out += std::to_string(r) + "," + std::to_string(c) + "\n";
    write_file_atomic(path, out);
}

SamplingPlan read_plan(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open plan: " + path.string());
    SamplingPlan plan;
    std::size_t m = 0;
    std::string scheme;
    if (!(in >> plan.height >> plan.width >> m >> plan.dwell_time_us >> scheme >> plan.seed))
        throw ValidationError("bad plan header (want 'H W M t_d scheme seed')");
    plan.scheme = scheme_from_name(scheme);
    std::string line;
    std::getline(in, line);
    plan.positions.reserve(m);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw ValidationError("bad plan entry: " + line);
        plan.positions.emplace_back(parse_int(line.substr(0, comma), "plan row"),
                                    parse_int(line.substr(comma + 1), "plan col"));
    }
    if (plan.positions.size() != m)
        throw ValidationError("plan position count does not match header");
    plan.validate();
    return plan;
}

void write_dictionary_snapshot(const BpfaState& state, const std::filesystem::path& path) {
    const int K = state.atom_count();
    const int px = state.patch_pixels();
    const int B = static_cast<int>(std::lround(std::sqrt(static_cast<double>(px))));
    std::string out = "BPFA";
    append_u32le(out, static_cast<std::uint32_t>(K));
    append_u32le(out, static_cast<std::uint32_t>(B));
    append_f64le(out, state.gamma_n);
    append_f64le(out, state.gamma_w);
    for (int k = 0; k < K; ++k)
        for (int p = 0; p < px; ++p) append_f64le(out, state.dictionary(p, k));
    for (int k = 0; k < K; ++k) append_f64le(out, state.pi[k]);
    write_file_atomic(path, out);
}

BpfaState read_dictionary_snapshot(const std::filesystem::path& path) {
    const std::string s = read_file(path);
    if (s.size() < 28 || s.compare(0, 4, "BPFA") != 0)
        throw ValidationError("not a BPFA snapshot: " + path.string());
    const std::uint32_t K = read_u32le(s, 4);
    const std::uint32_t B = read_u32le(s, 8);
    if (K < 1 || B < 1) throw ValidationError("bad snapshot header");
    const std::size_t px = static_cast<std::size_t>(B) * B;
    const std::size_t need = 28 + 8 * (px * K + K);
    if (s.size() < need) throw ValidationError("truncated snapshot");

    BpfaState state;
    state.gamma_n = read_f64le(s, 12);
    state.gamma_w = read_f64le(s, 20);
    state.dictionary.resize(static_cast<Eigen::Index>(px), K);
    std::size_t off = 28;
    for (std::uint32_t k = 0; k < K; ++k)
        for (std::size_t p = 0; p < px; ++p, off += 8)
            state.dictionary(static_cast<Eigen::Index>(p), k) = read_f64le(s, off);
    state.pi.resize(K);
    for (std::uint32_t k = 0; k < K; ++k, off += 8) state.pi[k] = read_f64le(s, off);
    return state;
}

void write_trace_csv(const Trace& trace, const std::filesystem::path& path) {
    std::string out = "epoch,objective,active_atoms,mean_pi,wall_ms\n";
    for (const auto& row : trace) {
        out += std::to_string(row.epoch) + "," + format_double(row.objective) + "," +
               std::to_string(row.active_atoms) + "," + format_double(row.mean_pi) + "," +
               format_double(row.wall_ms) + "\n";
    }
    write_file_atomic(path, out);
}

void Manifest::set(const std::string& key, const std::string& value) {
    for (auto& [k, v] : entries_) {
        if (k == key) {
            v = value;
            return;
        }
    }
    entries_.emplace_back(key, value);
}

void Manifest::set(const std::string& key, double value) { set(key, format_double(value)); }
void Manifest::set(const std::string& key, std::uint64_t value) { set(key, std::to_string(value)); }
void Manifest::set(const std::string& key, int value) { set(key, std::to_string(value)); }

const std::string& Manifest::get(const std::string& key) const {
    for (auto& [k, v] : entries_)
        if (k == key) return v;
    throw ValidationError("manifest key missing: " + key);
}

bool Manifest::has(const std::string& key) const {
    for (auto& [k, v] : entries_)
        if (k == key) return true;
    return false;
}

void Manifest::write(const std::filesystem::path& path) const {
    std::string out;
    for (auto& [k, v] : entries_) out += k + "=" + v + "\n";
    write_file_atomic(path, out);
}

Manifest Manifest::read(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open manifest: " + path.string());
    Manifest m;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ValidationError("bad manifest line: " + line);
        m.set(line.substr(0, eq), line.substr(eq + 1));
    }
    return m;
}

}  // namespace csscan

#ifndef CSSCAN_IO_HPP
#define CSSCAN_IO_HPP

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "csscan/bpfa.hpp"
#include "csscan/image.hpp"
#include "csscan/sampling.hpp"

namespace csscan {

/// Formats a double with shortest round-trip representation (to_chars), so
/// serialized values reparse exactly and files are byte-stable across runs.
std::string format_double(double v);

/// Atomic file write: writes to <path>.tmp in the same directory, then
/// renames over the target.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

// ---- images ----

/// Binary PGM (P5), 8- or 16-bit (16-bit samples big-endian, per Netpbm).
/// Writing quantizes normalized intensities by (2^bits - 1); values are
/// clamped to [0,1] first. Reading divides by maxval and records it in
/// Image::peak.
void write_pgm(const Image& image, const std::filesystem::path& path, int bits = 8);
Image read_pgm(const std::filesystem::path& path);

/// Raw float image: 16-byte header (magic "CSIM", u32 height, u32 width,
/// u32 reserved, little-endian), then height*width little-endian f32,
/// row-major.
void write_raw_image(const Image& image, const std::filesystem::path& path);
Image read_raw_image(const std::filesystem::path& path);

/// Loads .pgm or .raw by extension.
Image read_image_any(const std::filesystem::path& path);

// ---- masks ----

/// Binary PBM (P4), rows bit-packed MSB-first; a 1 bit marks a sampled pixel.
void write_pbm(const Mask& mask, const std::filesystem::path& path);
Mask read_pbm(const std::filesystem::path& path);

/// Plain-text index list: "height width" header line, then one "row,col" per
/// sampled pixel.
void write_mask_index_list(const Mask& mask, const std::filesystem::path& path);
Mask read_mask_index_list(const std::filesystem::path& path);

/// Loads .pbm or .txt by extension.
Mask read_mask_any(const std::filesystem::path& path);

// ---- plans ----

/// Plan text format: header "H W M t_d scheme seed", then one "row,col" per
/// position in traversal order.
void write_plan(const SamplingPlan& plan, const std::filesystem::path& path);
SamplingPlan read_plan(const std::filesystem::path& path);

// ---- dictionary snapshots ----

/// Snapshot layout: magic "BPFA", u32 K, u32 B, f64 gamma_n, f64 gamma_w,
/// then K*B^2 little-endian f64 atom values (atom-major), then K f64 pi.
void write_dictionary_snapshot(const BpfaState& state, const std::filesystem::path& path);
BpfaState read_dictionary_snapshot(const std::filesystem::path& path);

// ---- traces & manifests ----

void write_trace_csv(const Trace& trace, const std::filesystem::path& path);

/// Ordered key=value manifest, one pair per line.
class Manifest {
public:
    void set(const std::string& key, const std::string& value);
    void set(const std::string& key, double value);
    void set(const std::string& key, std::uint64_t value);
    void set(const std::string& key, int value);
    const std::string& get(const std::string& key) const;
    bool has(const std::string& key) const;
    void write(const std::filesystem::path& path) const;
    static Manifest read(const std::filesystem::path& path);

private:
    std::vector<std::pair<std::string, std::string>> entries_;
};

}  // namespace csscan

#endif

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "segrank/errors.hpp"

namespace segrank::io {

/// Subset of the 348-byte NIfTI-1 header this library cares about.
/// Orientation (qform/sform) is parsed past but ignored: reference and
/// prediction are expected voxel-aligned on the same grid, and a grid
/// mismatch is a hard error rather than a resampling trigger.
struct NiftiHeader {
    std::int32_t header_size = 348;
    std::array<std::int32_t, 3> dim{};
    std::int16_t datatype_code = 0;
    std::array<double, 3> voxel_spacing{};
    float scale_slope = 0.0f;
    float scale_intercept = 0.0f;
    std::array<char, 4> magic{};
    bool byte_swapped = false;
};

// NIfTI-1 datatype codes accepted on read. Written files are always uint8.
inline constexpr std::int16_t kDtUint8 = 2;
inline constexpr std::int16_t kDtInt16 = 4;
inline constexpr std::int16_t kDtInt32 = 8;
inline constexpr std::int16_t kDtFloat32 = 16;

/// Ordered label dictionary. Codes are unique and the background code is
/// always a member.
struct LabelScheme {
    struct Entry {
        int code;
        std::string name;
    };
    std::vector<Entry> entries;
    int background_code = 0;

    bool contains(int code) const;
    const Entry* find(int code) const;
    /// Non-background codes in entry order.
    std::vector<int> foreground_codes() const;

    /// Default 8-entry scheme: background plus the seven fetal tissue
    /// classes. The numeric assignment is a convention of this library,
    /// not of the data format; override via a scheme file when your
    /// dataset differs.
    static LabelScheme fetal_tissue_default();
};

/// Dense 3D label map, x-fastest voxel order. Codes are stored as uint8
/// to match the on-disk write format; wider integer inputs are accepted
/// on read as long as every value fits.
struct LabelVolume {
    std::array<std::int32_t, 3> dims{};
    std::array<double, 3> spacing{1.0, 1.0, 1.0};
    std::vector<std::uint8_t> voxels;

    std::int64_t voxel_count() const {
        return static_cast<std::int64_t>(dims[0]) * dims[1] * dims[2];
    }
    std::int64_t index(int x, int y, int z) const {
        return x + static_cast<std::int64_t>(dims[0]) * (y + static_cast<std::int64_t>(dims[1]) * z);
    }
    std::uint8_t at(int x, int y, int z) const { return voxels[index(x, y, z)]; }

    bool same_grid(const LabelVolume& other) const { return dims == other.dims; }
};

struct ValidationIssue {
    int code;
    std::int64_t count;
};
/// Offending codes with counts; empty means every voxel is in the scheme.
using ValidationReport = std::vector<ValidationIssue>;

/// Parse a NIfTI-1 stream (plain or gzip; gzip detected by its 1f 8b
/// prefix). Little- and big-endian headers are both handled, detected via
/// the header_size field. Integer payloads are read directly; float32
/// payloads are accepted only when every value is integral after
/// slope/intercept scaling.
LabelVolume parse_nifti(std::span<const std::uint8_t> bytes);

LabelVolume read_nifti(const std::filesystem::path& path);

ValidationReport validate_labels(const LabelVolume& volume, const LabelScheme& scheme);

/// Serialize as a single-file NIfTI-1 (.nii) byte stream, uint8 payload,
/// little-endian. Spacing is narrowed to float32, the header's pixdim
/// width; everything else round-trips exactly.
std::vector<std::uint8_t> nifti_bytes(const LabelVolume& volume);

/// Write .nii, or .nii.gz when the path ends in .gz.
void write_nifti(const LabelVolume& volume, const std::filesystem::path& path);

} // namespace segrank::io

#include "segrank/nifti.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>

#include <zlib.h>

namespace segrank::io {

namespace {

constexpr std::size_t kHeaderSize = 348;

// Field offsets within the NIfTI-1 header.
constexpr std::size_t kOffDim = 40;       // int16[8]
constexpr std::size_t kOffDatatype = 70;  // int16
constexpr std::size_t kOffBitpix = 72;    // int16
constexpr std::size_t kOffPixdim = 76;    // float[8]
constexpr std::size_t kOffVoxOffset = 108;
constexpr std::size_t kOffSclSlope = 112;
constexpr std::size_t kOffSclInter = 116;
constexpr std::size_t kOffXyztUnits = 123;
constexpr std::size_t kOffDescrip = 148;
constexpr std::size_t kOffMagic = 344;

bool is_gzip(std::span<const std::uint8_t> bytes) {
    return bytes.size() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b;
}

std::vector<std::uint8_t> gzip_decompress(std::span<const std::uint8_t> bytes) {
    z_stream zs{};
    if (inflateInit2(&zs, 15 + 16) != Z_OK)
        throw IoFailure("zlib inflate init failed");
    std::vector<std::uint8_t> out;
    out.resize(std::max<std::size_t>(bytes.size() * 4, 1 << 16));
    zs.next_in = const_cast<Bytef*>(bytes.data());
    zs.avail_in = static_cast<uInt>(bytes.size());
    std::size_t written = 0;
    int rc = Z_OK;
    while (rc != Z_STREAM_END) {
        if (written == out.size())
            out.resize(out.size() * 2);
        zs.next_out = out.data() + written;
        zs.avail_out = static_cast<uInt>(out.size() - written);
        rc = inflate(&zs, Z_NO_FLUSH);
        written = out.size() - zs.avail_out;
        if (rc == Z_BUF_ERROR && zs.avail_in == 0) {
            inflateEnd(&zs);
            throw TruncatedStream("gzip stream ends mid-member");
        }
        if (rc != Z_OK && rc != Z_STREAM_END) {
            inflateEnd(&zs);
            throw TruncatedStream("corrupt gzip stream");
        }
    }
    inflateEnd(&zs);
    out.resize(written);
    return out;
}

std::vector<std::uint8_t> gzip_compress(std::span<const std::uint8_t> bytes) {
    z_stream zs{};
    if (deflateInit2(&zs, Z_DEFAULT_COMPRESSION, Z_DEFLATED, 15 + 16, 8, Z_DEFAULT_STRATEGY) != Z_OK)
        throw IoFailure("zlib deflate init failed");
    std::vector<std::uint8_t> out(deflateBound(&zs, static_cast<uLong>(bytes.size())));
    zs.next_in = const_cast<Bytef*>(bytes.data());
    zs.avail_in = static_cast<uInt>(bytes.size());
    zs.next_out = out.data();
    zs.avail_out = static_cast<uInt>(out.size());
    if (deflate(&zs, Z_FINISH) != Z_STREAM_END) {
        deflateEnd(&zs);
        throw IoFailure("zlib deflate failed");
    }
    out.resize(zs.total_out);
    deflateEnd(&zs);
    return out;
}

// Little-endian reads with an optional whole-field byte swap for
// big-endian headers.
template <class T>
T read_scalar(const std::uint8_t* p, bool swapped) {
    std::array<std::uint8_t, sizeof(T)> buf;
    std::memcpy(buf.data(), p, sizeof(T));
    if (swapped)
        std::reverse(buf.begin(), buf.end());
    T v;
    std::memcpy(&v, buf.data(), sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
        // buf was arranged for a little-endian host
        std::reverse(reinterpret_cast<std::uint8_t*>(&v), reinterpret_cast<std::uint8_t*>(&v) + sizeof(T));
    }
    return v;
}

template <class T>
void write_scalar(std::vector<std::uint8_t>& out, std::size_t off, T v) {
    std::array<std::uint8_t, sizeof(T)> buf;
    std::memcpy(buf.data(), &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big)
        std::reverse(buf.begin(), buf.end());
    std::memcpy(out.data() + off, buf.data(), sizeof(T));
}

int bytes_per_voxel(std::int16_t datatype) {
    switch (datatype) {
    case kDtUint8: return 1;
    case kDtInt16: return 2;
    case kDtInt32: return 4;
    case kDtFloat32: return 4;
    default: return 0;
    }
}

} // namespace

bool LabelScheme::contains(int code) const { return find(code) != nullptr; }

const LabelScheme::Entry* LabelScheme::find(int code) const {
    for (const auto& e : entries)
        if (e.code == code)
            return &e;
    return nullptr;
}

std::vector<int> LabelScheme::foreground_codes() const {
    std::vector<int> out;
    for (const auto& e : entries)
        if (e.code != background_code)
            out.push_back(e.code);
    return out;
}

LabelScheme LabelScheme::fetal_tissue_default() {
    LabelScheme s;
    s.entries = {
        {0, "background"}, {1, "eCSF"},       {2, "GM"},      {3, "WM"},
        {4, "ventricles"}, {5, "cerebellum"}, {6, "deep_GM"}, {7, "brainstem"},
    };
    s.background_code = 0;
    return s;
}

LabelVolume parse_nifti(std::span<const std::uint8_t> raw) {
    std::vector<std::uint8_t> inflated;
    std::span<const std::uint8_t> bytes = raw;
    if (is_gzip(raw)) {
        inflated = gzip_decompress(raw);
        bytes = inflated;
    }
    if (bytes.size() < kHeaderSize)
        throw TruncatedStream("stream shorter than the 348-byte header");

    const std::uint8_t* p = bytes.data();
    bool swapped = false;
    std::int32_t hdr_size = read_scalar<std::int32_t>(p, false);
    if (hdr_size != 348) {
        hdr_size = read_scalar<std::int32_t>(p, true);
        if (hdr_size != 348)
            throw BadMagic("header_size is not 348 in either byte order");
        swapped = true;
    }

    char magic[4];
    std::memcpy(magic, p + kOffMagic, 4);
    const bool single = std::memcmp(magic, "n+1", 4) == 0;
    const bool paired = std::memcmp(magic, "ni1", 4) == 0;
    if (!single && !paired)
        throw BadMagic("magic is neither \"n+1\" nor \"ni1\"");

    const std::int16_t ndim = read_scalar<std::int16_t>(p + kOffDim, swapped);
    if (ndim < 3 || ndim > 7)
        throw BadMagic("expected a 3D volume, dim[0]=" + std::to_string(ndim));
    std::array<std::int32_t, 3> dims;
    for (int i = 0; i < 3; ++i) {
        const std::int16_t d = read_scalar<std::int16_t>(p + kOffDim + 2 * (1 + i), swapped);
        if (d < 1)
            throw BadMagic("non-positive spatial extent dim[" + std::to_string(i + 1) + "]");
        dims[i] = d;
    }
    for (int i = 4; i <= ndim; ++i) {
        const std::int16_t d = read_scalar<std::int16_t>(p + kOffDim + 2 * i, swapped);
        if (d > 1)
            throw UnsupportedDatatype("volume has a non-trivial dimension beyond the third");
    }

    const std::int16_t datatype = read_scalar<std::int16_t>(p + kOffDatatype, swapped);
    const int bpv = bytes_per_voxel(datatype);
    if (bpv == 0)
        throw UnsupportedDatatype("datatype code " + std::to_string(datatype));

    std::array<double, 3> spacing;
    for (int i = 0; i < 3; ++i) {
        const float s = read_scalar<float>(p + kOffPixdim + 4 * (1 + i), swapped);
        if (!(s > 0.0f))
            throw BadMagic("non-positive pixdim[" + std::to_string(i + 1) + "]");
        spacing[i] = s;
    }

    float slope = read_scalar<float>(p + kOffSclSlope, swapped);
    const float inter = read_scalar<float>(p + kOffSclInter, swapped);
    if (slope == 0.0f)
        slope = 1.0f;

    const float vox_offset_f = read_scalar<float>(p + kOffVoxOffset, swapped);
    std::size_t offset = vox_offset_f >= static_cast<float>(kHeaderSize)
                             ? static_cast<std::size_t>(vox_offset_f)
                             : (single ? 352 : kHeaderSize);

    LabelVolume vol;
    vol.dims = dims;
    vol.spacing = spacing;
    const std::int64_t n = vol.voxel_count();
    if (bytes.size() < offset + static_cast<std::size_t>(n) * bpv)
        throw TruncatedStream("voxel payload shorter than dim product");

    vol.voxels.resize(static_cast<std::size_t>(n));
    const std::uint8_t* d = bytes.data() + offset;
    switch (datatype) {
    case kDtUint8:
        std::memcpy(vol.voxels.data(), d, static_cast<std::size_t>(n));
        break;
    case kDtInt16:
        for (std::int64_t i = 0; i < n; ++i) {
            const std::int16_t v = read_scalar<std::int16_t>(d + 2 * i, swapped);
            if (v < 0 || v > 255)
                throw LabelOutOfRange("int16 label " + std::to_string(v) + " outside [0,255]");
            vol.voxels[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(v);
        }
        break;
    case kDtInt32:
        for (std::int64_t i = 0; i < n; ++i) {
            const std::int32_t v = read_scalar<std::int32_t>(d + 4 * i, swapped);
            if (v < 0 || v > 255)
                throw LabelOutOfRange("int32 label " + std::to_string(v) + " outside [0,255]");
            vol.voxels[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(v);
        }
        break;
    case kDtFloat32:
        for (std::int64_t i = 0; i < n; ++i) {
            const float r = read_scalar<float>(d + 4 * i, swapped);
            const double v = static_cast<double>(r) * slope + inter;
            const double rounded = std::nearbyint(v);
            if (v != rounded)
                throw NonIntegralLabels("float32 label " + std::to_string(v) + " is not integral");
            if (rounded < 0 || rounded > 255)
                throw LabelOutOfRange("float32 label " + std::to_string(rounded) + " outside [0,255]");
            vol.voxels[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(rounded);
        }
        break;
    }
    return vol;
}

LabelVolume read_nifti(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoFailure("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad())
        throw IoFailure("read failed for " + path.string());
    return parse_nifti(bytes);
}

ValidationReport validate_labels(const LabelVolume& volume, const LabelScheme& scheme) {
    std::array<std::int64_t, 256> counts{};
    for (std::uint8_t v : volume.voxels)
        ++counts[v];
    ValidationReport report;
    for (int code = 0; code < 256; ++code)
        if (counts[code] > 0 && !scheme.contains(code))
            report.push_back({code, counts[code]});
    return report;
}

std::vector<std::uint8_t> nifti_bytes(const LabelVolume& volume) {
    // 348-byte header + 4-byte extension flag + payload.
    std::vector<std::uint8_t> out(352 + volume.voxels.size(), 0);
    write_scalar<std::int32_t>(out, 0, 348);
    out[38] = 'r'; // regular
    write_scalar<std::int16_t>(out, kOffDim, 3);
    for (int i = 0; i < 3; ++i)
        write_scalar<std::int16_t>(out, kOffDim + 2 * (1 + i), static_cast<std::int16_t>(volume.dims[i]));
    for (int i = 4; i < 8; ++i)
        write_scalar<std::int16_t>(out, kOffDim + 2 * i, 1);
    write_scalar<std::int16_t>(out, kOffDatatype, kDtUint8);
    write_scalar<std::int16_t>(out, kOffBitpix, 8);
    write_scalar<float>(out, kOffPixdim, 1.0f);
    for (int i = 0; i < 3; ++i)
        write_scalar<float>(out, kOffPixdim + 4 * (1 + i), static_cast<float>(volume.spacing[i]));
    write_scalar<float>(out, kOffVoxOffset, 352.0f);
    write_scalar<float>(out, kOffSclSlope, 1.0f);
    write_scalar<float>(out, kOffSclInter, 0.0f);
    out[kOffXyztUnits] = 2; // NIFTI_UNITS_MM
    static constexpr char descrip[] = "segrank label map";
    std::memcpy(out.data() + kOffDescrip, descrip, sizeof(descrip) - 1);
    std::memcpy(out.data() + kOffMagic, "n+1", 4);
    std::memcpy(out.data() + 352, volume.voxels.data(), volume.voxels.size());
    return out;
}

void write_nifti(const LabelVolume& volume, const std::filesystem::path& path) {
    for (int i = 0; i < 3; ++i) {
        if (volume.dims[i] < 1 || volume.dims[i] > 32767)
            throw IoFailure("dims out of the int16 range of the format");
    }
    if (volume.voxel_count() != static_cast<std::int64_t>(volume.voxels.size()))
        throw IoFailure("voxel buffer does not match dims");

    std::vector<std::uint8_t> bytes = nifti_bytes(volume);
    if (path.extension() == ".gz")
        bytes = gzip_compress(bytes);

    std::ofstream outfile(path, std::ios::binary | std::ios::trunc);
    if (!outfile)
        throw IoFailure("cannot open " + path.string() + " for writing");
    outfile.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!outfile)
        throw IoFailure("write failed for " + path.string());
}

} // namespace segrank::io

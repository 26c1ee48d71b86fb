#include "svox/io.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace svox::io {

namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little,
              "file formats assume a little-endian host");

namespace {

[[noreturn]] void fail(const fs::path& path, const std::string& what) {
    throw std::runtime_error(path.string() + ": " + what);
}

std::ifstream openIn(const fs::path& path, std::ios::openmode mode = std::ios::in) {
    std::ifstream in(path, mode);
    if (!in) fail(path, "cannot open for reading");
    return in;
}

std::ofstream openOut(const fs::path& path, std::ios::openmode mode = std::ios::out) {
    std::ofstream out(path, mode);
    if (!out) fail(path, "cannot open for writing");
    return out;
}

template <typename T>
void writeRaw(std::ostream& out, const T& value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T readRaw(std::istream& in, const fs::path& path) {
    T value;
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) fail(path, "unexpected end of file");
    return value;
}

}  // namespace

ScanFormat formatFromName(std::string_view name) {
    if (name == "auto") return ScanFormat::kAuto;
    if (name == "bin") return ScanFormat::kKittiBin;
    if (name == "xyz") return ScanFormat::kAsciiXyz;
    if (name == "ply") return ScanFormat::kPly;
    throw std::invalid_argument("unknown scan format: " + std::string(name));
}

namespace {

ScanFormat detectFormat(const fs::path& path) {
    const std::string ext = path.extension().string();
    if (ext == ".bin") return ScanFormat::kKittiBin;
    if (ext == ".xyz" || ext == ".txt") return ScanFormat::kAsciiXyz;
    if (ext == ".ply") return ScanFormat::kPly;
    throw std::invalid_argument("cannot infer scan format of " + path.string());
}

}  // namespace

PointCloud readScan(const fs::path& path, ScanFormat format) {
    if (format == ScanFormat::kAuto) format = detectFormat(path);
    switch (format) {
        case ScanFormat::kKittiBin: return readKittiBin(path);
        case ScanFormat::kAsciiXyz: return readAsciiXyz(path);
        case ScanFormat::kPly: return readPly(path);
        default: throw std::logic_error("unresolved scan format");
    }
}

PointCloud readKittiBin(const fs::path& path) {
    auto in = openIn(path, std::ios::binary);
    in.seekg(0, std::ios::end);
    const auto bytes = static_cast<std::size_t>(in.tellg());
    in.seekg(0);
    if (bytes % (4 * sizeof(float)) != 0) fail(path, "size is not a multiple of 16 bytes");
    const std::size_t n = bytes / (4 * sizeof(float));
    std::vector<float> raw(n * 4);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(bytes));
    if (!in) fail(path, "short read");
    PointCloud cloud;
    cloud.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        cloud.emplace_back(raw[i * 4], raw[i * 4 + 1], raw[i * 4 + 2]);
    }
    return cloud;
}

void writeKittiBin(const fs::path& path, const PointCloud& cloud) {
    auto out = openOut(path, std::ios::binary);
    std::vector<float> raw;
    raw.reserve(cloud.size() * 4);
    for (const Point3& p : cloud) {
        raw.push_back(static_cast<float>(p.x()));
        raw.push_back(static_cast<float>(p.y()));
        raw.push_back(static_cast<float>(p.z()));
        raw.push_back(0.0f);
    }
    out.write(reinterpret_cast<const char*>(raw.data()),
              static_cast<std::streamsize>(raw.size() * sizeof(float)));
}

PointCloud readAsciiXyz(const fs::path& path) {
    auto in = openIn(path);
    PointCloud cloud;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        double x, y, z;
        if (!(ss >> x >> y >> z)) fail(path, "malformed xyz line: " + line);
        cloud.emplace_back(x, y, z);
    }
    return cloud;
}

void writeAsciiXyz(const fs::path& path, const PointCloud& cloud) {
    auto out = openOut(path);
    char line[128];
    for (const Point3& p : cloud) {
        std::snprintf(line, sizeof(line), "%.9g %.9g %.9g\n", p.x(), p.y(), p.z());
        out << line;
    }
}

namespace {

struct PlyHeader {
    std::size_t vertex_count = 0;
    bool binary = false;
    int x_index = -1, y_index = -1, z_index = -1;
    std::vector<std::size_t> property_sizes;  // bytes per property, binary only
};

std::size_t plyTypeSize(const std::string& type, const fs::path& path) {
    if (type == "float" || type == "float32" || type == "int" || type == "int32" ||
        type == "uint" || type == "uint32") {
        return 4;
    }
    if (type == "double" || type == "float64") return 8;
    if (type == "char" || type == "uchar" || type == "int8" || type == "uint8") return 1;
    if (type == "short" || type == "ushort" || type == "int16" || type == "uint16") return 2;
    fail(path, "unsupported ply property type " + type);
}

}  // namespace

PointCloud readPly(const fs::path& path) {
    auto in = openIn(path, std::ios::binary);
    std::string line;
    if (!std::getline(in, line) || line.substr(0, 3) != "ply") fail(path, "not a ply file");

    PlyHeader header;
    bool in_vertex_element = false;
    std::vector<std::string> property_types;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ss(line);
        std::string token;
        ss >> token;
        if (token == "format") {
            std::string fmt;
            ss >> fmt;
            if (fmt == "binary_little_endian") {
                header.binary = true;
            } else if (fmt == "ascii") {
                header.binary = false;
            } else {
                fail(path, "unsupported ply format " + fmt);
            }
        } else if (token == "element") {
            std::string name;
            std::size_t count;
            ss >> name >> count;
            in_vertex_element = name == "vertex";
            if (in_vertex_element) header.vertex_count = count;
        } else if (token == "property" && in_vertex_element) {
            std::string type, name;
            ss >> type >> name;
            const int idx = static_cast<int>(property_types.size());
            property_types.push_back(type);
            if (name == "x") header.x_index = idx;
            if (name == "y") header.y_index = idx;
            if (name == "z") header.z_index = idx;
        } else if (token == "end_header") {
            break;
        }
    }
    if (header.x_index < 0 || header.y_index < 0 || header.z_index < 0) {
        fail(path, "ply misses x/y/z vertex properties");
    }

    PointCloud cloud;
    cloud.reserve(header.vertex_count);
    if (!header.binary) {
        for (std::size_t i = 0; i < header.vertex_count; ++i) {
            if (!std::getline(in, line)) fail(path, "truncated ply body");
            std::istringstream ss(line);
            std::vector<double> values;
            double v;
            while (ss >> v) values.push_back(v);
            if (values.size() < property_types.size()) fail(path, "short ply vertex line");
            cloud.emplace_back(values[header.x_index], values[header.y_index],
                               values[header.z_index]);
        }
        return cloud;
    }

    std::vector<std::size_t> sizes;
    std::size_t record = 0;
    for (const auto& t : property_types) {
        sizes.push_back(plyTypeSize(t, path));
        record += sizes.back();
    }
    std::vector<char> buf(record);
    for (std::size_t i = 0; i < header.vertex_count; ++i) {
        in.read(buf.data(), static_cast<std::streamsize>(record));
        if (!in) fail(path, "truncated ply body");
        double coords[3];
        const int wanted[3] = {header.x_index, header.y_index, header.z_index};
        for (int c = 0; c < 3; ++c) {
            std::size_t offset = 0;
            for (int p = 0; p < wanted[c]; ++p) offset += sizes[p];
            if (sizes[wanted[c]] == 4) {
                float f;
                std::memcpy(&f, buf.data() + offset, 4);
                coords[c] = f;
            } else if (sizes[wanted[c]] == 8) {
                double d;
                std::memcpy(&d, buf.data() + offset, 8);
                coords[c] = d;
            } else {
                fail(path, "x/y/z must be float or double");
            }
        }
        cloud.emplace_back(coords[0], coords[1], coords[2]);
    }
    return cloud;
}

void writePly(const fs::path& path, const PointCloud& cloud) {
    auto out = openOut(path, std::ios::binary);
    out << "ply\nformat binary_little_endian 1.0\n"
        << "element vertex " << cloud.size() << '\n'
        << "property float x\nproperty float y\nproperty float z\nend_header\n";
    for (const Point3& p : cloud) {
        const float xyz[3] = {static_cast<float>(p.x()), static_cast<float>(p.y()),
                              static_cast<float>(p.z())};
        out.write(reinterpret_cast<const char*>(xyz), sizeof(xyz));
    }
}

std::vector<fs::path> listScanFiles(const fs::path& dir, ScanFormat format) {
    if (!fs::is_directory(dir)) fail(dir, "not a directory");
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string ext = entry.path().extension().string();
        const bool is_scan = ext == ".bin" || ext == ".xyz" || ext == ".txt" || ext == ".ply";
        if (format == ScanFormat::kAuto ? is_scan
                                        : detectFormat(entry.path()) == format && is_scan) {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end(),
              [](const fs::path& a, const fs::path& b) { return a.filename() < b.filename(); });
    return files;
}

void writeTum(const fs::path& path, const std::vector<TrajectoryEntry>& trajectory) {
    auto out = openOut(path);
    char line[256];
    for (const TrajectoryEntry& e : trajectory) {
        const auto& q = e.pose.rotation;
        const auto& t = e.pose.translation;
        std::snprintf(line, sizeof(line), "%.9g %.9g %.9g %.9g %.9g %.9g %.9g %.9g\n",
                      e.timestamp, t.x(), t.y(), t.z(), q.x(), q.y(), q.z(), q.w());
        out << line;
    }
}

std::vector<TrajectoryEntry> readTum(const fs::path& path) {
    auto in = openIn(path);
    std::vector<TrajectoryEntry> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        TrajectoryEntry e;
        double qx, qy, qz, qw;
        if (!(ss >> e.timestamp >> e.pose.translation.x() >> e.pose.translation.y() >>
              e.pose.translation.z() >> qx >> qy >> qz >> qw)) {
            fail(path, "malformed TUM line: " + line);
        }
        e.pose.rotation = Eigen::Quaterniond(qw, qx, qy, qz).normalized();
        out.push_back(e);
    }
    return out;
}

namespace {
constexpr char kSnapshotMagic[5] = {'S', 'V', 'O', 'X', '1'};
}

void saveMapSnapshot(const SVoxelMap& map, const fs::path& path) {
    auto out = openOut(path, std::ios::binary);
    const SVoxelConfig& cfg = map.config();
    out.write(kSnapshotMagic, sizeof(kSnapshotMagic));
    writeRaw(out, cfg.voxel_size);
    writeRaw(out, static_cast<std::uint32_t>(cfg.neighbor_range));
    writeRaw(out, static_cast<std::uint32_t>(cfg.k_default));
    writeRaw(out, static_cast<std::uint32_t>(cfg.max_points_per_voxel));
    writeRaw(out, static_cast<std::uint64_t>(cfg.capacity));
    writeRaw(out, cfg.hash_primes[0]);
    writeRaw(out, cfg.hash_primes[1]);
    writeRaw(out, cfg.hash_primes[2]);
    writeRaw(out, cfg.table_size);
    writeRaw(out, static_cast<std::uint32_t>(cfg.storage_mode == StorageMode::kCurved ? 1 : 0));
    writeRaw(out, static_cast<std::uint32_t>(cfg.morton_bits_per_axis));
    writeRaw(out, static_cast<std::uint64_t>(map.voxelCount()));

    map.visitVoxels([&](const VoxelKey& key, std::span<const SVoxelMap::StoredPoint> pts) {
        writeRaw(out, key.i);
        writeRaw(out, key.j);
        writeRaw(out, key.k);
        writeRaw(out, static_cast<std::uint32_t>(pts.size()));
        for (const auto& sp : pts) {
            const float xyz[3] = {static_cast<float>(sp.position.x()),
                                  static_cast<float>(sp.position.y()),
                                  static_cast<float>(sp.position.z())};
            out.write(reinterpret_cast<const char*>(xyz), sizeof(xyz));
        }
    });
    if (!out) fail(path, "write failed");
}

SVoxelMap loadMapSnapshot(const fs::path& path) {
    auto in = openIn(path, std::ios::binary);
    char magic[5];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kSnapshotMagic, sizeof(magic)) != 0) {
        fail(path, "bad snapshot magic");
    }
    SVoxelConfig cfg;
    cfg.voxel_size = readRaw<double>(in, path);
    cfg.neighbor_range = static_cast<int>(readRaw<std::uint32_t>(in, path));
    cfg.k_default = static_cast<int>(readRaw<std::uint32_t>(in, path));
    cfg.max_points_per_voxel = static_cast<int>(readRaw<std::uint32_t>(in, path));
    cfg.capacity = readRaw<std::uint64_t>(in, path);
    cfg.hash_primes[0] = readRaw<std::uint64_t>(in, path);
    cfg.hash_primes[1] = readRaw<std::uint64_t>(in, path);
    cfg.hash_primes[2] = readRaw<std::uint64_t>(in, path);
    cfg.table_size = readRaw<std::uint64_t>(in, path);
    cfg.storage_mode =
        readRaw<std::uint32_t>(in, path) == 1 ? StorageMode::kCurved : StorageMode::kLinear;
    cfg.morton_bits_per_axis = static_cast<int>(readRaw<std::uint32_t>(in, path));

    SVoxelMap map(cfg);
    const std::uint64_t voxels = readRaw<std::uint64_t>(in, path);
    PointCloud points;
    for (std::uint64_t v = 0; v < voxels; ++v) {
        VoxelKey key;
        key.i = readRaw<std::int64_t>(in, path);
        key.j = readRaw<std::int64_t>(in, path);
        key.k = readRaw<std::int64_t>(in, path);
        const std::uint32_t count = readRaw<std::uint32_t>(in, path);
        points.clear();
        for (std::uint32_t p = 0; p < count; ++p) {
            float xyz[3];
            in.read(reinterpret_cast<char*>(xyz), sizeof(xyz));
            if (!in) fail(path, "truncated voxel record");
            points.emplace_back(xyz[0], xyz[1], xyz[2]);
        }
        map.restoreVoxel(key, points);
    }
    return map;
}

std::map<std::string, std::string> readKeyValueFile(const fs::path& path) {
    auto in = openIn(path);
    std::map<std::string, std::string> out;
    std::string line;
    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            fail(path, "line " + std::to_string(lineno) + " is not key=value");
        }
        out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return out;
}

}  // namespace svox::io

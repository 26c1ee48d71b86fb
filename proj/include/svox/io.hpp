#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "svox/se3.hpp"
#include "svox/types.hpp"
#include "svox/voxel_map.hpp"

namespace svox::io {

enum class ScanFormat { kAuto, kKittiBin, kAsciiXyz, kPly };

ScanFormat formatFromName(std::string_view name);  // "auto", "bin", "xyz", "ply"

/// Reads one scan. kAuto dispatches on the extension (.bin / .xyz,.txt / .ply).
PointCloud readScan(const std::filesystem::path& path, ScanFormat format = ScanFormat::kAuto);

/// KITTI-style binary: little-endian float32 x,y,z,intensity per point
/// (intensity ignored on read, written as zero).
PointCloud readKittiBin(const std::filesystem::path& path);
void writeKittiBin(const std::filesystem::path& path, const PointCloud& cloud);

/// One "x y z" per line.
PointCloud readAsciiXyz(const std::filesystem::path& path);
void writeAsciiXyz(const std::filesystem::path& path, const PointCloud& cloud);

/// PLY with float x/y/z properties; reads ascii and binary_little_endian,
/// writes binary_little_endian.
PointCloud readPly(const std::filesystem::path& path);
void writePly(const std::filesystem::path& path, const PointCloud& cloud);

/// Scan files of a directory in lexicographic order (frame order).
std::vector<std::filesystem::path> listScanFiles(const std::filesystem::path& dir,
                                                 ScanFormat format = ScanFormat::kAuto);

struct TrajectoryEntry {
    double timestamp = 0.0;
    Pose pose;
};

/// TUM format: "timestamp tx ty tz qx qy qz qw", 9 significant digits.
void writeTum(const std::filesystem::path& path, const std::vector<TrajectoryEntry>& trajectory);
std::vector<TrajectoryEntry> readTum(const std::filesystem::path& path);

/// Map snapshot, magic "SVOX1". Little-endian header carrying the full voxel
/// configuration, then one record per voxel: key as three signed 64-bit ints,
/// a point count, and packed float32 xyz triples. Round-trips bit-exactly.
void saveMapSnapshot(const SVoxelMap& map, const std::filesystem::path& path);
SVoxelMap loadMapSnapshot(const std::filesystem::path& path);

/// Plain-text key=value configuration ('#' comments, blank lines ignored).
std::map<std::string, std::string> readKeyValueFile(const std::filesystem::path& path);

}  // namespace svox::io

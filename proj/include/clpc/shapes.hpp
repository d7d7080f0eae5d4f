#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "clpc/geometry.hpp"
#include "clpc/rng.hpp"
#include "clpc/view.hpp"

namespace clpc {

enum class ShapeKind { sphere, cuboid, cylinder, capsule };

const char* shape_kind_name(ShapeKind k);
ShapeKind shape_kind_from_name(const std::string& name);

// size_a/b/c semantics by kind:
//   sphere:   a = radius
//   cuboid:   a, b, c = side lengths
//   cylinder: a = radius, b = height
//   capsule:  a = radius, b = cylindrical section height
struct ShapeSpec {
    ShapeKind kind = ShapeKind::sphere;
    double size_a = 1.0;
    double size_b = 1.0;
    double size_c = 1.0;
    int sample_count = 2048;
    std::uint64_t seed = 0;
};

// Area-uniform surface samples, centered at the origin and scaled so the
// analytic half-extent (max |coordinate| over the ideal surface) is 0.5.
PointCloud gen_procedural_shape(const ShapeSpec& spec);

struct ManifestRecord {
    std::string id;
    std::string partial_path;              // relative to the manifest file
    std::optional<std::string> gt_path;
    std::optional<ViewParams> view;
};

struct DatasetManifest {
    int format_version = 1;
    std::vector<ManifestRecord> records;
};

void save_manifest(const DatasetManifest& m, const std::string& path);

// Validates version, unique ids, and that every referenced file exists
// (resolved relative to the manifest's directory).
DatasetManifest load_manifest(const std::string& path);

// Paths inside records resolved against the manifest location.
std::string manifest_relative(const std::string& manifest_path, const std::string& rel);

struct ToyDatasetOptions {
    int n_shapes = 40;
    int views_per_shape = 5;
    int n_partial_points = 1024;
    int n_gt_points = 2048;
    int grid_resolution = 64;
    std::uint64_t seed = 0;
    std::vector<ShapeKind> kinds = {ShapeKind::sphere, ShapeKind::cuboid,
                                    ShapeKind::cylinder, ShapeKind::capsule};
};

// Writes <out_dir>/manifest.json plus one GT cloud per shape and one partial
// per (shape, view), all .xyz. Fully determined by options.seed.
DatasetManifest build_toy_dataset(const ToyDatasetOptions& opts, const std::string& out_dir);

// Loads every (partial, gt) pair referenced by a manifest.
struct LoadedSample {
    std::string id;
    PointCloud partial;
    std::optional<PointCloud> ground_truth;
};
std::vector<LoadedSample> load_dataset(const std::string& manifest_path);

} // namespace clpc

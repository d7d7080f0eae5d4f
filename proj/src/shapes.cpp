#include "clpc/shapes.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "clpc/error.hpp"
#include "clpc/io.hpp"

namespace fs = std::filesystem;

namespace clpc {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Shapes are sampled on the unit-parameter surface and multiplied by
// 0.5 / half_extent, so the advertised bound holds analytically instead of
// depending on which points the sampler happened to draw.

void sphere_point(SeededRng& rng, double radius, double cy, Point3& out) {
    const double uy = rng.uniform(-1.0, 1.0);
    const double phi = rng.uniform(0.0, kTwoPi);
    const double rho = std::sqrt(std::max(0.0, 1.0 - uy * uy));
    out = {radius * rho * std::cos(phi), cy + radius * uy, radius * rho * std::sin(phi)};
}

PointCloud gen_sphere(const ShapeSpec& spec, SeededRng& rng) {
    PointCloud cloud(static_cast<std::size_t>(spec.sample_count));
    for (Point3& p : cloud) sphere_point(rng, 0.5, 0.0, p);
    return cloud;
}

PointCloud gen_cuboid(const ShapeSpec& spec, SeededRng& rng) {
    const double h[3] = {spec.size_a / 2.0, spec.size_b / 2.0, spec.size_c / 2.0};
    const double scale = 0.5 / std::max({h[0], h[1], h[2]});
    const double sh[3] = {h[0] * scale, h[1] * scale, h[2] * scale};
    // Two faces per axis, each with area = product of the other two sides.
    double area[3], cum[3];
    area[0] = spec.size_b * spec.size_c;
    area[1] = spec.size_a * spec.size_c;
    area[2] = spec.size_a * spec.size_b;
    cum[0] = 2.0 * area[0];
    cum[1] = cum[0] + 2.0 * area[1];
    cum[2] = cum[1] + 2.0 * area[2];

    PointCloud cloud(static_cast<std::size_t>(spec.sample_count));
    for (Point3& p : cloud) {
        const double u = rng.uniform(0.0, cum[2]);
        int axis = u < cum[0] ? 0 : (u < cum[1] ? 1 : 2);
        const double lo = axis == 0 ? 0.0 : cum[axis - 1];
        const double side = (u - lo < area[axis]) ? 1.0 : -1.0;
        double c[3];
        c[axis] = side * sh[axis];
        const int a1 = (axis + 1) % 3, a2 = (axis + 2) % 3;
        c[a1] = rng.uniform(-sh[a1], sh[a1]);
        c[a2] = rng.uniform(-sh[a2], sh[a2]);
        p = {c[0], c[1], c[2]};
    }
    return cloud;
}

// Axis of revolution is y for both the cylinder and the capsule.
PointCloud gen_cylinder(const ShapeSpec& spec, SeededRng& rng) {
    const double r = spec.size_a, h = spec.size_b;
    const double scale = 0.5 / std::max(r, h / 2.0);
    const double sr = r * scale, shh = (h / 2.0) * scale;
    const double lateral = kTwoPi * r * h;
    const double cap = std::numbers::pi * r * r;
    const double total = lateral + 2.0 * cap;

    PointCloud cloud(static_cast<std::size_t>(spec.sample_count));
    for (Point3& p : cloud) {
        const double u = rng.uniform(0.0, total);
        if (u < lateral) {
            const double phi = rng.uniform(0.0, kTwoPi);
            const double y = rng.uniform(-shh, shh);
            p = {sr * std::cos(phi), y, sr * std::sin(phi)};
        } else {
            const double side = (u - lateral < cap) ? 1.0 : -1.0;
            const double rho = sr * std::sqrt(rng.next_unit());
            const double phi = rng.uniform(0.0, kTwoPi);
            p = {rho * std::cos(phi), side * shh, rho * std::sin(phi)};
        }
    }
    return cloud;
}

PointCloud gen_capsule(const ShapeSpec& spec, SeededRng& rng) {
    const double r = spec.size_a, hc = spec.size_b;
    const double scale = 0.5 / (hc / 2.0 + r);
    const double sr = r * scale, shc = (hc / 2.0) * scale;
    const double lateral = kTwoPi * r * hc;
    const double caps = 2.0 * kTwoPi * r * r; // two hemispheres = full sphere

    PointCloud cloud(static_cast<std::size_t>(spec.sample_count));
    for (Point3& p : cloud) {
        const double u = rng.uniform(0.0, lateral + caps);
        if (u < lateral) {
            const double phi = rng.uniform(0.0, kTwoPi);
            const double y = rng.uniform(-shc, shc);
            p = {sr * std::cos(phi), y, sr * std::sin(phi)};
        } else {
            // Uniform sphere point; the sign of its y picks the hemisphere.
            Point3 s;
            sphere_point(rng, sr, 0.0, s);
            p = {s.x, s.y + (s.y >= 0.0 ? shc : -shc), s.z};
        }
    }
    return cloud;
}

} // namespace

const char* shape_kind_name(ShapeKind k) {
    switch (k) {
        case ShapeKind::sphere: return "sphere";
        case ShapeKind::cuboid: return "cuboid";
        case ShapeKind::cylinder: return "cylinder";
        case ShapeKind::capsule: return "capsule";
    }
    throw ComputeError("shape: unknown kind");
}

ShapeKind shape_kind_from_name(const std::string& name) {
    if (name == "sphere") return ShapeKind::sphere;
    if (name == "cuboid") return ShapeKind::cuboid;
    if (name == "cylinder") return ShapeKind::cylinder;
    if (name == "capsule") return ShapeKind::capsule;
    throw DataError("unknown shape kind '" + name + "'");
}

PointCloud gen_procedural_shape(const ShapeSpec& spec) {
    if (spec.sample_count < 1) throw ComputeError("shape: sample_count < 1");
    if (spec.size_a <= 0.0 || spec.size_b <= 0.0 || spec.size_c <= 0.0)
        throw ComputeError("shape: nonpositive size");
    SeededRng rng(spec.seed);
    switch (spec.kind) {
        case ShapeKind::sphere: return gen_sphere(spec, rng);
        case ShapeKind::cuboid: return gen_cuboid(spec, rng);
        case ShapeKind::cylinder: return gen_cylinder(spec, rng);
        case ShapeKind::capsule: return gen_capsule(spec, rng);
    }
    throw ComputeError("shape: unknown kind");
}

std::string manifest_relative(const std::string& manifest_path, const std::string& rel) {
    const fs::path r(rel);
    if (r.is_absolute()) return rel;
    return (fs::path(manifest_path).parent_path() / r).string();
}

void save_manifest(const DatasetManifest& m, const std::string& path) {
    nlohmann::json j;
    j["format_version"] = m.format_version;
    j["records"] = nlohmann::json::array();
    for (const ManifestRecord& r : m.records) {
        nlohmann::json o;
        o["id"] = r.id;
        o["partial"] = r.partial_path;
        if (r.gt_path) o["gt"] = *r.gt_path;
        if (r.view) {
            o["view"] = {{"azimuth_deg", r.view->azimuth_deg},
                         {"elevation_deg", r.view->elevation_deg},
                         {"grid_resolution", r.view->grid_resolution}};
        }
        j["records"].push_back(o);
    }
    std::ofstream os(path);
    if (!os) throw DataError("cannot open for writing: " + path);
    os << j.dump(2) << "\n";
    if (!os) throw DataError("write failed: " + path);
}

DatasetManifest load_manifest(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open: " + path);
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("manifest: parse error: " + std::string(e.what()));
    }
    DatasetManifest m;
    try {
        m.format_version = j.at("format_version").get<int>();
        if (m.format_version != 1)
            throw DataError("manifest: unsupported format_version " +
                            std::to_string(m.format_version));
        for (const auto& o : j.at("records")) {
            ManifestRecord r;
            r.id = o.at("id").get<std::string>();
            r.partial_path = o.at("partial").get<std::string>();
            if (o.contains("gt")) r.gt_path = o.at("gt").get<std::string>();
            if (o.contains("view")) {
                ViewParams v;
                v.azimuth_deg = o.at("view").at("azimuth_deg").get<double>();
                v.elevation_deg = o.at("view").at("elevation_deg").get<double>();
                v.grid_resolution = o.at("view").at("grid_resolution").get<int>();
                r.view = v;
            }
            m.records.push_back(std::move(r));
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError("manifest: missing or mistyped field: " + std::string(e.what()));
    }
    std::map<std::string, int> seen;
    for (const ManifestRecord& r : m.records) {
        if (++seen[r.id] > 1) throw DataError("manifest: duplicate id '" + r.id + "'");
        if (!fs::exists(manifest_relative(path, r.partial_path)))
            throw DataError("manifest: missing file '" + r.partial_path + "'");
        if (r.gt_path && !fs::exists(manifest_relative(path, *r.gt_path)))
            throw DataError("manifest: missing file '" + *r.gt_path + "'");
    }
    return m;
}

DatasetManifest build_toy_dataset(const ToyDatasetOptions& opts, const std::string& out_dir) {
    if (opts.n_shapes < 1 || opts.views_per_shape < 1)
        throw ComputeError("toy dataset: counts must be >= 1");
    if (opts.kinds.empty()) throw ComputeError("toy dataset: no shape kinds");
    fs::create_directories(out_dir);

    DatasetManifest m;
    for (int s = 0; s < opts.n_shapes; ++s) {
        const ShapeKind kind = opts.kinds[static_cast<std::size_t>(s) % opts.kinds.size()];
        SeededRng size_rng(mix64(mix64(opts.seed, 0xD5), static_cast<std::uint64_t>(s)));
        ShapeSpec spec;
        spec.kind = kind;
        spec.sample_count = opts.n_gt_points;
        spec.seed = mix64(mix64(opts.seed, 0x6E), static_cast<std::uint64_t>(s));
        switch (kind) { // only aspect ratios matter after normalization
            case ShapeKind::sphere:
                spec.size_a = size_rng.uniform(0.3, 0.6);
                break;
            case ShapeKind::cuboid:
                spec.size_a = size_rng.uniform(0.4, 1.0);
                spec.size_b = size_rng.uniform(0.4, 1.0);
                spec.size_c = size_rng.uniform(0.4, 1.0);
                break;
            case ShapeKind::cylinder:
                spec.size_a = size_rng.uniform(0.15, 0.4);
                spec.size_b = size_rng.uniform(0.5, 1.0);
                break;
            case ShapeKind::capsule:
                spec.size_a = size_rng.uniform(0.1, 0.3);
                spec.size_b = size_rng.uniform(0.3, 0.8);
                break;
        }
        const PointCloud gt = gen_procedural_shape(spec);

        std::ostringstream base;
        base << "shape" << std::setw(3) << std::setfill('0') << s;
        const std::string gt_rel = base.str() + "_gt.xyz";
        write_xyz(gt, (fs::path(out_dir) / gt_rel).string());

        for (int v = 0; v < opts.views_per_shape; ++v) {
            SeededRng view_rng(mix64(mix64(mix64(opts.seed, 0x71E3),
                                           static_cast<std::uint64_t>(s)),
                                     static_cast<std::uint64_t>(v)));
            const ViewParams view = sample_view(view_rng, opts.grid_resolution);
            const PointCloud partial = synthesize_partial(
                gt, view, static_cast<std::size_t>(opts.n_partial_points), view_rng);
            ManifestRecord r;
            r.id = base.str() + "_v" + std::to_string(v);
            r.partial_path = r.id + ".xyz";
            r.gt_path = gt_rel;
            r.view = view;
            write_xyz(partial, (fs::path(out_dir) / r.partial_path).string());
            m.records.push_back(std::move(r));
        }
    }
    save_manifest(m, (fs::path(out_dir) / "manifest.json").string());
    return m;
}

std::vector<LoadedSample> load_dataset(const std::string& manifest_path) {
    const DatasetManifest m = load_manifest(manifest_path);
    std::map<std::string, PointCloud> gt_cache;
    std::vector<LoadedSample> out;
    out.reserve(m.records.size());
    for (const ManifestRecord& r : m.records) {
        LoadedSample s;
        s.id = r.id;
        s.partial = read_cloud(manifest_relative(manifest_path, r.partial_path));
        if (r.gt_path) {
            auto it = gt_cache.find(*r.gt_path);
            if (it == gt_cache.end())
                it = gt_cache
                         .emplace(*r.gt_path,
                                  read_cloud(manifest_relative(manifest_path, *r.gt_path)))
                         .first;
            s.ground_truth = it->second;
        }
        out.push_back(std::move(s));
    }
    return out;
}

} // namespace clpc

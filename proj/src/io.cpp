#include "clpc/io.hpp"

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <vector>

#include "clpc/error.hpp"

namespace clpc {

namespace {

std::string lower_ext(const std::string& path) {
    const std::size_t dot = path.find_last_of('.');
    if (dot == std::string::npos) return "";
    std::string ext = path.substr(dot + 1);
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return ext;
}

void write_double_text(std::ostream& os, double v) {
    std::ostringstream tmp;
    tmp.precision(17);
    tmp << v;
    os << tmp.str();
}

std::size_t ply_type_size(const std::string& t) {
    if (t == "char" || t == "uchar" || t == "int8" || t == "uint8") return 1;
    if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
    if (t == "int" || t == "uint" || t == "int32" || t == "uint32" || t == "float" ||
        t == "float32")
        return 4;
    if (t == "double" || t == "float64") return 8;
    throw DataError("ply: unknown property type '" + t + "'");
}

} // namespace

PointCloud read_xyz(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open: " + path);
    PointCloud cloud;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream fields(line);
        Point3 p;
        if (!(fields >> p.x)) continue; // blank or comment-only line
        if (!(fields >> p.y >> p.z)) {
            throw DataError(path + ": line " + std::to_string(lineno) +
                            ": expected 3 fields");
        }
        double extra;
        if (fields >> extra)
            throw DataError(path + ": line " + std::to_string(lineno) +
                            ": expected 3 fields");
        cloud.push_back(p);
    }
    return cloud;
}

void write_xyz(const PointCloud& cloud, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw DataError("cannot open for writing: " + path);
    for (const Point3& p : cloud) {
        write_double_text(os, p.x);
        os << ' ';
        write_double_text(os, p.y);
        os << ' ';
        write_double_text(os, p.z);
        os << '\n';
    }
    if (!os) throw DataError("write failed: " + path);
}

PointCloud read_ply(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open: " + path);

    std::string line;
    if (!std::getline(is, line)) throw DataError(path + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "ply") throw DataError(path + ": not a ply file");

    struct Property {
        std::string type;
        std::string name;
    };
    struct Element {
        std::string name;
        std::size_t count = 0;
        std::vector<Property> props;
    };

    bool binary = false;
    bool format_seen = false;
    std::vector<Element> elements;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream fields(line);
        std::string word;
        fields >> word;
        if (word == "comment" || word.empty()) continue;
        if (word == "format") {
            std::string enc;
            fields >> enc;
            if (enc == "ascii") {
                binary = false;
            } else if (enc == "binary_little_endian") {
                binary = true;
            } else {
                throw DataError(path + ": unsupported encoding '" + enc + "'");
            }
            format_seen = true;
        } else if (word == "element") {
            Element e;
            fields >> e.name >> e.count;
            elements.push_back(e);
        } else if (word == "property") {
            if (elements.empty()) throw DataError(path + ": property before element");
            Property p;
            fields >> p.type;
            if (p.type == "list")
                throw DataError(path + ": list properties are unsupported");
            fields >> p.name;
            elements.back().props.push_back(p);
        } else if (word == "end_header") {
            break;
        } else {
            throw DataError(path + ": unexpected header line '" + line + "'");
        }
    }
    if (!format_seen) throw DataError(path + ": missing format line");

    PointCloud cloud;
    for (const Element& e : elements) {
        const bool is_vertex = e.name == "vertex";
        int ix = -1, iy = -1, iz = -1;
        if (is_vertex) {
            for (std::size_t i = 0; i < e.props.size(); ++i) {
                if (e.props[i].name == "x") ix = static_cast<int>(i);
                if (e.props[i].name == "y") iy = static_cast<int>(i);
                if (e.props[i].name == "z") iz = static_cast<int>(i);
            }
            if (ix < 0 || iy < 0 || iz < 0)
                throw DataError(path + ": vertex element lacks x/y/z");
            cloud.reserve(e.count);
        }
        if (binary) {
            std::size_t row = 0;
            std::vector<std::size_t> offsets(e.props.size());
            for (std::size_t i = 0; i < e.props.size(); ++i) {
                offsets[i] = row;
                row += ply_type_size(e.props[i].type);
            }
            std::vector<char> buf(row);
            auto load = [&](int pi) -> double {
                const Property& p = e.props[static_cast<std::size_t>(pi)];
                const char* at = buf.data() + offsets[static_cast<std::size_t>(pi)];
                if (p.type == "float" || p.type == "float32") {
                    float f;
                    std::copy(at, at + 4, reinterpret_cast<char*>(&f));
                    return static_cast<double>(f);
                }
                if (p.type == "double" || p.type == "float64") {
                    double d;
                    std::copy(at, at + 8, reinterpret_cast<char*>(&d));
                    return d;
                }
                throw DataError(path + ": coordinate property must be float or double");
            };
            for (std::size_t r = 0; r < e.count; ++r) {
                is.read(buf.data(), static_cast<std::streamsize>(buf.size()));
                if (!is) throw DataError(path + ": truncated");
                if (is_vertex) cloud.push_back({load(ix), load(iy), load(iz)});
            }
        } else {
            for (std::size_t r = 0; r < e.count; ++r) {
                if (!std::getline(is, line)) throw DataError(path + ": truncated");
                if (!is_vertex) continue;
                std::istringstream fields(line);
                std::vector<double> vals(e.props.size());
                for (double& v : vals)
                    if (!(fields >> v)) throw DataError(path + ": truncated row");
                cloud.push_back({vals[static_cast<std::size_t>(ix)],
                                 vals[static_cast<std::size_t>(iy)],
                                 vals[static_cast<std::size_t>(iz)]});
            }
        }
    }
    return cloud;
}

void write_ply(const PointCloud& cloud, const std::string& path, bool binary) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot open for writing: " + path);
    os << "ply\n";
    os << (binary ? "format binary_little_endian 1.0\n" : "format ascii 1.0\n");
    os << "element vertex " << cloud.size() << "\n";
    os << "property double x\nproperty double y\nproperty double z\n";
    os << "end_header\n";
    if (binary) {
        for (const Point3& p : cloud) {
            const double v[3] = {p.x, p.y, p.z};
            os.write(reinterpret_cast<const char*>(v), sizeof v);
        }
    } else {
        for (const Point3& p : cloud) {
            write_double_text(os, p.x);
            os << ' ';
            write_double_text(os, p.y);
            os << ' ';
            write_double_text(os, p.z);
            os << '\n';
        }
    }
    if (!os) throw DataError("write failed: " + path);
}

PointCloud read_cloud(const std::string& path) {
    const std::string ext = lower_ext(path);
    if (ext == "xyz") return read_xyz(path);
    if (ext == "ply") return read_ply(path);
    throw DataError("unsupported file extension: " + path);
}

void write_cloud(const PointCloud& cloud, const std::string& path) {
    const std::string ext = lower_ext(path);
    if (ext == "xyz") return write_xyz(cloud, path);
    if (ext == "ply") return write_ply(cloud, path);
    throw DataError("unsupported file extension: " + path);
}

} // namespace clpc

// Copyright Contributors to the voxworld Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "voxworld/core/binary_io.hpp"
#include "voxworld/core/errors.hpp"

#include <sstream>
#include <string>
#include <vector>

namespace voxworld::io {

enum class PlyType { Int8, UInt8, Int16, UInt16, Int32, UInt32, Float32, Float64 };

inline const char *ply_type_name(PlyType t) {
    switch (t) {
    case PlyType::Int8: return "char";
    case PlyType::UInt8: return "uchar";
    case PlyType::Int16: return "short";
    case PlyType::UInt16: return "ushort";
    case PlyType::Int32: return "int";
    case PlyType::UInt32: return "uint";
    case PlyType::Float32: return "float";
    case PlyType::Float64: return "double";
    }
    return "";
}

inline PlyType ply_type_from_name(const std::string &name) {
    if (name == "char" || name == "int8") return PlyType::Int8;
    if (name == "uchar" || name == "uint8") return PlyType::UInt8;
    if (name == "short" || name == "int16") return PlyType::Int16;
    if (name == "ushort" || name == "uint16") return PlyType::UInt16;
    if (name == "int" || name == "int32") return PlyType::Int32;
    if (name == "uint" || name == "uint32") return PlyType::UInt32;
    if (name == "float" || name == "float32") return PlyType::Float32;
    if (name == "double" || name == "float64") return PlyType::Float64;
    throw FormatError("unsupported PLY property type '" + name + "'");
}

struct PlyProperty {
    std::string name;
    PlyType type = PlyType::Float32;
};

/// One "vertex" element with scalar properties, stored column-wise as doubles.
struct PlyTable {
    std::vector<PlyProperty> properties;
    std::vector<std::vector<double>> columns;

    [[nodiscard]] std::size_t rows() const { return columns.empty() ? 0 : columns.front().size(); }

    void add(const std::string &name, PlyType type) {
        properties.push_back({name, type});
        columns.emplace_back();
    }

    [[nodiscard]] int index_of(const std::string &name) const {
        for (std::size_t n = 0; n < properties.size(); ++n)
            if (properties[n].name == name) return static_cast<int>(n);
        return -1;
    }

    [[nodiscard]] const std::vector<double> &column(const std::string &name) const {
        const int n = index_of(name);
        if (n < 0) throw FormatError("PLY property '" + name + "' is missing");
        return columns[static_cast<std::size_t>(n)];
    }
};

inline std::size_t ply_type_size(PlyType t) {
    switch (t) {
    case PlyType::Int8:
    case PlyType::UInt8: return 1;
    case PlyType::Int16:
    case PlyType::UInt16: return 2;
    case PlyType::Int32:
    case PlyType::UInt32:
    case PlyType::Float32: return 4;
    case PlyType::Float64: return 8;
    }
    return 0;
}

inline void put_ply_value(ByteWriter &w, PlyType type, double v) {
    switch (type) {
    case PlyType::Int8: w.put(static_cast<std::int8_t>(v)); break;
    case PlyType::UInt8: w.put(static_cast<std::uint8_t>(v)); break;
    case PlyType::Int16: w.put(static_cast<std::int16_t>(v)); break;
    case PlyType::UInt16: w.put(static_cast<std::uint16_t>(v)); break;
    case PlyType::Int32: w.put(static_cast<std::int32_t>(v)); break;
    case PlyType::UInt32: w.put(static_cast<std::uint32_t>(v)); break;
    case PlyType::Float32: w.put(static_cast<float>(v)); break;
    case PlyType::Float64: w.put(v); break;
    }
}

inline double get_ply_value(ByteReader &r, PlyType type) {
    switch (type) {
    case PlyType::Int8: return r.get<std::int8_t>();
    case PlyType::UInt8: return r.get<std::uint8_t>();
    case PlyType::Int16: return r.get<std::int16_t>();
    case PlyType::UInt16: return r.get<std::uint16_t>();
    case PlyType::Int32: return r.get<std::int32_t>();
    case PlyType::UInt32: return r.get<std::uint32_t>();
    case PlyType::Float32: return r.get<float>();
    case PlyType::Float64: return r.get<double>();
    }
    return 0.0;
}

/// binary_little_endian 1.0 header for a single vertex element.
inline std::string ply_header(std::span<const PlyProperty> properties, std::size_t count) {
    std::ostringstream header;
    header << "ply\nformat binary_little_endian 1.0\nelement vertex " << count << "\n";
    for (const auto &p : properties) header << "property " << ply_type_name(p.type) << " " << p.name << "\n";
    header << "end_header\n";
    return header.str();
}

struct PlyLayout {
    std::vector<PlyProperty> properties;
    std::size_t count = 0;
    /// Byte offset of the first vertex row.
    std::size_t data_offset = 0;

    [[nodiscard]] int index_of(const std::string &name) const {
        for (std::size_t n = 0; n < properties.size(); ++n)
            if (properties[n].name == name) return static_cast<int>(n);
        return -1;
    }

    [[nodiscard]] std::size_t require(const std::string &name) const {
        const int n = index_of(name);
        if (n < 0) throw FormatError("PLY property '" + name + "' is missing");
        return static_cast<std::size_t>(n);
    }
};

/// Parses the header and checks that the payload holds exactly `count` rows.
inline PlyLayout parse_ply_header(std::span<const std::uint8_t> bytes) {
    const std::string marker = "end_header\n";
    const std::string_view text(reinterpret_cast<const char *>(bytes.data()), std::min<std::size_t>(bytes.size(), 1 << 16));
    const auto end = text.find(marker);
    if (text.substr(0, 4) != "ply\n" || end == std::string_view::npos) throw FormatError("not a PLY file");
    std::istringstream header{std::string(text.substr(0, end))};
    PlyLayout layout;
    bool in_vertex = false, seen_format = false;
    std::string line;
    while (std::getline(header, line)) {
        std::istringstream ls(line);
        std::string word;
        ls >> word;
        if (word == "format") {
            std::string fmt;
            ls >> fmt;
            if (fmt != "binary_little_endian") throw FormatError("only binary_little_endian PLY is supported");
            seen_format = true;
        } else if (word == "element") {
            std::string name;
            ls >> name >> layout.count;
            if (!ls || name != "vertex" || in_vertex) throw FormatError("PLY must hold a single vertex element");
            in_vertex = true;
        } else if (word == "property") {
            std::string type, name;
            ls >> type >> name;
            if (!in_vertex || type == "list") throw FormatError("unsupported PLY property layout");
            layout.properties.push_back({name, ply_type_from_name(type)});
        }
    }
    if (!seen_format || !in_vertex) throw FormatError("PLY header lacks format or vertex element");
    layout.data_offset = end + marker.size();
    std::size_t row = 0;
    for (const auto &p : layout.properties) row += ply_type_size(p.type);
    const std::size_t payload = bytes.size() - layout.data_offset;
    if (row == 0 ? layout.count != 0 && payload != 0 : payload / row != layout.count || payload % row != 0) {
        throw FormatError("PLY payload size does not match the vertex count");
    }
    return layout;
}

/// binary_little_endian 1.0 PLY with a single vertex element.
inline std::vector<std::uint8_t> encode_ply(const PlyTable &table) {
    for (const auto &c : table.columns)
        if (c.size() != table.rows()) throw std::invalid_argument("PLY columns have different lengths");
    ByteWriter w;
    w.put_string(ply_header(table.properties, table.rows()));
    for (std::size_t r = 0; r < table.rows(); ++r)
        for (std::size_t c = 0; c < table.properties.size(); ++c) put_ply_value(w, table.properties[c].type, table.columns[c][r]);
    return w.take();
}

inline PlyTable decode_ply(std::span<const std::uint8_t> bytes) {
    const PlyLayout layout = parse_ply_header(bytes);
    PlyTable table;
    for (const auto &p : layout.properties) table.add(p.name, p.type);
    ByteReader r(bytes.subspan(layout.data_offset));
    for (auto &c : table.columns) c.resize(layout.count);
    for (std::size_t row = 0; row < layout.count; ++row)
        for (std::size_t c = 0; c < layout.properties.size(); ++c) table.columns[c][row] = get_ply_value(r, layout.properties[c].type);
    return table;
}

} // namespace voxworld::io

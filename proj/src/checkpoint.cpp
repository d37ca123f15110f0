// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 umda contributors

#include "umda/checkpoint.hpp"

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace umda {

namespace {

constexpr char kMagic[8] = {'U', 'M', 'D', 'A', 'C', 'K', 'P', 'T'};

void write_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }
void write_u64(std::ostream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); }
void write_str(std::ostream& out, const std::string& s) {
    write_u32(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint32_t read_u32(std::istream& in) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    return v;
}
std::uint64_t read_u64(std::istream& in) {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 8);
    return v;
}
std::string read_str(std::istream& in) {
    const std::uint32_t len = read_u32(in);
    std::string s(len, '\0');
    in.read(s.data(), static_cast<std::streamsize>(len));
    return s;
}

} // namespace

ParameterSet* Checkpoint::find(const std::string& name) {
    for (auto& [n, p] : groups)
        if (n == name) return &p;
    return nullptr;
}

const ParameterSet* Checkpoint::find(const std::string& name) const {
    for (const auto& [n, p] : groups)
        if (n == name) return &p;
    return nullptr;
}

void Checkpoint::put(const std::string& name, ParameterSet p) {
    if (ParameterSet* existing = find(name)) {
        *existing = std::move(p);
    } else {
        groups.emplace_back(name, std::move(p));
    }
}

void Checkpoint::save(const std::string& path) const {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open for writing: " + tmp);
        out.write(kMagic, sizeof(kMagic));
        write_u32(out, kVersion);
        write_u64(out, config_fingerprint);
        write_str(out, config_text);
        write_u32(out, static_cast<std::uint32_t>(groups.size()));
        for (const auto& [gname, pset] : groups) {
            write_str(out, gname);
            write_u32(out, static_cast<std::uint32_t>(pset.count()));
            for (const auto& pname : pset.names()) {
                const Tensor& t = pset.at(pname);
                write_str(out, pname);
                std::uint8_t flags = 0;
                if (pset.is_buffer(pname)) flags |= 1;
                if (pset.is_frozen(pname)) flags |= 2;
                out.write(reinterpret_cast<const char*>(&flags), 1);
                write_u32(out, static_cast<std::uint32_t>(t.shape().size()));
                for (int e : t.shape()) write_u32(out, static_cast<std::uint32_t>(e));
                out.write(reinterpret_cast<const char*>(t.data().data()),
                          static_cast<std::streamsize>(t.data().size() * sizeof(double)));
            }
        }
        if (!out) throw IoError("short write: " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move checkpoint into place: " + path + " (" + ec.message() + ")");
}

Checkpoint Checkpoint::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0) throw IoError("not a checkpoint file: " + path);
    const std::uint32_t version = read_u32(in);
    if (version != kVersion) throw IoError("unsupported checkpoint version: " + std::to_string(version));

    Checkpoint ckpt;
    ckpt.config_fingerprint = read_u64(in);
    ckpt.config_text = read_str(in);
    const std::uint32_t ngroups = read_u32(in);
    for (std::uint32_t g = 0; g < ngroups; ++g) {
        const std::string gname = read_str(in);
        const std::uint32_t nentries = read_u32(in);
        ParameterSet pset;
        for (std::uint32_t e = 0; e < nentries; ++e) {
            const std::string pname = read_str(in);
            std::uint8_t flags = 0;
            in.read(reinterpret_cast<char*>(&flags), 1);
            const std::uint32_t ndim = read_u32(in);
            std::vector<int> shape(ndim);
            for (auto& d : shape) d = static_cast<int>(read_u32(in));
            std::vector<double> data(static_cast<std::size_t>(shape_size(shape)));
            in.read(reinterpret_cast<char*>(data.data()),
                    static_cast<std::streamsize>(data.size() * sizeof(double)));
            if (!in) throw IoError("truncated checkpoint: " + path);
            pset.insert(pname, Tensor(std::move(shape), std::move(data)), (flags & 1) != 0);
            if (flags & 2) pset.set_frozen(pname, true);
        }
        ckpt.groups.emplace_back(gname, std::move(pset));
    }
    return ckpt;
}

} // namespace umda

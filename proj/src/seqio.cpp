// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 umda contributors

#include "umda/seqio.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace umda {

namespace fs = std::filesystem;

void write_sequence_dir(const Sequence& seq, const std::string& dir) {
    fs::create_directories(dir);
    char name[64];
    for (std::size_t i = 0; i < seq.frames.size(); ++i) {
        std::snprintf(name, sizeof(name), "/frame_%04zu.ppm", i);
        write_ppm(seq.frames[i], dir + name);
    }
    if (seq.labeled()) {
        std::ofstream gt(dir + "/groundtruth.txt");
        if (!gt) throw IoError("cannot write annotations in " + dir);
        char line[160];
        for (std::size_t i = 0; i < seq.annotations.size(); ++i) {
            const BBox& b = seq.annotations[i];
            std::snprintf(line, sizeof(line), "%zu %.6f %.6f %.6f %.6f\n", i, b.cx, b.cy, b.w, b.h);
            gt << line;
        }
    }
    std::ofstream meta(dir + "/meta.txt");
    meta << "domain=" << domain_name(seq.tag) << "\n";
    meta << "seed=" << seq.seed << "\n";
    meta << "frames=" << seq.frames.size() << "\n";
}

Sequence read_sequence_dir(const std::string& dir) {
    if (!fs::is_directory(dir)) throw IoError("not a sequence directory: " + dir);
    std::vector<std::string> frame_files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string fname = entry.path().filename().string();
        if (fname.rfind("frame_", 0) == 0 && entry.path().extension() == ".ppm")
            frame_files.push_back(entry.path().string());
    }
    if (frame_files.empty()) throw IoError("no frames in " + dir);
    std::sort(frame_files.begin(), frame_files.end());

    Sequence seq;
    for (const auto& f : frame_files) seq.frames.push_back(read_ppm(f));

    const std::string meta_path = dir + "/meta.txt";
    if (fs::exists(meta_path)) {
        std::ifstream meta(meta_path);
        std::string line;
        while (std::getline(meta, line)) {
            if (line.rfind("domain=", 0) == 0) seq.tag = domain_from_name(line.substr(7));
            if (line.rfind("seed=", 0) == 0) seq.seed = std::stoull(line.substr(5));
        }
    }
    for (auto& f : seq.frames) f.domain_tag = seq.tag;

    const std::string gt_path = dir + "/groundtruth.txt";
    if (fs::exists(gt_path)) {
        std::ifstream gt(gt_path);
        std::string line;
        while (std::getline(gt, line)) {
            if (line.empty()) continue;
            std::istringstream ss(line);
            std::size_t idx;
            BBox b;
            if (!(ss >> idx >> b.cx >> b.cy >> b.w >> b.h))
                throw IoError("malformed annotation line in " + gt_path);
            seq.annotations.push_back(b);
        }
        if (seq.annotations.size() != seq.frames.size())
            throw IoError("annotation count does not match frames in " + dir);
    }
    return seq;
}

void synthesize_sequence_dir(const std::string& src_dir, const std::string& out_dir,
                             const WeatherParams& params) {
    const Sequence src = read_sequence_dir(src_dir);
    fs::create_directories(out_dir);
    std::ofstream manifest(out_dir + "/manifest.txt");
    if (!manifest) throw IoError("cannot write manifest in " + out_dir);

    char name[64];
    char line[512];
    for (std::size_t i = 0; i < src.frames.size(); ++i) {
        WeatherParams p = params;
        p.seed = Rng::mix(params.seed, i);
        const Frame corrupted = apply_weather(src.frames[i], p);
        std::snprintf(name, sizeof(name), "frame_%04zu.ppm", i);
        write_ppm(corrupted, out_dir + "/" + name);
        const double quality = ssim(src.frames[i], corrupted);
        switch (p.kind) {
            case WeatherKind::Fog:
                std::snprintf(line, sizeof(line),
                              "%s kind=fog fog_beta=%.4f airlight=%.3f,%.3f,%.3f seed=%llu ssim=%.6f\n",
                              name, p.fog_beta, p.airlight[0], p.airlight[1], p.airlight[2],
                              static_cast<unsigned long long>(p.seed), quality);
                break;
            case WeatherKind::Dark:
                std::snprintf(line, sizeof(line), "%s kind=dark gamma=%.4f brightness=%.4f seed=%llu ssim=%.6f\n",
                              name, p.gamma, p.brightness, static_cast<unsigned long long>(p.seed), quality);
                break;
            case WeatherKind::Rain:
                std::snprintf(line, sizeof(line),
                              "%s kind=rain density=%.4f angle=%.2f alpha=%.4f seed=%llu ssim=%.6f\n",
                              name, p.rain_density, p.rain_angle, p.rain_alpha,
                              static_cast<unsigned long long>(p.seed), quality);
                break;
        }
        manifest << line;
    }
    // The corrupted copy is unlabeled by construction; keep only meta.
    std::ofstream meta(out_dir + "/meta.txt");
    meta << "domain=" << domain_name(domain_from_weather(params.kind)) << "\n";
    meta << "seed=" << params.seed << "\n";
    meta << "frames=" << src.frames.size() << "\n";
}

} // namespace umda

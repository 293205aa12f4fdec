#include "ddif/reports.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "json.hpp"

namespace ddif {
namespace {

void open_out(std::ofstream& out, const std::string& path) {
    out.open(path);
    if (!out) throw IoError("cannot write " + path);
}

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

std::string score_record_line(const std::string& prompt_id, const SafetyDecision& decision) {
    nlohmann::ordered_json j;
    j["prompt_id"] = prompt_id;
    j["score"] = decision.score;
    j["d_mal"] = decision.distances.d_mal;
    j["d_ben"] = decision.distances.d_ben;
    j["route"] = route_name(decision.route);
    return j.dump();
}

void write_score_jsonl(const std::string& path,
                       std::span<const std::pair<std::string, SafetyDecision>> records) {
    std::ofstream out;
    open_out(out, path);
    for (const auto& [id, decision] : records) out << score_record_line(id, decision) << '\n';
    if (!out) throw IoError("short write: " + path);
}

void write_sweep_csv(const std::string& path, std::span<const SweepRow> rows) {
    std::ofstream out;
    open_out(out, path);
    out << "value,flag_rate,bypass_rate\n";
    for (const auto& row : rows) {
        out << fmt_double(row.value) << ',' << fmt_double(row.flag_rate) << ',';
        if (row.bypass_rate) out << fmt_double(*row.bypass_rate);
        out << '\n';
    }
    if (!out) throw IoError("short write: " + path);
}

void write_sensitivity_csv(const std::string& path, const SensitivityMap& map) {
    std::ofstream out;
    open_out(out, path);
    for (int i = 0; i < map.grid_size; ++i) {
        for (int j = 0; j < map.grid_size; ++j) {
            if (j) out << ',';
            out << fmt_double(map.at(i, j));
        }
        out << '\n';
    }
    if (!out) throw IoError("short write: " + path);
}

Image sensitivity_to_image(const SensitivityMap& map) {
    double lo = map.grid.empty() ? 0.0 : map.grid[0];
    double hi = lo;
    for (double v : map.grid) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    Image img;
    img.height = map.grid_size;
    img.width = map.grid_size;
    img.channels = 1;
    img.pixels.assign(map.grid.size(), 0.0);
    if (hi > lo) {
        double scale = 1.0 / (hi - lo);
        for (std::size_t i = 0; i < map.grid.size(); ++i)
            img.pixels[i] = (map.grid[i] - lo) * scale;
    }
    return img;
}

std::string scene_to_json(const PlantedScene& scene) {
    nlohmann::ordered_json j;
    j["height"] = scene.height;
    j["width"] = scene.width;
    j["blobs"] = nlohmann::ordered_json::array();
    for (const auto& blob : scene.blobs) {
        nlohmann::ordered_json b;
        b["concept"] = blob.concept_label;
        b["center_y"] = blob.center_y;
        b["center_x"] = blob.center_x;
        b["radius"] = blob.radius;
        b["intensity"] = blob.intensity;
        j["blobs"].push_back(std::move(b));
    }
    j["harmful_pixels"] = scene.harmful.popcount();
    return j.dump(2);
}

void write_scene_json(const std::string& path, const PlantedScene& scene) {
    std::ofstream out;
    open_out(out, path);
    out << scene_to_json(scene) << '\n';
    if (!out) throw IoError("short write: " + path);
}

void write_manifest(const std::string& path, const std::map<std::string, std::string>& entries) {
    std::ofstream out;
    open_out(out, path);
    for (const auto& [key, value] : entries) out << key << '=' << value << '\n';
    if (!out) throw IoError("short write: " + path);
}

}  // namespace ddif

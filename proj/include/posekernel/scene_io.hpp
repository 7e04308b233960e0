#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "posekernel/roomsim.hpp"
#include "posekernel/vision.hpp"

namespace pk::io {

/// Raised for malformed configs, scenes, and CLI usage; distinct from
/// runtime failures so the CLI can exit 1 vs 2.
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

inline Vec3 parse_vec3(const nlohmann::json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 3) {
        throw ValidationError(where + ": expected an array of 3 numbers");
    }
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline nlohmann::json vec3_json(Vec3 v) { return nlohmann::json::array({v.x, v.y, v.z}); }

}  // namespace detail

/// Scene JSON schema: keys room (array of 3 meters or null), beta, speakers,
/// microphones, speed_of_sound, image_order, reflectors
/// ([{position, gain}]). All lengths in meters.
struct SceneFile {
    Scene scene;
    ReflectorCloud reflectors;
};

inline SceneFile parse_scene(const nlohmann::json& j, const std::string& where) {
    if (!j.is_object()) throw ValidationError(where + ": scene must be a JSON object");
    SceneFile out;
    if (j.contains("room") && !j.at("room").is_null()) {
        out.scene.room = detail::parse_vec3(j.at("room"), where + ".room");
    }
    out.scene.beta = j.value("beta", 0.0);
    if (!j.contains("speakers") || !j.at("speakers").is_array()) {
        throw ValidationError(where + ".speakers: required array of positions");
    }
    for (const auto& s : j.at("speakers")) {
        out.scene.speakers.push_back(detail::parse_vec3(s, where + ".speakers[]"));
    }
    if (!j.contains("microphones") || !j.at("microphones").is_array()) {
        throw ValidationError(where + ".microphones: required array of positions");
    }
    for (const auto& m : j.at("microphones")) {
        out.scene.microphones.push_back(detail::parse_vec3(m, where + ".microphones[]"));
    }
    out.scene.speed_of_sound_mps = j.value("speed_of_sound", 343.0);
    out.scene.image_order = j.value("image_order", 0);
    if (j.contains("reflectors")) {
        for (const auto& r : j.at("reflectors")) {
            Reflector p;
            p.position = detail::parse_vec3(r.at("position"), where + ".reflectors[].position");
            p.gain = r.value("gain", 1.0);
            out.reflectors.points.push_back(p);
        }
    }
    if (out.scene.speakers.empty()) throw ValidationError(where + ".speakers: need at least one speaker");
    if (out.scene.microphones.empty()) throw ValidationError(where + ".microphones: need at least one microphone");
    try {
        pk::detail::validate_scene(out.scene);
    } catch (const std::invalid_argument& e) {
        throw ValidationError(where + ": " + e.what());
    }
    return out;
}

inline SceneFile load_scene(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw ValidationError("scene file not found: " + path.string());
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("scene file " + path.string() + ": " + e.what());
    }
    return parse_scene(j, path.string());
}

inline nlohmann::json scene_json(const SceneFile& sf) {
    nlohmann::json j;
    if (sf.scene.room) j["room"] = detail::vec3_json(*sf.scene.room);
    else j["room"] = nullptr;
    j["beta"] = sf.scene.beta;
    j["speakers"] = nlohmann::json::array();
    for (Vec3 s : sf.scene.speakers) j["speakers"].push_back(detail::vec3_json(s));
    j["microphones"] = nlohmann::json::array();
    for (Vec3 m : sf.scene.microphones) j["microphones"].push_back(detail::vec3_json(m));
    j["speed_of_sound"] = sf.scene.speed_of_sound_mps;
    j["image_order"] = sf.scene.image_order;
    j["reflectors"] = nlohmann::json::array();
    for (const Reflector& r : sf.reflectors.points) {
        j["reflectors"].push_back({{"position", detail::vec3_json(r.position)}, {"gain", r.gain}});
    }
    return j;
}

inline void save_scene(const std::filesystem::path& path, const SceneFile& sf) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open for write: " + path.string());
    f << scene_json(sf).dump(2) << "\n";
}

/// Camera JSON: fx, fy, cx, cy, rotation (9 numbers, row-major world-to-
/// camera), translation, width, height.
inline Camera parse_camera(const nlohmann::json& j, const std::string& where) {
    Camera cam;
    cam.fx = j.at("fx").get<double>();
    cam.fy = j.at("fy").get<double>();
    cam.cx = j.at("cx").get<double>();
    cam.cy = j.at("cy").get<double>();
    if (!j.contains("rotation") || !j.at("rotation").is_array() || j.at("rotation").size() != 9) {
        throw ValidationError(where + ".rotation: expected 9 numbers (row-major)");
    }
    for (std::size_t i = 0; i < 9; ++i) cam.rotation.m[i] = j.at("rotation")[i].get<double>();
    cam.translation = detail::parse_vec3(j.at("translation"), where + ".translation");
    cam.width = j.at("width").get<std::size_t>();
    cam.height = j.at("height").get<std::size_t>();
    try {
        validate_camera(cam);
    } catch (const std::invalid_argument& e) {
        throw ValidationError(where + ": " + e.what());
    }
    return cam;
}

}  // namespace pk::io

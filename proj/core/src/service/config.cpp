// Copyright Contributors to the splatcap project
// SPDX-License-Identifier: Apache-2.0
//
#include "splatcap/service/config.hpp"

#include "splatcap/error.hpp"
#include "splatcap/ply.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <functional>

extern char** environ;

namespace splatcap::service {

namespace {

using nlohmann::json;

template <typename T>
T get_as(const json& value, const std::string& key) {
    try {
        return value.get<T>();
    } catch (const json::exception&) {
        throw InvalidParameter("config key '" + key + "' has the wrong type");
    }
}

struct TrainField {
    const char* name;
    std::function<void(TrainConfig&, const json&)> read;
    std::function<json(const TrainConfig&)> write;
};

#define SPLATCAP_TRAIN_FIELD(field, type)                                                         \
    TrainField {                                                                                  \
        #field, [](TrainConfig& c, const json& v) { c.field = get_as<type>(v, #field); },          \
            [](const TrainConfig& c) { return json(c.field); }                                    \
    }

const std::vector<TrainField>& train_fields() {
    static const std::vector<TrainField> fields{
        SPLATCAP_TRAIN_FIELD(iterations, int),
        SPLATCAP_TRAIN_FIELD(position_lr_init, double),
        SPLATCAP_TRAIN_FIELD(position_lr_final, double),
        SPLATCAP_TRAIN_FIELD(sh_lr, double),
        SPLATCAP_TRAIN_FIELD(opacity_lr, double),
        SPLATCAP_TRAIN_FIELD(scale_lr, double),
        SPLATCAP_TRAIN_FIELD(rotation_lr, double),
        SPLATCAP_TRAIN_FIELD(lambda_dssim, double),
        SPLATCAP_TRAIN_FIELD(densify_interval, int),
        SPLATCAP_TRAIN_FIELD(densify_from, int),
        SPLATCAP_TRAIN_FIELD(densify_until, int),
        SPLATCAP_TRAIN_FIELD(grad_threshold, double),
        SPLATCAP_TRAIN_FIELD(percent_dense, double),
        SPLATCAP_TRAIN_FIELD(prune_opacity, double),
        SPLATCAP_TRAIN_FIELD(max_screen_radius, double),
        SPLATCAP_TRAIN_FIELD(opacity_reset_interval, int),
        SPLATCAP_TRAIN_FIELD(sh_promote_interval, int),
        SPLATCAP_TRAIN_FIELD(checkpoint_interval, int),
        SPLATCAP_TRAIN_FIELD(holdout_every, int),
        SPLATCAP_TRAIN_FIELD(seed, std::uint64_t),
        SPLATCAP_TRAIN_FIELD(downscale, int),
        SPLATCAP_TRAIN_FIELD(workers, int),
        TrainField{"background",
                   [](TrainConfig& c, const json& v) {
                       const auto rgb = get_as<std::vector<double>>(v, "background");
                       if (rgb.size() != 3) throw InvalidParameter("config key 'background' needs 3 values");
                       c.background = Vec3(rgb[0], rgb[1], rgb[2]);
                   },
                   [](const TrainConfig& c) {
                       return json::array({c.background[0], c.background[1], c.background[2]});
                   }},
    };
    return fields;
}

#undef SPLATCAP_TRAIN_FIELD

void apply_train(TrainConfig& config, const json& object) {
    if (!object.is_object()) throw InvalidParameter("train config must be a JSON object");
    for (const auto& [key, value] : object.items()) {
        const auto& fields = train_fields();
        const auto it = std::find_if(fields.begin(), fields.end(),
                                     [&](const TrainField& f) { return key == f.name; });
        if (it == fields.end()) throw InvalidParameter("unknown train config key '" + key + "'");
        it->read(config, value);
    }
}

json parse_json(std::string_view text, const std::string& what) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(what + " is not valid JSON: " + e.what(), e.byte);
    } catch (const json::exception& e) { // e.g. numbers beyond double range
        throw ParseError(what + " is not valid JSON: " + e.what(), 0);
    }
}

void apply_service(ServiceConfig& config, const json& object) {
    if (!object.is_object()) throw InvalidParameter("service config must be a JSON object");
    for (const auto& [key, value] : object.items()) {
        if (key == "listen") {
            const auto listen = get_as<std::string>(value, key);
            const auto colon = listen.rfind(':');
            if (colon == std::string::npos) throw InvalidParameter("config key 'listen' must be host:port");
            config.host = listen.substr(0, colon);
            try {
                std::size_t used = 0;
                config.port = std::stoi(listen.substr(colon + 1), &used);
                if (used != listen.size() - colon - 1) throw std::invalid_argument("trailing");
            } catch (const std::logic_error&) {
                throw InvalidParameter("config key 'listen' has an invalid port");
            }
        } else if (key == "host") {
            config.host = get_as<std::string>(value, key);
        } else if (key == "port") {
            config.port = get_as<int>(value, key);
        } else if (key == "data_root") {
            config.data_root = get_as<std::string>(value, key);
        } else if (key == "workers") {
            config.workers = get_as<int>(value, key);
        } else if (key == "frame_extractor") {
            config.frame_extractor = get_as<std::string>(value, key);
        } else if (key == "sfm") {
            config.sfm = get_as<std::string>(value, key);
        } else if (key == "fps") {
            config.fps = get_as<double>(value, key);
        } else if (key == "max_upload_bytes") {
            config.max_upload_bytes = get_as<std::uint64_t>(value, key);
        } else if (key == "stage_timeout_s") {
            config.stage_timeout_s = get_as<int>(value, key);
        } else if (key == "train") {
            apply_train(config.train, value);
        } else {
            throw InvalidParameter("unknown service config key '" + key + "'");
        }
    }
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

json env_value(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::exception&) {
        return json(text);
    }
}

} // namespace

void ServiceConfig::validate() const {
    if (host.empty()) throw InvalidParameter("service config: host must not be empty");
    if (port < 0 || port > 65535) throw InvalidParameter("service config: port must be in [0, 65535]");
    if (data_root.empty()) throw InvalidParameter("service config: data_root must not be empty");
    if (workers < 1) throw InvalidParameter("service config: workers must be at least 1");
    for (const auto& [name, tpl] : {std::pair{"frame_extractor", &frame_extractor}, std::pair{"sfm", &sfm}}) {
        for (const char* placeholder : {"{input}", "{output}"}) {
            if (tpl->find(placeholder) == std::string::npos) {
                throw InvalidParameter(std::string("service config: ") + name + " template lacks " + placeholder);
            }
        }
    }
    if (!(fps > 0.0)) throw InvalidParameter("service config: fps must be positive");
    if (max_upload_bytes == 0) throw InvalidParameter("service config: max_upload_bytes must be positive");
    if (stage_timeout_s < 1) throw InvalidParameter("service config: stage_timeout_s must be positive");
    train.validate();
}

TrainConfig parse_train_config(std::string_view json_text, TrainConfig base) {
    apply_train(base, parse_json(json_text, "train config"));
    return base;
}

std::string train_config_to_json(const TrainConfig& config) {
    json j = json::object();
    for (const auto& f : train_fields()) j[f.name] = f.write(config);
    return j.dump(2);
}

ServiceConfig load_service_config(const std::optional<std::filesystem::path>& file,
                                  const std::map<std::string, std::string>& env) {
    ServiceConfig config;
    if (file) {
        if (!std::filesystem::exists(*file)) throw NotFound("config file not found: " + file->string());
        apply_service(config, parse_json(read_file(*file), "config file " + file->string()));
    }
    const std::string prefix = "SPLATCAP_";
    const std::string train_prefix = "SPLATCAP_TRAIN_";
    json overrides = json::object();
    for (const auto& [name, value] : env) {
        if (name.rfind(train_prefix, 0) == 0) {
            overrides["train"][lower(name.substr(train_prefix.size()))] = env_value(value);
        } else if (name.rfind(prefix, 0) == 0) {
            const auto key = lower(name.substr(prefix.size()));
            // Strings stay strings for keys that are always text.
            const bool text = key == "listen" || key == "host" || key == "data_root" ||
                              key == "frame_extractor" || key == "sfm";
            overrides[key] = text ? json(value) : env_value(value);
        }
    }
    apply_service(config, overrides);
    config.validate();
    return config;
}

std::map<std::string, std::string> environment_overrides() {
    std::map<std::string, std::string> out;
    for (char** e = environ; e && *e; ++e) {
        const std::string entry = *e;
        const auto eq = entry.find('=');
        if (eq == std::string::npos || entry.rfind("SPLATCAP_", 0) != 0) continue;
        out[entry.substr(0, eq)] = entry.substr(eq + 1);
    }
    return out;
}

} // namespace splatcap::service

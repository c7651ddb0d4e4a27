#include "tome/config_json.hpp"

#include <fstream>

#include <json.hpp>

namespace tome {

namespace {

using nlohmann::json;

template <class T>
void get_if_present(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void get_enum_if_present(const json& j, const char* key, auto parser, auto& out) {
  if (j.contains(key)) out = parser(j.at(key).get<std::string>());
}

}  // namespace

ModelConfig config_from_json(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");

  ModelConfig cfg;
  try {
    get_if_present(j, "image_size", cfg.image_size);
    get_if_present(j, "patch_size", cfg.patch_size);
    get_if_present(j, "channels_in", cfg.channels_in);
    get_if_present(j, "width", cfg.width);
    get_if_present(j, "depth", cfg.depth);
    get_if_present(j, "heads", cfg.heads);
    get_if_present(j, "mlp_ratio", cfg.mlp_ratio);
    get_if_present(j, "num_classes", cfg.num_classes);
    if (j.contains("tome")) {
      const json& t = j.at("tome");
      if (t.contains("schedule")) {
        cfg.tome.schedule.per_layer = t.at("schedule").get<std::vector<int>>();
      }
      get_enum_if_present(t, "feature", feature_from_string, cfg.tome.feature);
      get_enum_if_present(t, "metric", metric_from_string, cfg.tome.metric);
      get_enum_if_present(t, "head_agg", head_agg_from_string, cfg.tome.head_agg);
      get_enum_if_present(t, "combine", combine_from_string, cfg.tome.combine);
      get_enum_if_present(t, "partition", partition_from_string, cfg.tome.partition);
      get_if_present(t, "prop_attn", cfg.tome.prop_attn);
      get_enum_if_present(t, "reduction", reduction_from_string, cfg.tome.reduction);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config field: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("bad config field: ") + e.what());
  }
  if (cfg.tome.schedule.per_layer.empty()) {
    cfg.tome.schedule.per_layer.assign(static_cast<std::size_t>(cfg.depth), 0);
  }
  cfg.validate();
  return cfg;
}

ModelConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  std::string text((std::istreambuf_iterator<char>(f)),
                   std::istreambuf_iterator<char>());
  return config_from_json(text);
}

std::string config_to_json(const ModelConfig& cfg) {
  json j;
  j["image_size"] = cfg.image_size;
  j["patch_size"] = cfg.patch_size;
  j["channels_in"] = cfg.channels_in;
  j["width"] = cfg.width;
  j["depth"] = cfg.depth;
  j["heads"] = cfg.heads;
  j["mlp_ratio"] = cfg.mlp_ratio;
  j["num_classes"] = cfg.num_classes;
  json t;
  t["schedule"] = cfg.tome.schedule.per_layer;
  t["feature"] = std::string(to_string(cfg.tome.feature));
  t["metric"] = std::string(to_string(cfg.tome.metric));
  t["head_agg"] = std::string(to_string(cfg.tome.head_agg));
  t["combine"] = std::string(to_string(cfg.tome.combine));
  t["partition"] = std::string(to_string(cfg.tome.partition));
  t["prop_attn"] = cfg.tome.prop_attn;
  t["reduction"] = std::string(to_string(cfg.tome.reduction));
  j["tome"] = t;
  return j.dump(2);
}

}  // namespace tome

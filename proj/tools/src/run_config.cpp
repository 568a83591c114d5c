#include "pnp_cli/run_config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <istream>
#include <sstream>

#include "pnp/errors.hpp"

namespace pnp::cli {

namespace {

std::string fmt(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
  T v{};
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw ConfigError("config key '" + std::string(key) + "': bad value '" + std::string(text) + "'");
  return v;
}

bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError("config key '" + std::string(key) + "': expected true or false, got '" +
                    std::string(text) + "'");
}

struct Field {
  std::string key;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T>
Field number(std::string key, T TrainConfig::*member) {
  return {key,
          [key, member](RunConfig& c, std::string_view v) {
            c.train.*member = parse_number<T>(key, v);
          },
          [member](const RunConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return fmt(c.train.*member);
            else return std::to_string(c.train.*member);
          }};
}

Field flag(std::string key, bool TrainConfig::*member) {
  return {key,
          [key, member](RunConfig& c, std::string_view v) { c.train.*member = parse_bool(key, v); },
          [member](const RunConfig& c) { return std::string(c.train.*member ? "true" : "false"); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back(number("tau", &TrainConfig::tau));
    f.push_back(number("tau_t_start", &TrainConfig::tau_t_start));
    f.push_back(number("tau_t_end", &TrainConfig::tau_t_end));
    f.push_back(number("tau_t_warmup_epochs", &TrainConfig::tau_t_warmup_epochs));
    f.push_back(number("tau_r", &TrainConfig::tau_r));
    f.push_back(number("tau_f", &TrainConfig::tau_f));
    f.push_back(number("gamma", &TrainConfig::gamma));
    f.push_back(number("alpha1", &TrainConfig::alpha1));
    f.push_back(number("beta1", &TrainConfig::beta1));
    f.push_back(number("omega_min", &TrainConfig::omega_min));
    f.push_back(number("omega_max", &TrainConfig::omega_max));
    f.push_back({"omega_form",
                 [](RunConfig& c, std::string_view v) {
                   if (v == "corrected") c.train.omega_form = OmegaForm::kCorrected;
                   else if (v == "printed") c.train.omega_form = OmegaForm::kPrinted;
                   else throw ConfigError("config key 'omega_form': expected corrected or printed");
                 },
                 [](const RunConfig& c) {
                   return std::string(c.train.omega_form == OmegaForm::kCorrected ? "corrected"
                                                                                  : "printed");
                 }});
    f.push_back(number("epochs", &TrainConfig::epochs));
    f.push_back(number("batch_size", &TrainConfig::batch_size));
    f.push_back(number("lr", &TrainConfig::lr));
    f.push_back(number("momentum", &TrainConfig::momentum));
    f.push_back(number("buffer_multiplier", &TrainConfig::buffer_multiplier));
    f.push_back(number("knn_k", &TrainConfig::knn_k));
    f.push_back(number("infomap_restarts", &TrainConfig::infomap_restarts));
    f.push_back(number("encoder_hidden", &TrainConfig::encoder_hidden));
    f.push_back(number("feature_dim", &TrainConfig::feature_dim));
    f.push_back(number("head_hidden", &TrainConfig::head_hidden));
    f.push_back(number("proj_dim", &TrainConfig::proj_dim));
    f.push_back({"encoder_init",
                 [](RunConfig& c, std::string_view v) {
                   if (v == "near_identity") c.train.encoder_init = LayerInit::kNearIdentity;
                   else if (v == "xavier") c.train.encoder_init = LayerInit::kXavier;
                   else throw ConfigError("config key 'encoder_init': expected near_identity or xavier");
                 },
                 [](const RunConfig& c) {
                   return std::string(c.train.encoder_init == LayerInit::kNearIdentity ? "near_identity"
                                                                                     : "xavier");
                 }});
    f.push_back(flag("train_last_layer_only", &TrainConfig::train_last_layer_only));
    f.push_back(flag("normalize_features", &TrainConfig::normalize_features));
    f.push_back(flag("cross_view_denominator", &TrainConfig::cross_view_denominator));
    f.push_back({"aug_noise_sd",
                 [](RunConfig& c, std::string_view v) {
                   c.train.augment.noise_sd = parse_number<double>("aug_noise_sd", v);
                 },
                 [](const RunConfig& c) { return fmt(c.train.augment.noise_sd); }});
    f.push_back({"aug_dropout_p",
                 [](RunConfig& c, std::string_view v) {
                   c.train.augment.dropout_p = parse_number<double>("aug_dropout_p", v);
                 },
                 [](const RunConfig& c) { return fmt(c.train.augment.dropout_p); }});
    f.push_back(number("seed", &TrainConfig::seed));
    f.push_back(number("shuffle_seed", &TrainConfig::shuffle_seed));
    f.push_back(flag("use_potential_prototypes", &TrainConfig::use_potential_prototypes));
    f.push_back(flag("trainable_potential_prototypes", &TrainConfig::trainable_potential_prototypes));
    f.push_back(flag("trainable_cluster_slots", &TrainConfig::trainable_cluster_slots));
    f.push_back(flag("use_ema", &TrainConfig::use_ema));
    f.push_back(flag("enable_cru", &TrainConfig::enable_cru));
    f.push_back(flag("enable_crl", &TrainConfig::enable_crl));
    f.push_back(flag("enable_sup", &TrainConfig::enable_sup));
    f.push_back(flag("enable_unsup", &TrainConfig::enable_unsup));
    f.push_back(number("divergence_limit", &TrainConfig::divergence_limit));
    f.push_back({"checkpoint_every",
                 [](RunConfig& c, std::string_view v) {
                   c.checkpoint_every = parse_number<std::size_t>("checkpoint_every", v);
                 },
                 [](const RunConfig& c) { return std::to_string(c.checkpoint_every); }});
    return f;
  }();
  return table;
}

std::string_view trim(std::string_view s) {
  const auto ws = " \t\r";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

}  // namespace

void set_key(RunConfig& cfg, std::string_view key, std::string_view value) {
  for (const auto& f : fields()) {
    if (f.key == key) {
      f.set(cfg, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

void apply_config_text(RunConfig& cfg, std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
    try {
      set_key(cfg, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
}

void apply_config_file(RunConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  apply_config_text(cfg, in);
}

std::string dump_config(const RunConfig& cfg) {
  std::ostringstream out;
  for (const auto& f : fields()) out << f.key << '=' << f.get(cfg) << '\n';
  return out.str();
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& f : fields()) keys.push_back(f.key);
  return keys;
}

std::vector<std::string> ablation_names() {
  return {"no-pp", "frozen-pp", "freeze-cluster", "no-ema", "no-cru", "no-crl", "no-sup", "no-unsup"};
}

void apply_ablation(RunConfig& cfg, std::string_view name) {
  auto& t = cfg.train;
  if (name == "no-pp") t.use_potential_prototypes = false;
  else if (name == "frozen-pp") t.trainable_potential_prototypes = false;
  else if (name == "freeze-cluster") t.trainable_cluster_slots = false;
  else if (name == "no-ema") t.use_ema = false;
  else if (name == "no-cru") t.enable_cru = false;
  else if (name == "no-crl") t.enable_crl = false;
  else if (name == "no-sup") t.enable_sup = false;
  else if (name == "no-unsup") t.enable_unsup = false;
  else throw ConfigError("unknown ablation '" + std::string(name) + "'");
}

}  // namespace pnp::cli

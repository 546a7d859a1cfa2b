#include "idn/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include <fmt/format.h>

namespace idn {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

ConfigFile parse_config(const std::string& text, const std::string& source) {
  ConfigFile file;
  file.source = source;
  std::string section = "run";
  std::istringstream in(text);
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = raw;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      const auto close = line.find(']');
      if (close == std::string::npos) throw ConfigError(fmt::format("{}:{}: unterminated section header", source, lineno));
      section = trim(std::string_view(line).substr(1, close - 1));
      if (section.empty()) throw ConfigError(fmt::format("{}:{}: empty section name", source, lineno));
      line = trim(std::string_view(line).substr(close + 1));
      if (line.empty()) continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(fmt::format("{}:{}: expected key = value", source, lineno));
    const std::string key = trim(std::string_view(line).substr(0, eq));
    if (key.empty()) throw ConfigError(fmt::format("{}:{}: missing key", source, lineno));
    const std::string full = section + "." + key;
    if (file.entries.contains(full)) throw ConfigError(fmt::format("{}:{}: duplicate key '{}'", source, lineno, full));
    file.entries[full] = {trim(std::string_view(line).substr(eq + 1)), lineno};
  }
  return file;
}

ConfigFile read_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PathError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

namespace {

struct Field {
  std::string key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <class T>
T parse_number(const std::string& v) {
  T out{};
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size()) throw ConfigError("not a valid number: '" + v + "'");
  return out;
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  throw ConfigError("not a boolean: '" + v + "'");
}

std::string show(Real v) { return fmt::format("{}", v); }
std::string show(std::size_t v) { return std::to_string(v); }
std::string show(std::uint64_t v, int) { return std::to_string(v); }
std::string show(bool v) { return v ? "true" : "false"; }

#define REAL_FIELD(name, expr) \
  Field { name, [](RunConfig& c, const std::string& v) { expr = parse_number<Real>(v); }, [](const RunConfig& c) { return show(expr); } }
#define SIZE_FIELD(name, expr) \
  Field { name, [](RunConfig& c, const std::string& v) { expr = parse_number<std::size_t>(v); }, [](const RunConfig& c) { return show(static_cast<std::size_t>(expr)); } }
#define INT_FIELD(name, expr) \
  Field { name, [](RunConfig& c, const std::string& v) { expr = parse_number<int>(v); }, [](const RunConfig& c) { return std::to_string(expr); } }
#define BOOL_FIELD(name, expr) \
  Field { name, [](RunConfig& c, const std::string& v) { expr = parse_bool(v); }, [](const RunConfig& c) { return show(static_cast<bool>(expr)); } }
#define PATH_FIELD(name, expr) \
  Field { name, [](RunConfig& c, const std::string& v) { expr = v; }, [](const RunConfig& c) { return (expr).string(); } }

void phase_fields(std::vector<Field>& out, const char* prefix, PhaseConfig TrainConfig::*member) {
  const std::string p = prefix;
  auto add = [&](const std::string& suffix, auto set, auto get) { out.push_back({"train." + p + "_" + suffix, set, get}); };
  add("steps", [member](RunConfig& c, const std::string& v) { (c.train.*member).steps = parse_number<std::size_t>(v); },
      [member](const RunConfig& c) { return show((c.train.*member).steps); });
  add("epochs", [member](RunConfig& c, const std::string& v) { (c.train.*member).epochs = parse_number<std::size_t>(v); },
      [member](const RunConfig& c) { return show((c.train.*member).epochs); });
  add("lr", [member](RunConfig& c, const std::string& v) { (c.train.*member).lr = parse_number<Real>(v); },
      [member](const RunConfig& c) { return show((c.train.*member).lr); });
  add("momentum", [member](RunConfig& c, const std::string& v) { (c.train.*member).momentum = parse_number<Real>(v); },
      [member](const RunConfig& c) { return show((c.train.*member).momentum); });
  add("positives",
      [member](RunConfig& c, const std::string& v) { (c.train.*member).positives = parse_number<std::size_t>(v); },
      [member](const RunConfig& c) { return show((c.train.*member).positives); });
  add("negatives",
      [member](RunConfig& c, const std::string& v) { (c.train.*member).negatives = parse_number<std::size_t>(v); },
      [member](const RunConfig& c) { return show((c.train.*member).negatives); });
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f = {
        Field{"run.seed", [](RunConfig& c, const std::string& v) { c.set_seed(parse_number<std::uint64_t>(v)); },
              [](const RunConfig& c) { return show(c.seed, 0); }},
        PATH_FIELD("paths.train_manifest", c.train_manifest),
        PATH_FIELD("paths.test_manifest", c.test_manifest),
        PATH_FIELD("paths.ae_checkpoint", c.ae_checkpoint),
        PATH_FIELD("paths.checkpoint", c.checkpoint),

        INT_FIELD("synth.n_verbs", c.synth.n_verbs),
        SIZE_FIELD("synth.union_width", c.synth.widths.union_width),
        SIZE_FIELD("synth.human_width", c.synth.widths.human_width),
        SIZE_FIELD("synth.object_width", c.synth.widths.object_width),
        SIZE_FIELD("synth.pairs_per_verb", c.synth.pairs_per_verb),
        SIZE_FIELD("synth.negatives", c.synth.negatives),
        SIZE_FIELD("synth.test_pairs_per_verb", c.synth.test_pairs_per_verb),
        SIZE_FIELD("synth.test_negatives", c.synth.test_negatives),
        REAL_FIELD("synth.sigma", c.synth.sigma),
        INT_FIELD("synth.object_categories", c.synth.object_categories),
        REAL_FIELD("synth.multi_label_prob", c.synth.multi_label_prob),
        REAL_FIELD("synth.human_verb_offset", c.synth.human_verb_offset),
        SIZE_FIELD("synth.joints", c.synth.joints),
        REAL_FIELD("synth.image_w", c.synth.image_w),
        REAL_FIELD("synth.image_h", c.synth.image_h),

        SIZE_FIELD("model.union_location_width", c.train.model.union_location_width),
        SIZE_FIELD("model.ae_hidden", c.train.model.ae_hidden),
        SIZE_FIELD("model.code_width", c.train.model.code_width),
        SIZE_FIELD("model.transform_hidden", c.train.model.transform_hidden),

        SIZE_FIELD("train.candidates", c.train.candidates),
        SIZE_FIELD("train.pose_joints", c.train.pose.joints),
        SIZE_FIELD("train.pose_pelvis", c.train.pose.pelvis),
        SIZE_FIELD("train.pose_head", c.train.pose.head),

        BOOL_FIELD("modules.integration", c.train.modules.integration),
        BOOL_FIELD("modules.decomposition", c.train.modules.decomposition),
        BOOL_FIELD("modules.ipt", c.train.modules.ipt),
        BOOL_FIELD("modules.decompose_integrated", c.train.modules.decompose_integrated),

        BOOL_FIELD("losses.u_cls", c.train.losses.union_cls),
        BOOL_FIELD("losses.ho_cls", c.train.losses.ho_cls),
        BOOL_FIELD("losses.bin", c.train.losses.bin),
        BOOL_FIELD("losses.ae_recon", c.train.losses.ae_recon),
        BOOL_FIELD("losses.ae_cls", c.train.losses.ae_cls),
        Field{"losses.entropy",
              [](RunConfig& c, const std::string& v) {
                if (v == "exp") c.train.losses.cls.form = EntropyForm::exp_distance;
                else if (v == "sigmoid") c.train.losses.cls.form = EntropyForm::sigmoid_bias;
                else throw ConfigError("expected exp or sigmoid, got '" + v + "'");
              },
              [](const RunConfig& c) {
                return std::string(c.train.losses.cls.form == EntropyForm::exp_distance ? "exp" : "sigmoid");
              }},
        BOOL_FIELD("losses.entropy_sum_over_verbs", c.train.losses.cls.sum_over_verbs),
        REAL_FIELD("losses.hinge_weight", c.train.losses.cls.hinge_weight),

        REAL_FIELD("eval.lis_T", c.eval.lis.T),
        REAL_FIELD("eval.lis_k", c.eval.lis.k),
        REAL_FIELD("eval.lis_omega", c.eval.lis.omega),
        REAL_FIELD("eval.nis_threshold", c.eval.nis_threshold),
        BOOL_FIELD("eval.use_nis", c.eval.use_nis),
        REAL_FIELD("eval.iou_threshold", c.eval.iou_threshold),
        SIZE_FIELD("eval.rare_threshold", c.eval.rare_threshold),
    };
    phase_fields(f, "ae", &TrainConfig::ae);
    phase_fields(f, "idn", &TrainConfig::idn);
    phase_fields(f, "ipt", &TrainConfig::idn_ipt);
    return f;
  }();
  return table;
}

#undef REAL_FIELD
#undef SIZE_FIELD
#undef INT_FIELD
#undef BOOL_FIELD
#undef PATH_FIELD

}  // namespace

void RunConfig::set_seed(std::uint64_t s) {
  seed = s;
  synth.seed = s;
  train.seed = s;
}

RunConfig RunConfig::from(const ConfigFile& file) {
  RunConfig c;
  c.set_seed(c.seed);
  for (const auto& [key, entry] : file.entries) {
    const auto& table = fields();
    auto it = std::find_if(table.begin(), table.end(), [&](const Field& f) { return key == f.key; });
    if (it == table.end()) throw ConfigError(fmt::format("{}:{}: unknown key '{}'", file.source, entry.line, key));
    try {
      it->set(c, entry.value);
    } catch (const ConfigError& e) {
      throw ConfigError(fmt::format("{}:{}: key '{}': {}", file.source, entry.line, key, e.what()));
    }
  }
  c.synth.validate();
  try {
    c.train.validate();
  } catch (const Error& e) {
    throw ConfigError(fmt::format("{}: {}", file.source, e.what()));
  }
  return c;
}

std::string RunConfig::documented_defaults() {
  RunConfig c;
  std::vector<std::pair<std::string, std::string>> sections;
  for (const Field& f : fields()) {
    const auto dot = f.key.find('.');
    const std::string s = f.key.substr(0, dot);
    auto it = std::find_if(sections.begin(), sections.end(), [&](const auto& e) { return e.first == s; });
    if (it == sections.end()) it = sections.insert(sections.end(), {s, ""});
    it->second += fmt::format("{} = {}\n", f.key.substr(dot + 1), f.get(c));
  }
  std::string out;
  for (const auto& [name, body] : sections) out += fmt::format("{}[{}]\n{}", out.empty() ? "" : "\n", name, body);
  return out;
}

}  // namespace idn

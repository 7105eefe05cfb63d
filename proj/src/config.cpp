#include "mat/config.hpp"

#include <array>
#include <charconv>

#include "mat/binio.hpp"
#include "mat/errors.hpp"

namespace mat {

namespace {

struct SchemaEntry {
  const char* key;
  const char* default_value;
};

// Full key schema with defaults. Defaults marked "non-paper" in README are
// desk-scale values the paper leaves unstated.
constexpr std::array<SchemaEntry, 49> kSchema = {{
    {"model.family", "mlp"},
    {"model.depth", "3"},
    {"model.width", "128"},
    {"model.input", "12x12x1"},
    {"model.classes", "4"},
    {"model.norm", "ia"},
    {"model.hidden", "64"},

    {"data.source", "blobs"},
    {"data.classes", "4"},
    {"data.per_class", "256"},
    {"data.height", "12"},
    {"data.width", "12"},
    {"data.sigma", "0.12"},
    {"data.train_path", ""},
    {"data.test_path", ""},

    {"attack.eps", "0.01568627450980392"},  // 4/255
    {"attack.steps", "10"},
    {"attack.step_size", "0"},  // 0 selects the eps/4 default
    {"attack.random_start", "true"},

    {"buffer.variant", "pgd-at"},
    {"buffer.beta", "6"},
    {"buffer.ema_decay", "0.999"},
    {"buffer.lr", "0.05"},
    {"buffer.momentum", "0"},
    {"buffer.epochs", "30"},
    {"buffer.batch_size", "16"},
    {"buffer.experts", "4"},
    {"buffer.save_raw", "true"},
    {"buffer.dir", ""},

    {"distill.ipc", "5"},
    {"distill.init", "real"},
    {"distill.inner_lr", "0.02"},
    {"distill.syn_lr", "0.1"},
    {"distill.lr_lr", "1e-05"},
    {"distill.syn_momentum", "0.5"},
    {"distill.iterations", "500"},
    {"distill.max_start_epoch", "20"},
    {"distill.target_offset", "2"},
    {"distill.max_student_steps", "8"},
    {"distill.student_batch", "256"},
    {"distill.degenerate_eps", "1e-12"},
    {"distill.track", "ema"},
    {"distill.out", ""},

    {"eval.epochs", "300"},
    {"eval.lr", "0.01"},
    {"eval.batch_size", "256"},
    {"eval.seeds", "5"},
    {"eval.attacks", "pgd"},
    {"eval.chunk", "256"},
}};

constexpr std::array<SchemaEntry, 3> kSchemaTail = {{
    {"paths.out_dir", "runs/out"},
    {"run.seed", "0"},
    {"run.jobs", "1"},
}};

bool known_key(const std::string& key) {
  for (const auto& e : kSchema)
    if (key == e.key) return true;
  for (const auto& e : kSchemaTail)
    if (key == e.key) return true;
  return false;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

}  // namespace

RunConfig::RunConfig() {
  for (const auto& e : kSchema) values_[e.key] = e.default_value;
  for (const auto& e : kSchemaTail) values_[e.key] = e.default_value;
}

RunConfig RunConfig::load(const std::string& path) {
  return from_text(read_file(path), path);
}

RunConfig RunConfig::from_text(std::string_view text, const std::string& label) {
  RunConfig cfg;
  std::string section;
  size_t pos = 0;
  int line_no = 0;
  while (pos <= text.size()) {
    size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = trim(text.substr(pos, nl - pos));
    pos = nl + 1;
    ++line_no;
    if (line.empty() || line.front() == '#' || line.front() == ';') {
      if (pos > text.size()) break;
      continue;
    }
    if (line.front() == '[') {
      if (line.back() != ']')
        fail(ErrorCategory::config,
             label + ":" + std::to_string(line_no) + ": malformed section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const size_t eq = line.find('=');
    if (eq == std::string_view::npos)
      fail(ErrorCategory::config,
           label + ":" + std::to_string(line_no) + ": expected key = value");
    const std::string key =
        (section.empty() ? "" : section + ".") + std::string(trim(line.substr(0, eq)));
    cfg.set(key, std::string(trim(line.substr(eq + 1))));
    if (pos > text.size()) break;
  }
  return cfg;
}

void RunConfig::set(std::string_view assignment) {
  const size_t eq = assignment.find('=');
  if (eq == std::string_view::npos)
    fail(ErrorCategory::usage,
         "override must look like section.key=value, got '" + std::string(assignment) + "'");
  set(std::string(trim(assignment.substr(0, eq))),
      std::string(trim(assignment.substr(eq + 1))));
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (!known_key(key))
    fail(ErrorCategory::config, "unknown config key '" + key + "'");
  values_[key] = value;
}

const std::string& RunConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end())
    fail(ErrorCategory::config, "unknown config key '" + key + "'");
  return it->second;
}

double RunConfig::f64(const std::string& key) const {
  const std::string& s = get(key);
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    fail(ErrorCategory::config, "config key '" + key + "': bad number '" + s + "'");
  return v;
}

int RunConfig::integer(const std::string& key) const {
  const std::string& s = get(key);
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    fail(ErrorCategory::config, "config key '" + key + "': bad integer '" + s + "'");
  return v;
}

uint64_t RunConfig::u64(const std::string& key) const {
  const std::string& s = get(key);
  uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    fail(ErrorCategory::config, "config key '" + key + "': bad unsigned '" + s + "'");
  return v;
}

bool RunConfig::boolean(const std::string& key) const {
  const std::string& s = get(key);
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  fail(ErrorCategory::config, "config key '" + key + "': bad boolean '" + s + "'");
}

std::vector<std::string> RunConfig::list(const std::string& key) const {
  const std::string& s = get(key);
  std::vector<std::string> out;
  size_t pos = 0;
  while (pos < s.size()) {
    size_t comma = s.find(',', pos);
    if (comma == std::string::npos) comma = s.size();
    const std::string_view item = trim(std::string_view(s).substr(pos, comma - pos));
    if (!item.empty()) out.emplace_back(item);
    pos = comma + 1;
  }
  return out;
}

std::string RunConfig::echo() const {
  std::string out;
  std::string section;
  // std::map keeps keys sorted, which groups sections deterministically.
  for (const auto& [key, value] : values_) {
    const size_t dot = key.find('.');
    const std::string sec = key.substr(0, dot);
    if (sec != section) {
      if (!out.empty()) out += '\n';
      out += "[" + sec + "]\n";
      section = sec;
    }
    out += key.substr(dot + 1) + " = " + value + "\n";
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> RunConfig::provenance_entries() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [key, value] : values_)
    if (!key.starts_with("paths.")) out.emplace_back(key, value);
  return out;
}

}  // namespace mat

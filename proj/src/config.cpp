#include "sigprop/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace sigprop::io {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out))
    throw ValidationError(key, "expected a finite number, got '" + v + "'");
  return out;
}

long long parse_integer(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw ValidationError(key, "expected an integer, got '" + v + "'");
  return out;
}

int parse_int(const std::string& key, const std::string& v) {
  const long long x = parse_integer(key, v);
  if (x < -2147483647LL || x > 2147483647LL) throw ValidationError(key, "integer out of range");
  return static_cast<int>(x);
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw ValidationError(key, "expected an unsigned integer, got '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ValidationError(key, "expected true or false, got '" + v + "'");
}

GridRange parse_range(const std::string& key, const std::string& v) {
  std::vector<std::string> parts;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) parts.push_back(trim(item));
  if (parts.size() != 3) throw ValidationError(key, "expected 'lo, hi, n', got '" + v + "'");
  return {parse_double(key, parts[0]), parse_double(key, parts[1]), parse_int(key, parts[2])};
}

std::string format_range(const GridRange& r) {
  return format_exact(r.lo) + ", " + format_exact(r.hi) + ", " + std::to_string(r.n);
}

}  // namespace

std::string format_exact(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

BlockParams RunConfig::default_block() {
  BlockParams b;
  b.attn.beta = 0.02;
  b.attn.seq_len = 512;
  b.mlp.sigma_w2 = 2.0;
  b.mlp.sigma_b2 = 0.0;
  b.mlp.activation = Activation::ReLU;
  b.alpha_sa = 1.0;
  b.alpha_mlp = 1.0;
  return b;
}

sim::SimConfig RunConfig::sim_config() const {
  sim::SimConfig s;
  s.d = d;
  s.block = block;
  s.n_seeds = n_seeds;
  s.n_sequences = n_sequences;
  s.base_seed = base_seed;
  s.rho0 = classifier.rho0;
  return s;
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "beta",      "seq_len",   "finite_size", "sigma_v2", "sigma_w2",  "sigma_b2", "activation",
      "quad_nodes", "alpha_sa", "alpha_mlp",   "d",        "seeds",     "sequences", "seed",
      "layers",    "collapse_threshold", "rho0", "alpha_range", "beta_range", "log_base", "output",
      "format"};
  return keys;
}

void set_config_value(RunConfig& cfg, const std::string& key, const std::string& v) {
  auto& a = cfg.block.attn;
  auto& m = cfg.block.mlp;
  if (key == "beta") a.beta = parse_double(key, v);
  else if (key == "seq_len") a.seq_len = parse_int(key, v);
  else if (key == "finite_size") a.finite_size = parse_bool(key, v);
  else if (key == "sigma_v2") a.value_var = parse_double(key, v);
  else if (key == "sigma_w2") m.sigma_w2 = parse_double(key, v);
  else if (key == "sigma_b2") m.sigma_b2 = parse_double(key, v);
  else if (key == "activation") {
    try {
      m.activation = activation_from_string(v);
    } catch (const std::invalid_argument&) {
      throw ValidationError(key, "expected relu or tanh, got '" + v + "'");
    }
  } else if (key == "quad_nodes") m.quad_nodes = parse_int(key, v);
  else if (key == "alpha_sa") cfg.block.alpha_sa = parse_double(key, v);
  else if (key == "alpha_mlp") cfg.block.alpha_mlp = parse_double(key, v);
  else if (key == "d") cfg.d = parse_int(key, v);
  else if (key == "seeds") cfg.n_seeds = parse_int(key, v);
  else if (key == "sequences") cfg.n_sequences = parse_int(key, v);
  else if (key == "seed") cfg.base_seed = parse_u64(key, v);
  else if (key == "layers") cfg.classifier.layers = parse_int(key, v);
  else if (key == "collapse_threshold") cfg.classifier.collapse_threshold = parse_double(key, v);
  else if (key == "rho0") cfg.classifier.rho0 = parse_double(key, v);
  else if (key == "alpha_range") cfg.alpha_range = parse_range(key, v);
  else if (key == "beta_range") cfg.beta_range = parse_range(key, v);
  else if (key == "log_base") cfg.log_base = (v == "e") ? 0.0 : parse_double(key, v);
  else if (key == "output") cfg.output = v;
  else if (key == "format") {
    if (v == "csv") cfg.format = OutputFormat::Csv;
    else if (v == "json") cfg.format = OutputFormat::Json;
    else throw ValidationError(key, "expected csv or json, got '" + v + "'");
  } else {
    throw ValidationError(key, "unknown key");
  }
}

void validate_config(const RunConfig& cfg) {
  const auto& a = cfg.block.attn;
  const auto& m = cfg.block.mlp;
  if (!(a.beta >= 0.0)) throw ValidationError("beta", "must be nonnegative");
  if (a.seq_len < 2) throw ValidationError("seq_len", "must be >= 2");
  if (!(a.value_var > 0.0)) throw ValidationError("sigma_v2", "must be positive");
  if (!(m.sigma_w2 > 0.0)) throw ValidationError("sigma_w2", "must be positive");
  if (!(m.sigma_b2 >= 0.0)) throw ValidationError("sigma_b2", "must be nonnegative");
  if (m.quad_nodes < 8 || m.quad_nodes % 8 != 0) throw ValidationError("quad_nodes", "must be a positive multiple of 8");
  if (!(cfg.block.alpha_sa >= 0.0)) throw ValidationError("alpha_sa", "must be nonnegative");
  if (!(cfg.block.alpha_mlp >= 0.0)) throw ValidationError("alpha_mlp", "must be nonnegative");
  if (cfg.d < 2) throw ValidationError("d", "must be >= 2");
  if (cfg.n_seeds < 1) throw ValidationError("seeds", "must be >= 1");
  if (cfg.n_sequences < 1) throw ValidationError("sequences", "must be >= 1");
  if (cfg.classifier.layers < 1) throw ValidationError("layers", "must be >= 1");
  if (!(cfg.classifier.collapse_threshold > 0.0 && cfg.classifier.collapse_threshold < 1.0))
    throw ValidationError("collapse_threshold", "must lie in (0, 1)");
  if (!(cfg.classifier.rho0 >= -1.0 && cfg.classifier.rho0 < 1.0)) throw ValidationError("rho0", "must lie in [-1, 1)");
  for (const auto& [name, r] : {std::pair{"alpha_range", cfg.alpha_range}, std::pair{"beta_range", cfg.beta_range}}) {
    if (r.n < 1) throw ValidationError(name, "point count must be >= 1");
    if (r.n > 1 && !(r.hi > r.lo)) throw ValidationError(name, "range must be increasing");
    if (!(r.lo >= 0.0)) throw ValidationError(name, "values must be nonnegative");
  }
  if (cfg.log_base > 0.0 && cfg.log_base == 1.0) throw ValidationError("log_base", "must not be 1");
  if (cfg.log_base < 0.0) throw ValidationError("log_base", "must be 'e' or a positive number");
}

RunConfig parse_config(std::string_view text) {
  RunConfig cfg;
  std::set<std::string> seen;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;

    std::string line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    if (const auto hash = line.find(" #"); hash != std::string::npos) line = trim(line.substr(0, hash));
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(line_no, "expected 'key = value'");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (key.empty()) throw ParseError(line_no, "missing key");
    if (!seen.insert(key).second) throw ParseError(line_no, "duplicate key '" + key + "'");
    try {
      set_config_value(cfg, key, value);
    } catch (const ValidationError& e) {
      throw ValidationError(e.key(), std::string(e.what()).substr(e.key().size() + 2) + " (line " +
                                         std::to_string(line_no) + ")");
    }
  }
  validate_config(cfg);
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::vector<std::string> block_lines(const BlockParams& b) {
  return {
      "beta = " + format_exact(b.attn.beta),
      "seq_len = " + std::to_string(b.attn.seq_len),
      std::string("finite_size = ") + (b.attn.finite_size ? "true" : "false"),
      "sigma_v2 = " + format_exact(b.attn.value_var),
      "sigma_w2 = " + format_exact(b.mlp.sigma_w2),
      "sigma_b2 = " + format_exact(b.mlp.sigma_b2),
      "activation = " + to_string(b.mlp.activation),
      "quad_nodes = " + std::to_string(b.mlp.quad_nodes),
      "alpha_sa = " + format_exact(b.alpha_sa),
      "alpha_mlp = " + format_exact(b.alpha_mlp),
  };
}

std::vector<std::string> config_lines(const RunConfig& cfg) {
  std::vector<std::string> out = block_lines(cfg.block);
  out.push_back("d = " + std::to_string(cfg.d));
  out.push_back("seeds = " + std::to_string(cfg.n_seeds));
  out.push_back("sequences = " + std::to_string(cfg.n_sequences));
  out.push_back("seed = " + std::to_string(cfg.base_seed));
  out.push_back("layers = " + std::to_string(cfg.classifier.layers));
  out.push_back("collapse_threshold = " + format_exact(cfg.classifier.collapse_threshold));
  out.push_back("rho0 = " + format_exact(cfg.classifier.rho0));
  out.push_back("alpha_range = " + format_range(cfg.alpha_range));
  out.push_back("beta_range = " + format_range(cfg.beta_range));
  out.push_back("log_base = " + (cfg.log_base > 0.0 ? format_exact(cfg.log_base) : std::string("e")));
  if (!cfg.output.empty()) out.push_back("output = " + cfg.output);
  out.push_back(std::string("format = ") + (cfg.format == OutputFormat::Json ? "json" : "csv"));
  return out;
}

std::string serialize_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& l : config_lines(cfg)) out += l + "\n";
  return out;
}

}  // namespace sigprop::io

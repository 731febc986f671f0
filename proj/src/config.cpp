#include "recorrupt/config.hpp"

#include <functional>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "recorrupt/io.hpp"
#include "recorrupt/report.hpp"

namespace recorrupt {

std::string loss_name(LossKind k) {
  switch (k) {
  case LossKind::Supervised: return "supervised";
  case LossKind::Gr2r: return "gr2r";
  case LossKind::L2r: return "l2r";
  case LossKind::Sure: return "sure";
  case LossKind::Unsure: return "unsure";
  }
  return "supervised";
}

LossKind parse_loss(const std::string& name) {
  for (LossKind k : {LossKind::Supervised, LossKind::Gr2r, LossKind::L2r, LossKind::Sure, LossKind::Unsure})
    if (loss_name(k) == name) return k;
  throw std::invalid_argument("unknown loss '" + name + "' (expected supervised, gr2r, l2r, sure or unsure)");
}

NoiseModel RunConfig::noise_model() const {
  NoiseModel m = noise;
  if (m.family == NoiseFamily::CorrelatedGaussian) m.kernel = gaussian_kernel(noise_kernel_size, noise_kernel_std);
  return m;
}

void RunConfig::validate() const {
  if (image_size < 16) throw std::invalid_argument("config: data.size must be >= 16");
  if (n_train == 0 && train_dir.empty()) throw std::invalid_argument("config: data.n_train must be > 0");
  if (batch_size == 0) throw std::invalid_argument("config: optim.batch_size must be > 0");
  if (epochs == 0) throw std::invalid_argument("config: optim.epochs must be > 0");
  if (diag_mc == 0) throw std::invalid_argument("config: optim.diag_mc must be > 0");
  const NoiseModel m = noise_model();
  m.validate();
  denoiser.validate();
  recorruptor.validate();
  l2r.validate();
  switch (loss) {
  case LossKind::Sure:
    if (m.family != NoiseFamily::Gaussian) throw std::invalid_argument("config: loss sure needs the gaussian noise model, got " + m.name());
    break;
  case LossKind::Unsure:
    if (m.family != NoiseFamily::Gaussian && m.family != NoiseFamily::CorrelatedGaussian) {
      throw std::invalid_argument("config: loss unsure needs a gaussian or correlated noise model, got " + m.name());
    }
    break;
  case LossKind::L2r:
    if (!m.additive() && !recorruptor.pg_scale) {
      throw std::invalid_argument("config: loss l2r with " + m.name() + " noise needs recorruptor.pg_scale = true");
    }
    break;
  case LossKind::Gr2r: {
    SplitConfig s;
    s.alpha = alpha;
    s.tau = tau;
    s.validate();
    break;
  }
  case LossKind::Supervised: break;
  }
}

namespace {

struct Field {
  const char* section;
  const char* key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

std::size_t to_count(const std::string& v) {
  std::size_t pos = 0;
  const long long x = std::stoll(v, &pos);
  if (pos != v.size() || x < 0) throw std::invalid_argument("expected a non-negative integer, got '" + v + "'");
  return static_cast<std::size_t>(x);
}

std::uint64_t to_u64(const std::string& v) {
  std::size_t pos = 0;
  const unsigned long long x = std::stoull(v, &pos);
  if (pos != v.size() || v.front() == '-') throw std::invalid_argument("expected a non-negative integer, got '" + v + "'");
  return x;
}

double to_real(const std::string& v) {
  std::size_t pos = 0;
  const double x = std::stod(v, &pos);
  if (pos != v.size()) throw std::invalid_argument("expected a real, got '" + v + "'");
  return x;
}

bool to_bool(const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("expected true or false, got '" + v + "'");
}

std::string bool_text(bool b) { return b ? "true" : "false"; }

#define REAL(sec, key, member) \
  Field { sec, key, [](const RunConfig& c) { return format_real(c.member); }, [](RunConfig& c, const std::string& v) { c.member = to_real(v); } }
#define COUNT(sec, key, member) \
  Field { sec, key, [](const RunConfig& c) { return std::to_string(c.member); }, [](RunConfig& c, const std::string& v) { c.member = to_count(v); } }
#define FLAG(sec, key, member) \
  Field { sec, key, [](const RunConfig& c) { return bool_text(c.member); }, [](RunConfig& c, const std::string& v) { c.member = to_bool(v); } }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      Field{"data", "train_dir", [](const RunConfig& c) { return c.train_dir; }, [](RunConfig& c, const std::string& v) { c.train_dir = v; }},
      Field{"data", "val_dir", [](const RunConfig& c) { return c.val_dir; }, [](RunConfig& c, const std::string& v) { c.val_dir = v; }},
      COUNT("data", "n_train", n_train),
      COUNT("data", "n_val", n_val),
      COUNT("data", "size", image_size),
      Field{"data", "seed", [](const RunConfig& c) { return std::to_string(c.data_seed); },
            [](RunConfig& c, const std::string& v) { c.data_seed = to_u64(v); }},
      Field{"model", "family", [](const RunConfig& c) { return family_name(c.noise.family); },
            [](RunConfig& c, const std::string& v) { c.noise.family = parse_noise_family(v); }},
      REAL("model", "sigma", noise.sigma),
      REAL("model", "b", noise.b),
      REAL("model", "ell", noise.ell),
      REAL("model", "gamma", noise.gamma),
      Field{"model", "n_trials", [](const RunConfig& c) { return std::to_string(c.noise.n_trials); },
            [](RunConfig& c, const std::string& v) { c.noise.n_trials = static_cast<int>(to_count(v)); }},
      REAL("model", "p0", noise.p0),
      COUNT("model", "kernel_size", noise_kernel_size),
      REAL("model", "kernel_std", noise_kernel_std),
      COUNT("denoiser", "layers", denoiser.layers),
      COUNT("denoiser", "channels", denoiser.channels),
      COUNT("denoiser", "kernel_size", denoiser.kernel_size),
      FLAG("denoiser", "residual", denoiser.residual),
      Field{"loss", "type", [](const RunConfig& c) { return loss_name(c.loss); },
            [](RunConfig& c, const std::string& v) { c.loss = parse_loss(v); }},
      REAL("loss", "alpha", alpha),
      REAL("loss", "tau", tau),
      Field{"loss", "pg_weight", [](const RunConfig& c) { return std::string(c.pg_weight == PgWeight::AsPrinted ? "as_printed" : "inverse"); },
            [](RunConfig& c, const std::string& v) {
              if (v == "as_printed") c.pg_weight = PgWeight::AsPrinted;
              else if (v == "inverse") c.pg_weight = PgWeight::Inverse;
              else throw std::invalid_argument("expected as_printed or inverse, got '" + v + "'");
            }},
      COUNT("loss", "probes", probes),
      REAL("loss", "fd_step", fd_step),
      REAL("loss", "unsure_step", unsure_step),
      COUNT("recorruptor", "depth", recorruptor.depth),
      COUNT("recorruptor", "width", recorruptor.width),
      COUNT("recorruptor", "kernel_size", recorruptor.kernel_size),
      FLAG("recorruptor", "pg_scale", recorruptor.pg_scale),
      REAL("recorruptor", "kernel_init", recorruptor.kernel_init),
      REAL("recorruptor", "tau", l2r.tau),
      FLAG("recorruptor", "joint", l2r.joint),
      FLAG("recorruptor", "stop_gradient", l2r.stop_gradient),
      REAL("recorruptor", "lr", l2r.h_lr),
      COUNT("recorruptor", "id_pretrain_steps", l2r.id_pretrain_steps),
      Field{"recorruptor", "h_objective",
            [](const RunConfig& c) { return std::string(c.l2r.h_objective == HObjective::Lagrangian ? "lagrangian" : "gr2r"); },
            [](RunConfig& c, const std::string& v) {
              if (v == "lagrangian") c.l2r.h_objective = HObjective::Lagrangian;
              else if (v == "gr2r") c.l2r.h_objective = HObjective::Gr2rForm;
              else throw std::invalid_argument("expected lagrangian or gr2r, got '" + v + "'");
            }},
      Field{"recorruptor", "corr_scale",
            [](const RunConfig& c) {
              switch (c.l2r.corr_scale) {
              case CorrelationScale::Two: return std::string("two");
              case CorrelationScale::One: return std::string("one");
              default: return std::string("two_over_tau");
              }
            },
            [](RunConfig& c, const std::string& v) {
              if (v == "two_over_tau") c.l2r.corr_scale = CorrelationScale::TwoOverTau;
              else if (v == "two") c.l2r.corr_scale = CorrelationScale::Two;
              else if (v == "one") c.l2r.corr_scale = CorrelationScale::One;
              else throw std::invalid_argument("expected two_over_tau, two or one, got '" + v + "'");
            }},
      COUNT("optim", "epochs", epochs),
      COUNT("optim", "batch_size", batch_size),
      REAL("optim", "lr_start", lr_start),
      REAL("optim", "lr_end", lr_end),
      REAL("optim", "weight_decay", weight_decay),
      Field{"optim", "seed", [](const RunConfig& c) { return std::to_string(c.seed); },
            [](RunConfig& c, const std::string& v) { c.seed = to_u64(v); }},
      COUNT("optim", "diag_mc", diag_mc),
  };
  return table;
}

#undef REAL
#undef COUNT
#undef FLAG

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

} // namespace

RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line, section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = "config line " + std::to_string(lineno) + ": ";
    std::string s = trim(line);
    if (s.empty() || s[0] == '#' || s[0] == ';') continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw std::invalid_argument(where + "unterminated section header");
      section = trim(s.substr(1, s.size() - 2));
      bool known = false;
      for (const Field& f : fields()) known = known || section == f.section;
      if (!known) throw std::invalid_argument(where + "unknown section [" + section + "]");
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw std::invalid_argument(where + "expected key = value");
    if (section.empty()) throw std::invalid_argument(where + "key outside any section");
    const std::string key = trim(s.substr(0, eq)), value = trim(s.substr(eq + 1));
    const Field* match = nullptr;
    for (const Field& f : fields())
      if (section == f.section && key == f.key) match = &f;
    if (!match) throw std::invalid_argument(where + "unknown key '" + key + "' in [" + section + "]");
    try {
      match->set(cfg, value);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(where + section + "." + key + ": " + e.what());
    } catch (const std::out_of_range&) {
      throw std::invalid_argument(where + section + "." + key + ": value out of range");
    }
  }
  return cfg;
}

RunConfig load_config(const std::string& path) { return parse_config(read_file(path)); }

std::string serialize_config(const RunConfig& cfg) {
  std::string out, section;
  for (const Field& f : fields()) {
    if (section != f.section) {
      if (!section.empty()) out += "\n";
      section = f.section;
      out += "[" + section + "]\n";
    }
    out += std::string(f.key) + " = " + f.get(cfg) + "\n";
  }
  return out;
}

} // namespace recorrupt

// Copyright (c) 2026 SynthForge contributors
// SPDX-License-Identifier: Apache-2.0

#include "synthforge/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "synthforge/errors.hpp"
#include "synthforge/format.hpp"

namespace synthforge {

namespace {

struct SourceLine {
  int no = 0;
  int indent = 0;
  std::string content;
};

[[noreturn]] void parse_fail(int line, int column, const std::string& message) {
  throw ParseError(fmt::format("line {}, column {}: {}", line, column, message));
}

bool is_key_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

std::vector<SourceLine> lex_lines(const std::string& text) {
  std::vector<SourceLine> out;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) {
      if (pos == text.size()) break;
      end = text.size();
    }
    ++line_no;
    std::string raw = text.substr(pos, end - pos);
    pos = end + 1;

    if (auto tab = raw.find('\t'); tab != std::string::npos) {
      parse_fail(line_no, static_cast<int>(tab) + 1, "tab character (indentation and values must use spaces)");
    }
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    while (!raw.empty() && (raw.back() == ' ' || raw.back() == '\r')) raw.pop_back();
    if (raw.empty()) continue;

    std::size_t indent = 0;
    while (indent < raw.size() && raw[indent] == ' ') ++indent;
    if (indent % 2 != 0) {
      parse_fail(line_no, static_cast<int>(indent) + 1,
                 fmt::format("indentation of {} spaces is not a multiple of 2", indent));
    }
    out.push_back({line_no, static_cast<int>(indent), raw.substr(indent)});
  }
  return out;
}

ConfigScalar type_scalar(const std::string& text, int line, int column) {
  ConfigScalar s;
  const bool int_like = [&] {
    std::size_t i = text.front() == '-' ? 1 : 0;
    if (i >= text.size()) return false;
    for (; i < text.size(); ++i) {
      if (!std::isdigit(static_cast<unsigned char>(text[i]))) return false;
    }
    return true;
  }();
  if (int_like) {
    long long v = 0;
    if (!parse_int64(text, v)) parse_fail(line, column, fmt::format("integer literal '{}' out of range", text));
    s.kind = ConfigScalar::Kind::int64;
    s.i = v;
    return s;
  }
  const bool float_like = [&] {
    bool digit = false, dot = false, exp = false;
    std::size_t i = (text.front() == '-' || text.front() == '+') ? 1 : 0;
    if (i >= text.size()) return false;
    for (; i < text.size(); ++i) {
      const char c = text[i];
      if (std::isdigit(static_cast<unsigned char>(c))) {
        digit = true;
      } else if (c == '.' && !dot && !exp) {
        dot = true;
      } else if ((c == 'e' || c == 'E') && digit && !exp && i + 1 < text.size()) {
        exp = true;
        if (text[i + 1] == '+' || text[i + 1] == '-') ++i;
        if (i + 1 >= text.size()) return false;
      } else {
        return false;
      }
    }
    return digit && (dot || exp);
  }();
  if (float_like) {
    double v = 0.0;
    if (!parse_double(text, v)) {
      parse_fail(line, column, fmt::format("malformed or out-of-range float literal '{}'", text));
    }
    s.kind = ConfigScalar::Kind::float64;
    s.f = v;
    return s;
  }
  if (text == "true" || text == "false") {
    s.kind = ConfigScalar::Kind::boolean;
    s.b = (text == "true");
    return s;
  }
  s.kind = ConfigScalar::Kind::string;
  s.s = text;
  return s;
}

class BlockParser {
 public:
  explicit BlockParser(std::vector<SourceLine> lines) : lines_(std::move(lines)) {}

  ConfigNode parse_root() {
    ConfigNode root;
    root.kind = ConfigNode::Kind::map;
    root.line = 1;
    if (lines_.empty()) return root;
    if (lines_.front().indent != 0) {
      parse_fail(lines_.front().no, 1,
                 fmt::format("unexpected indentation of {} spaces at top level", lines_.front().indent));
    }
    root = parse_block(0, 1);
    if (pos_ < lines_.size()) {
      const SourceLine& l = lines_[pos_];
      parse_fail(l.no, l.indent + 1, fmt::format("unexpected indentation of {} spaces", l.indent));
    }
    return root;
  }

 private:
  ConfigNode parse_block(int level, int block_line) {
    const int want = 2 * level;
    const SourceLine& first = lines_[pos_];
    if (first.indent != want) {
      parse_fail(first.no, first.indent + 1,
                 fmt::format("inconsistent indentation: expected {} spaces, got {}", want, first.indent));
    }
    if (first.content == "-" || first.content.rfind("- ", 0) == 0) {
      return parse_list(level, block_line);
    }
    return parse_map(level, block_line);
  }

  ConfigNode parse_list(int level, int block_line) {
    const int want = 2 * level;
    ConfigNode node;
    node.kind = ConfigNode::Kind::list;
    node.line = block_line;
    while (pos_ < lines_.size() && lines_[pos_].indent >= want) {
      const SourceLine& l = lines_[pos_];
      if (l.indent != want) {
        parse_fail(l.no, l.indent + 1, "list items cannot carry nested content");
      }
      if (l.content == "-") parse_fail(l.no, want + 1, "empty list item");
      if (l.content.rfind("- ", 0) != 0) {
        parse_fail(l.no, want + 1, "cannot mix list items and keys at the same level");
      }
      std::string value = l.content.substr(2);
      std::size_t skip = 0;
      while (skip < value.size() && value[skip] == ' ') ++skip;
      value.erase(0, skip);
      if (value.empty()) parse_fail(l.no, want + 1, "empty list item");
      ConfigNode item;
      item.kind = ConfigNode::Kind::scalar;
      item.line = l.no;
      item.scalar = type_scalar(value, l.no, want + 3);
      node.items.push_back(std::move(item));
      ++pos_;
    }
    return node;
  }

  ConfigNode parse_map(int level, int block_line) {
    const int want = 2 * level;
    ConfigNode node;
    node.kind = ConfigNode::Kind::map;
    node.line = block_line;
    while (pos_ < lines_.size() && lines_[pos_].indent >= want) {
      const SourceLine& l = lines_[pos_];
      if (l.indent != want) {
        parse_fail(l.no, l.indent + 1,
                   fmt::format("inconsistent indentation: expected {} spaces, got {}", want, l.indent));
      }
      if (l.content == "-" || l.content.rfind("- ", 0) == 0) {
        parse_fail(l.no, want + 1, "cannot mix list items and keys at the same level");
      }
      const std::size_t colon = l.content.find(':');
      if (colon == std::string::npos || colon == 0) {
        parse_fail(l.no, want + 1, "malformed line (expected 'key: value' or 'key:')");
      }
      const std::string key = l.content.substr(0, colon);
      for (std::size_t i = 0; i < key.size(); ++i) {
        if (!is_key_char(key[i])) {
          parse_fail(l.no, want + static_cast<int>(i) + 1,
                     fmt::format("invalid character '{}' in key", key[i]));
        }
      }
      for (const auto& [existing, child] : node.entries) {
        if (existing == key) {
          parse_fail(l.no, want + 1,
                     fmt::format("duplicate key '{}' (first defined at line {})", key, child.line));
        }
      }

      std::string rest = l.content.substr(colon + 1);
      std::size_t skip = 0;
      while (skip < rest.size() && rest[skip] == ' ') ++skip;
      rest.erase(0, skip);

      const int key_line = l.no;
      ++pos_;
      if (rest.empty()) {
        if (pos_ >= lines_.size() || lines_[pos_].indent <= want) {
          parse_fail(key_line, want + 1, fmt::format("expected an indented block under '{}'", key));
        }
        if (lines_[pos_].indent != want + 2) {
          parse_fail(lines_[pos_].no, lines_[pos_].indent + 1,
                     fmt::format("inconsistent indentation: expected {} spaces, got {}", want + 2,
                                 lines_[pos_].indent));
        }
        ConfigNode child = parse_block(level + 1, key_line);
        node.entries.emplace_back(key, std::move(child));
      } else {
        if (pos_ < lines_.size() && lines_[pos_].indent > want) {
          parse_fail(lines_[pos_].no, lines_[pos_].indent + 1,
                     fmt::format("unexpected indented block under scalar value of '{}'", key));
        }
        ConfigNode child;
        child.kind = ConfigNode::Kind::scalar;
        child.line = key_line;
        child.scalar = type_scalar(rest, key_line, want + static_cast<int>(colon) + 2);
        node.entries.emplace_back(key, std::move(child));
      }
    }
    return node;
  }

  std::vector<SourceLine> lines_;
  std::size_t pos_ = 0;
};

// ---- validation helpers ----

std::size_t levenshtein(std::string_view a, std::string_view b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::string nearest_key(std::string_view key, const std::vector<std::string_view>& known) {
  std::string best;
  std::size_t best_d = static_cast<std::size_t>(-1);
  for (std::string_view k : known) {
    const std::size_t d = levenshtein(key, k);
    if (d < best_d || (d == best_d && k < best)) {
      best_d = d;
      best = std::string(k);
    }
  }
  return best;
}

[[noreturn]] void invalid(int line, const std::string& message) {
  if (line > 0) throw ValidationError(fmt::format("line {}: {}", line, message));
  throw ValidationError(message);
}

const char* scalar_kind_name(ConfigScalar::Kind k) {
  switch (k) {
    case ConfigScalar::Kind::int64: return "an integer";
    case ConfigScalar::Kind::float64: return "a float";
    case ConfigScalar::Kind::boolean: return "a boolean";
    case ConfigScalar::Kind::string: return "a string";
  }
  return "?";
}

/// Typed access over one map node with unknown-key rejection.
class MapReader {
 public:
  MapReader(const ConfigNode& node, std::string context, std::vector<std::string_view> known)
      : node_(node), context_(std::move(context)), known_(std::move(known)) {
    for (const auto& [key, child] : node_.entries) {
      if (std::find(known_.begin(), known_.end(), key) == known_.end()) {
        invalid(child.line, fmt::format("unknown key '{}'{} (did you mean '{}'?)", key,
                                        context_.empty() ? "" : " in " + context_,
                                        nearest_key(key, known_)));
      }
    }
  }

  const ConfigNode* find(std::string_view key) const { return node_.find(key); }
  int line_of(std::string_view key, int fallback = 0) const {
    const ConfigNode* n = node_.find(key);
    return n ? n->line : fallback;
  }

  const ConfigNode& scalar(std::string_view key, const char* expected) const {
    const ConfigNode* n = node_.find(key);
    if (!n) throw ValidationError(fmt::format("missing required key '{}'", key));
    if (n->kind != ConfigNode::Kind::scalar) {
      invalid(n->line, fmt::format("key '{}' expects {}, got a {}", key, expected,
                                   n->kind == ConfigNode::Kind::map ? "map" : "list"));
    }
    return *n;
  }

  std::int64_t get_int(std::string_view key, std::int64_t fallback) const {
    const ConfigNode* n = node_.find(key);
    if (!n) return fallback;
    return req_int(key);
  }

  std::int64_t req_int(std::string_view key) const {
    const ConfigNode& n = scalar(key, "an integer");
    if (n.scalar.kind != ConfigScalar::Kind::int64) {
      invalid(n.line, fmt::format("key '{}' expects an integer, got {}", key, scalar_kind_name(n.scalar.kind)));
    }
    return n.scalar.i;
  }

  double get_float(std::string_view key, double fallback) const {
    const ConfigNode* n = node_.find(key);
    if (!n) return fallback;
    if (n->kind != ConfigNode::Kind::scalar ||
        (n->scalar.kind != ConfigScalar::Kind::float64 && n->scalar.kind != ConfigScalar::Kind::int64)) {
      invalid(n->line, fmt::format("key '{}' expects a float, got {}", key,
                                   n->kind == ConfigNode::Kind::scalar ? scalar_kind_name(n->scalar.kind)
                                                                       : "a non-scalar"));
    }
    return n->scalar.kind == ConfigScalar::Kind::float64 ? n->scalar.f
                                                         : static_cast<double>(n->scalar.i);
  }

  bool get_bool(std::string_view key, bool fallback) const {
    const ConfigNode* n = node_.find(key);
    if (!n) return fallback;
    if (n->kind != ConfigNode::Kind::scalar || n->scalar.kind != ConfigScalar::Kind::boolean) {
      invalid(n->line, fmt::format("key '{}' expects a boolean (true/false)", key));
    }
    return n->scalar.b;
  }

  std::string get_string(std::string_view key, std::string fallback) const {
    const ConfigNode* n = node_.find(key);
    if (!n) return fallback;
    return req_string(key);
  }

  std::string req_string(std::string_view key) const {
    const ConfigNode& n = scalar(key, "a string");
    if (n.scalar.kind != ConfigScalar::Kind::string) {
      invalid(n.line, fmt::format("key '{}' expects a string, got {}", key, scalar_kind_name(n.scalar.kind)));
    }
    return n.scalar.s;
  }

 private:
  const ConfigNode& node_;
  std::string context_;
  std::vector<std::string_view> known_;
};

const ConfigNode* section(const ConfigNode& root, std::string_view key) {
  const ConfigNode* n = root.find(key);
  if (!n) return nullptr;
  if (n->kind != ConfigNode::Kind::map) {
    invalid(n->line, fmt::format("key '{}' expects a map of settings", key));
  }
  return n;
}

}  // namespace

const ConfigNode* ConfigNode::find(std::string_view key) const {
  if (kind != Kind::map) return nullptr;
  for (const auto& [k, child] : entries) {
    if (k == key) return &child;
  }
  return nullptr;
}

ConfigDocument parse_document(const std::string& text) {
  ConfigDocument doc;
  BlockParser parser(lex_lines(text));
  doc.root = parser.parse_root();
  if (doc.root.kind != ConfigNode::Kind::map) {
    throw ParseError("line 1, column 1: top level must be a map of keys, not a list");
  }
  return doc;
}

std::string_view family_name(ModelFamily family) {
  switch (family) {
    case ModelFamily::autoencoder: return "autoencoder";
    case ModelFamily::gan: return "gan";
    case ModelFamily::diffusion: return "diffusion";
  }
  return "?";
}

std::string_view paradigm_name(LabelingParadigm paradigm) {
  return paradigm == LabelingParadigm::labeled ? "labeled" : "unlabeled";
}

ExperimentConfig validate_config(const ConfigDocument& doc) {
  static const std::vector<std::string_view> top_keys = {
      "model_family", "labeling_paradigm", "image_size", "channels", "num_classes",
      "latent_dim", "batch_size", "epochs", "seed", "checkpoint_every", "workers",
      "optimizer", "scheduler", "autoencoder", "gan", "diffusion", "augment", "normalization"};
  MapReader top(doc.root, "", top_keys);

  ExperimentConfig cfg;

  {
    const std::string family = top.req_string("model_family");
    if (family == "autoencoder") cfg.model_family = ModelFamily::autoencoder;
    else if (family == "gan") cfg.model_family = ModelFamily::gan;
    else if (family == "diffusion") cfg.model_family = ModelFamily::diffusion;
    else invalid(top.line_of("model_family"),
                 fmt::format("unknown model_family '{}' (expected autoencoder, gan, or diffusion)", family));
  }
  {
    const std::string paradigm = top.get_string("labeling_paradigm", "unlabeled");
    if (paradigm == "unlabeled") cfg.labeling_paradigm = LabelingParadigm::unlabeled;
    else if (paradigm == "labeled") cfg.labeling_paradigm = LabelingParadigm::labeled;
    else invalid(top.line_of("labeling_paradigm"),
                 fmt::format("unknown labeling_paradigm '{}' (expected unlabeled or labeled)", paradigm));
  }

  cfg.image_size = top.req_int("image_size");
  if (cfg.image_size != 8 && cfg.image_size != 16 && cfg.image_size != 32 && cfg.image_size != 64) {
    invalid(top.line_of("image_size"), fmt::format("image_size must be one of 8, 16, 32, 64 (got {})", cfg.image_size));
  }

  cfg.channels = top.get_int("channels", 1);
  if (cfg.channels < 1 || cfg.channels > 4) {
    invalid(top.line_of("channels"), fmt::format("channels must be between 1 and 4 (got {})", cfg.channels));
  }

  cfg.num_classes = top.get_int("num_classes", 0);
  if (cfg.labeling_paradigm == LabelingParadigm::labeled) {
    if (cfg.num_classes < 2) {
      invalid(top.line_of("num_classes", top.line_of("labeling_paradigm")),
              fmt::format("labeled paradigm requires num_classes >= 2 (got {})", cfg.num_classes));
    }
  } else if (cfg.num_classes != 0) {
    invalid(top.line_of("num_classes"),
            fmt::format("unlabeled paradigm requires num_classes = 0 (got {})", cfg.num_classes));
  }

  cfg.latent_dim = top.get_int("latent_dim", 16);
  if (cfg.latent_dim < 1) invalid(top.line_of("latent_dim"), "latent_dim must be at least 1");

  cfg.batch_size = top.get_int("batch_size", 16);
  if (cfg.batch_size < 1) invalid(top.line_of("batch_size"), "batch_size must be at least 1");

  cfg.epochs = top.req_int("epochs");
  if (cfg.epochs < 1) invalid(top.line_of("epochs"), fmt::format("epochs must be at least 1 (got {})", cfg.epochs));

  {
    const std::int64_t seed = top.get_int("seed", 42);
    if (seed < 0) invalid(top.line_of("seed"), fmt::format("seed must be non-negative (got {})", seed));
    cfg.seed = static_cast<std::uint64_t>(seed);
  }

  cfg.checkpoint_every = top.get_int("checkpoint_every", 0);
  if (cfg.checkpoint_every < 0) invalid(top.line_of("checkpoint_every"), "checkpoint_every must be non-negative");

  cfg.workers = top.get_int("workers", 1);
  if (cfg.workers < 1) invalid(top.line_of("workers"), "workers must be at least 1");

  if (const ConfigNode* opt = section(doc.root, "optimizer")) {
    MapReader r(*opt, "optimizer", {"kind", "lr", "momentum", "beta1", "beta2", "eps", "clip_norm"});
    const std::string kind = r.get_string("kind", "adam");
    if (kind == "sgd") cfg.optimizer.kind = OptimizerKind::sgd;
    else if (kind == "adam") cfg.optimizer.kind = OptimizerKind::adam;
    else invalid(r.line_of("kind"), fmt::format("unknown optimizer kind '{}' (expected sgd or adam)", kind));
    cfg.optimizer.lr = r.get_float("lr", 0.001);
    if (!(cfg.optimizer.lr > 0.0)) invalid(r.line_of("lr"), "lr must be positive");
    cfg.optimizer.momentum = r.get_float("momentum", 0.9);
    if (cfg.optimizer.momentum < 0.0 || cfg.optimizer.momentum >= 1.0) {
      invalid(r.line_of("momentum"), "momentum must be in [0, 1)");
    }
    cfg.optimizer.beta1 = r.get_float("beta1", 0.9);
    if (cfg.optimizer.beta1 < 0.0 || cfg.optimizer.beta1 >= 1.0) invalid(r.line_of("beta1"), "beta1 must be in [0, 1)");
    cfg.optimizer.beta2 = r.get_float("beta2", 0.999);
    if (cfg.optimizer.beta2 < 0.0 || cfg.optimizer.beta2 >= 1.0) invalid(r.line_of("beta2"), "beta2 must be in [0, 1)");
    cfg.optimizer.eps = r.get_float("eps", 1e-8);
    if (!(cfg.optimizer.eps > 0.0)) invalid(r.line_of("eps"), "eps must be positive");
    cfg.optimizer.clip_norm = r.get_float("clip_norm", 0.0);
    if (cfg.optimizer.clip_norm < 0.0) invalid(r.line_of("clip_norm"), "clip_norm must be non-negative");
  }

  if (const ConfigNode* sch = section(doc.root, "scheduler")) {
    MapReader r(*sch, "scheduler", {"kind", "gamma", "period", "lr_min", "t_max"});
    const std::string kind = r.get_string("kind", "constant");
    if (kind == "constant") cfg.scheduler.kind = ScheduleKind::constant;
    else if (kind == "step") cfg.scheduler.kind = ScheduleKind::step;
    else if (kind == "cosine") cfg.scheduler.kind = ScheduleKind::cosine;
    else invalid(r.line_of("kind"), fmt::format("unknown scheduler kind '{}' (expected constant, step, or cosine)", kind));
    cfg.scheduler.gamma = r.get_float("gamma", 0.1);
    if (!(cfg.scheduler.gamma > 0.0)) invalid(r.line_of("gamma"), "gamma must be positive");
    const std::int64_t period = r.get_int("period", 10);
    if (period < 1) invalid(r.line_of("period"), "period must be at least 1");
    cfg.scheduler.period = static_cast<std::uint64_t>(period);
    cfg.scheduler.lr_min = r.get_float("lr_min", 0.0);
    if (cfg.scheduler.lr_min < 0.0) invalid(r.line_of("lr_min"), "lr_min must be non-negative");
    const std::int64_t t_max = r.get_int("t_max", 0);
    if (t_max < 0) invalid(r.line_of("t_max"), "t_max must be non-negative");
    cfg.scheduler.t_max = static_cast<std::uint64_t>(t_max);
  }
  if (cfg.scheduler.t_max == 0) cfg.scheduler.t_max = static_cast<std::uint64_t>(cfg.epochs);

  if (const ConfigNode* ae = section(doc.root, "autoencoder")) {
    if (cfg.model_family != ModelFamily::autoencoder) {
      invalid(ae->line, "section 'autoencoder' is only valid when model_family is autoencoder");
    }
    MapReader r(*ae, "autoencoder", {"beta_kl", "variational"});
    cfg.autoencoder.beta_kl = r.get_float("beta_kl", 1.0);
    if (cfg.autoencoder.beta_kl < 0.0) invalid(r.line_of("beta_kl"), "beta_kl must be non-negative");
    cfg.autoencoder.variational = r.get_bool("variational", true);
  }

  cfg.gan.latent_dim = cfg.latent_dim;
  if (const ConfigNode* gan = section(doc.root, "gan")) {
    if (cfg.model_family != ModelFamily::gan) {
      invalid(gan->line, "section 'gan' is only valid when model_family is gan");
    }
    MapReader r(*gan, "gan", {"latent_dim", "label_smoothing"});
    cfg.gan.latent_dim = r.get_int("latent_dim", cfg.latent_dim);
    if (cfg.gan.latent_dim < 1) invalid(r.line_of("latent_dim"), "latent_dim must be at least 1");
    cfg.gan.label_smoothing = r.get_float("label_smoothing", 0.0);
    if (cfg.gan.label_smoothing < 0.0 || cfg.gan.label_smoothing > 0.5) {
      invalid(r.line_of("label_smoothing"), "label_smoothing must be in [0, 0.5]");
    }
  }

  if (const ConfigNode* diff = section(doc.root, "diffusion")) {
    if (cfg.model_family != ModelFamily::diffusion) {
      invalid(diff->line, "section 'diffusion' is only valid when model_family is diffusion");
    }
    MapReader r(*diff, "diffusion", {"timesteps", "beta_start", "beta_end", "sampling_steps"});
    cfg.diffusion.timesteps = r.get_int("timesteps", 1000);
    if (cfg.diffusion.timesteps < 2) {
      invalid(r.line_of("timesteps"), fmt::format("timesteps must be at least 2 (got {})", cfg.diffusion.timesteps));
    }
    cfg.diffusion.beta_start = r.get_float("beta_start", 1e-4);
    cfg.diffusion.beta_end = r.get_float("beta_end", 0.02);
    const int beta_line = r.line_of("beta_start", r.line_of("beta_end", diff->line));
    if (!(cfg.diffusion.beta_start > 0.0) || !(cfg.diffusion.beta_end < 1.0) ||
        !(cfg.diffusion.beta_start <= cfg.diffusion.beta_end)) {
      invalid(beta_line, fmt::format("0 < beta_start <= beta_end < 1 required (got {} and {})",
                                     cfg.diffusion.beta_start, cfg.diffusion.beta_end));
    }
    cfg.diffusion.sampling_steps = r.get_int("sampling_steps", 0);
    if (cfg.diffusion.sampling_steps == 0) cfg.diffusion.sampling_steps = cfg.diffusion.timesteps;
    if (cfg.diffusion.sampling_steps != cfg.diffusion.timesteps) {
      invalid(r.line_of("sampling_steps"),
              fmt::format("sampling_steps must equal timesteps ({}) in this version", cfg.diffusion.timesteps));
    }
  } else {
    cfg.diffusion.sampling_steps = cfg.diffusion.timesteps;
  }

  if (const ConfigNode* aug = section(doc.root, "augment")) {
    MapReader r(*aug, "augment", {"hflip", "vflip", "rot90", "noise_sigma"});
    cfg.augment.hflip = r.get_bool("hflip", false);
    cfg.augment.vflip = r.get_bool("vflip", false);
    cfg.augment.rot90 = r.get_bool("rot90", false);
    cfg.augment.noise_sigma = r.get_float("noise_sigma", 0.0);
    if (cfg.augment.noise_sigma < 0.0) invalid(r.line_of("noise_sigma"), "noise_sigma must be non-negative");
  }

  if (const ConfigNode* norm = section(doc.root, "normalization")) {
    MapReader r(*norm, "normalization", {"lo", "hi"});
    cfg.normalization.lo = r.get_float("lo", -1.0);
    cfg.normalization.hi = r.get_float("hi", 1.0);
    if (!(cfg.normalization.lo < cfg.normalization.hi)) {
      invalid(norm->line, fmt::format("normalization lo must be strictly below hi (got {} and {})",
                                      cfg.normalization.lo, cfg.normalization.hi));
    }
  }

  return cfg;
}

namespace {

struct Emitter {
  std::string out;
  void kv(int depth, std::string_view key, const std::string& value) {
    out.append(static_cast<std::size_t>(depth) * 2, ' ');
    out += key;
    out += ": ";
    out += value;
    out += '\n';
  }
  void section_head(int depth, std::string_view key) {
    out.append(static_cast<std::size_t>(depth) * 2, ' ');
    out += key;
    out += ":\n";
  }
};

std::string fnum(double v) { return double_to_string(v); }
std::string inum(std::int64_t v) { return fmt::format("{}", v); }
std::string bnum(bool v) { return v ? "true" : "false"; }

}  // namespace

std::string dump_effective_config(const ExperimentConfig& cfg) {
  // Sections and keys in lexicographic order; only the active family block.
  Emitter e;

  e.section_head(0, "augment");
  e.kv(1, "hflip", bnum(cfg.augment.hflip));
  e.kv(1, "noise_sigma", fnum(cfg.augment.noise_sigma));
  e.kv(1, "rot90", bnum(cfg.augment.rot90));
  e.kv(1, "vflip", bnum(cfg.augment.vflip));

  if (cfg.model_family == ModelFamily::autoencoder) {
    e.section_head(0, "autoencoder");
    e.kv(1, "beta_kl", fnum(cfg.autoencoder.beta_kl));
    e.kv(1, "variational", bnum(cfg.autoencoder.variational));
  }

  e.kv(0, "batch_size", inum(cfg.batch_size));
  e.kv(0, "channels", inum(cfg.channels));
  e.kv(0, "checkpoint_every", inum(cfg.checkpoint_every));

  if (cfg.model_family == ModelFamily::diffusion) {
    e.section_head(0, "diffusion");
    e.kv(1, "beta_end", fnum(cfg.diffusion.beta_end));
    e.kv(1, "beta_start", fnum(cfg.diffusion.beta_start));
    e.kv(1, "sampling_steps", inum(cfg.diffusion.sampling_steps));
    e.kv(1, "timesteps", inum(cfg.diffusion.timesteps));
  }

  e.kv(0, "epochs", inum(cfg.epochs));

  if (cfg.model_family == ModelFamily::gan) {
    e.section_head(0, "gan");
    e.kv(1, "label_smoothing", fnum(cfg.gan.label_smoothing));
    e.kv(1, "latent_dim", inum(cfg.gan.latent_dim));
  }

  e.kv(0, "image_size", inum(cfg.image_size));
  e.kv(0, "labeling_paradigm", std::string(paradigm_name(cfg.labeling_paradigm)));
  e.kv(0, "latent_dim", inum(cfg.latent_dim));
  e.kv(0, "model_family", std::string(family_name(cfg.model_family)));

  e.section_head(0, "normalization");
  e.kv(1, "hi", fnum(cfg.normalization.hi));
  e.kv(1, "lo", fnum(cfg.normalization.lo));

  e.kv(0, "num_classes", inum(cfg.num_classes));

  e.section_head(0, "optimizer");
  e.kv(1, "beta1", fnum(cfg.optimizer.beta1));
  e.kv(1, "beta2", fnum(cfg.optimizer.beta2));
  e.kv(1, "clip_norm", fnum(cfg.optimizer.clip_norm));
  e.kv(1, "eps", fnum(cfg.optimizer.eps));
  e.kv(1, "kind", cfg.optimizer.kind == OptimizerKind::sgd ? "sgd" : "adam");
  e.kv(1, "lr", fnum(cfg.optimizer.lr));
  e.kv(1, "momentum", fnum(cfg.optimizer.momentum));

  e.section_head(0, "scheduler");
  e.kv(1, "gamma", fnum(cfg.scheduler.gamma));
  {
    const char* kind = "constant";
    if (cfg.scheduler.kind == ScheduleKind::step) kind = "step";
    if (cfg.scheduler.kind == ScheduleKind::cosine) kind = "cosine";
    e.kv(1, "kind", kind);
  }
  e.kv(1, "lr_min", fnum(cfg.scheduler.lr_min));
  e.kv(1, "period", inum(static_cast<std::int64_t>(cfg.scheduler.period)));
  e.kv(1, "t_max", inum(static_cast<std::int64_t>(cfg.scheduler.t_max)));

  e.kv(0, "seed", inum(static_cast<std::int64_t>(cfg.seed)));
  e.kv(0, "workers", inum(cfg.workers));

  return e.out;
}

ExperimentConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open config file '{}'", path.string()));
  std::ostringstream buf;
  buf << in.rdbuf();
  return validate_config(parse_document(buf.str()));
}

}  // namespace synthforge

#include "girl/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <variant>
#include <vector>

#include "girl/errors.hpp"

namespace girl {

namespace {

struct Field {
  const char* name;
  std::variant<float PPOConfig::*, int PPOConfig::*, bool PPOConfig::*> member;
};

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      {"clip", &PPOConfig::clip},
      {"epochs", &PPOConfig::epochs},
      {"minibatch", &PPOConfig::minibatch},
      {"lr_policy", &PPOConfig::lr_policy},
      {"lr_value", &PPOConfig::lr_value},
      {"lr_disc", &PPOConfig::lr_disc},
      {"gamma", &PPOConfig::gamma},
      {"lambda", &PPOConfig::lambda},
      {"entropy_coef", &PPOConfig::entropy_coef},
      {"value_coef", &PPOConfig::value_coef},
      {"episodes_per_iter", &PPOConfig::episodes_per_iter},
      {"iterations", &PPOConfig::iterations},
      {"jobs", &PPOConfig::jobs},
      {"ior", &PPOConfig::ior},
      {"reward_neglog1md", &PPOConfig::reward_neglog1md},
  };
  return table;
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

[[noreturn]] void fail(const std::string& origin, int line,
                       const std::string& what) {
  throw ValidationError(origin + ":" + std::to_string(line) + ": " + what);
}

float parse_float(const std::string& v, const std::string& origin, int line) {
  try {
    size_t used = 0;
    float out = std::stof(v, &used);
    if (used != v.size()) fail(origin, line, "trailing junk in '" + v + "'");
    return out;
  } catch (const ValidationError&) {
    throw;
  } catch (const std::exception&) {
    fail(origin, line, "expected a number, got '" + v + "'");
  }
}

int parse_int(const std::string& v, const std::string& origin, int line) {
  try {
    size_t used = 0;
    int out = std::stoi(v, &used);
    if (used != v.size()) fail(origin, line, "trailing junk in '" + v + "'");
    return out;
  } catch (const ValidationError&) {
    throw;
  } catch (const std::exception&) {
    fail(origin, line, "expected an integer, got '" + v + "'");
  }
}

bool parse_bool(const std::string& v, const std::string& origin, int line) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  fail(origin, line, "expected true/false/1/0, got '" + v + "'");
}

}  // namespace

PPOConfig parse_ppo_config(const std::string& text, const std::string& origin,
                           const PPOConfig& base) {
  PPOConfig cfg = base;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const size_t hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    const std::string line = trim(raw);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      fail(origin, line_no, "expected key=value, got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) fail(origin, line_no, "empty key");
    if (value.empty()) fail(origin, line_no, "empty value for '" + key + "'");

    const Field* field = nullptr;
    for (const Field& f : fields())
      if (key == f.name) field = &f;
    if (!field) fail(origin, line_no, "unknown key '" + key + "'");

    if (auto* fm = std::get_if<float PPOConfig::*>(&field->member))
      cfg.*(*fm) = parse_float(value, origin, line_no);
    else if (auto* im = std::get_if<int PPOConfig::*>(&field->member))
      cfg.*(*im) = parse_int(value, origin, line_no);
    else
      cfg.*std::get<bool PPOConfig::*>(field->member) =
          parse_bool(value, origin, line_no);
  }
  return cfg;
}

PPOConfig load_ppo_config(const std::string& path, const PPOConfig& base) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_ppo_config(buf.str(), path, base);
}

std::string ppo_config_to_text(const PPOConfig& cfg) {
  std::ostringstream out;
  char num[64];
  for (const Field& f : fields()) {
    out << f.name << " = ";
    if (auto* fm = std::get_if<float PPOConfig::*>(&f.member)) {
      std::snprintf(num, sizeof num, "%.9g", static_cast<double>(cfg.*(*fm)));
      out << num;
    } else if (auto* im = std::get_if<int PPOConfig::*>(&f.member)) {
      out << cfg.*(*im);
    } else {
      out << (cfg.*std::get<bool PPOConfig::*>(f.member) ? "true" : "false");
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace girl

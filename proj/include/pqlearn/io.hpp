// Copyright 2026 The pqlearn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pqlearn/mdp.hpp"
#include "pqlearn/pq.hpp"

namespace pqlearn {

/// Malformed input document.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// MDP file contents: the model plus an optional sampling distribution.
struct MdpDocument {
  TabularMdp mdp;
  std::optional<SamplingDistribution> distribution;
};

namespace detail {

/// "line L, column C" for a byte offset into `text`.
inline std::string text_position(const std::string& text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t column = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(column);
}

inline nlohmann::json parse_json(const std::string& text, const char* what) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string(what) + ": parse error at " +
                      text_position(text, e.byte > 0 ? e.byte - 1 : 0) + ": " +
                      e.what());
  }
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline std::vector<double> flatten_matrix(const nlohmann::json& j,
                                          std::size_t rows, std::size_t cols,
                                          const std::string& field) {
  if (!j.is_array() || j.size() != rows) {
    throw FormatError(field + ": expected " + std::to_string(rows) + " rows");
  }
  std::vector<double> out;
  out.reserve(rows * cols);
  for (std::size_t i = 0; i < rows; ++i) {
    const auto& row = j[i];
    if (!row.is_array() || row.size() != cols) {
      throw FormatError(field + "[" + std::to_string(i) + "]: expected " +
                        std::to_string(cols) + " entries");
    }
    for (std::size_t k = 0; k < cols; ++k) {
      if (!row[k].is_number()) {
        throw FormatError(field + "[" + std::to_string(i) + "][" +
                          std::to_string(k) + "]: not a number");
      }
      out.push_back(row[k].get<double>());
    }
  }
  return out;
}

inline nlohmann::json nest(const std::vector<double>& flat, std::size_t rows,
                           std::size_t cols, std::size_t offset = 0) {
  nlohmann::json out = nlohmann::json::array();
  for (std::size_t i = 0; i < rows; ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t k = 0; k < cols; ++k) {
      row.push_back(flat[offset + i * cols + k]);
    }
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace detail

/// MDP document schema (JSON):
///   {
///     "num_states":   integer >= 1,
///     "num_actions":  integer >= 1,
///     "gamma":        number in (0, 1),
///     "transitions":  [a][s][s'] nested arrays, rows stochastic,
///     "rewards":      [s][a] nested arrays, entries in [-1, 1],
///     "distribution": optional [s][a] nested arrays, positive, sum 1
///   }
/// Unknown fields are rejected. The loaded model is validated.
inline MdpDocument mdp_from_json(const nlohmann::json& j) {
  static const char* const kFields[] = {"num_states", "num_actions", "gamma",
                                        "transitions", "rewards",
                                        "distribution"};
  if (!j.is_object()) throw FormatError("mdp: top level must be an object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const char* f : kFields) known = known || key == f;
    if (!known) throw FormatError("mdp: unknown field \"" + key + "\"");
  }
  for (const char* f : {"num_states", "num_actions", "gamma", "transitions",
                        "rewards"}) {
    if (!j.contains(f)) {
      throw FormatError(std::string("mdp: missing field \"") + f + "\"");
    }
  }
  if (!j["num_states"].is_number_unsigned() ||
      !j["num_actions"].is_number_unsigned() || !j["gamma"].is_number()) {
    throw FormatError("mdp: num_states/num_actions must be positive integers "
                      "and gamma a number");
  }
  const auto n = j["num_states"].get<std::size_t>();
  const auto m = j["num_actions"].get<std::size_t>();
  if (n == 0 || m == 0) throw FormatError("mdp: sizes must be positive");
  MdpDocument doc;
  doc.mdp = TabularMdp(n, m, j["gamma"].get<double>());
  const auto& trans = j["transitions"];
  if (!trans.is_array() || trans.size() != m) {
    throw FormatError("transitions: expected " + std::to_string(m) +
                      " action slices");
  }
  for (std::size_t a = 0; a < m; ++a) {
    const auto slice = detail::flatten_matrix(
        trans[a], n, n, "transitions[" + std::to_string(a) + "]");
    std::copy(slice.begin(), slice.end(),
              doc.mdp.transitions.begin() + static_cast<long>(a * n * n));
  }
  doc.mdp.rewards = detail::flatten_matrix(j["rewards"], n, m, "rewards");
  if (auto v = validate_mdp(doc.mdp)) throw FormatError("mdp: " + v->message);
  if (j.contains("distribution")) {
    try {
      doc.distribution = make_distribution(
          n, m, detail::flatten_matrix(j["distribution"], n, m, "distribution"));
    } catch (const std::invalid_argument& e) {
      throw FormatError(e.what());
    }
  }
  return doc;
}

inline nlohmann::json mdp_to_json(
    const TabularMdp& mdp,
    const std::optional<SamplingDistribution>& d = std::nullopt) {
  nlohmann::json j;
  j["num_states"] = mdp.num_states;
  j["num_actions"] = mdp.num_actions;
  j["gamma"] = mdp.gamma;
  nlohmann::json trans = nlohmann::json::array();
  for (std::size_t a = 0; a < mdp.num_actions; ++a) {
    trans.push_back(detail::nest(mdp.transitions, mdp.num_states,
                                 mdp.num_states,
                                 a * mdp.num_states * mdp.num_states));
  }
  j["transitions"] = std::move(trans);
  j["rewards"] = detail::nest(mdp.rewards, mdp.num_states, mdp.num_actions);
  if (d) {
    j["distribution"] =
        detail::nest(d->probs(), mdp.num_states, mdp.num_actions);
  }
  return j;
}

inline MdpDocument parse_mdp(const std::string& text) {
  return mdp_from_json(detail::parse_json(text, "mdp"));
}

inline MdpDocument load_mdp(const std::string& path) {
  return parse_mdp(detail::read_file(path));
}

inline void save_mdp(const std::string& path, const TabularMdp& mdp,
                     const std::optional<SamplingDistribution>& d =
                         std::nullopt) {
  detail::write_file(path, mdp_to_json(mdp, d).dump(1) + "\n");
}

// ---------------------------------------------------------------------------
// Trace CSV
// ---------------------------------------------------------------------------

inline constexpr const char* kTraceHeader =
    "samples_used,outer_k,inner_t,q_inf_error,q_l2_sq_error,d_norm_sq_error,"
    "loss,v_gap";

/// Shortest text that parses back to the same double; empty for NaN.
inline std::string format_real(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string trace_to_csv(const RunTrace& trace) {
  std::string out = kTraceHeader;
  out += '\n';
  for (const auto& r : trace.records) {
    out += std::to_string(r.samples_used);
    out += ',';
    out += std::to_string(r.outer_k);
    out += ',';
    out += std::to_string(r.inner_t);
    for (double v : {r.q_inf_error, r.q_l2_sq_error, r.d_norm_sq_error, r.loss,
                     r.v_gap}) {
      out += ',';
      out += format_real(v);
    }
    out += '\n';
  }
  return out;
}

inline std::vector<TraceRecord> trace_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kTraceHeader) {
    throw FormatError("trace: unexpected header");
  }
  auto real = [](const std::string& field) {
    return field.empty() ? kNotComputed : std::stod(field);
  };
  std::vector<TraceRecord> records;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (;;) {
      const std::size_t comma = line.find(',', start);
      fields.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (fields.size() != 8) throw FormatError("trace: expected 8 columns");
    TraceRecord r;
    r.samples_used = std::stoull(fields[0]);
    r.outer_k = std::stoull(fields[1]);
    r.inner_t = std::stoull(fields[2]);
    r.q_inf_error = real(fields[3]);
    r.q_l2_sq_error = real(fields[4]);
    r.d_norm_sq_error = real(fields[5]);
    r.loss = real(fields[6]);
    r.v_gap = real(fields[7]);
    records.push_back(r);
  }
  return records;
}

}  // namespace pqlearn

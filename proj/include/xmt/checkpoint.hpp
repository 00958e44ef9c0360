// Copyright 2026 The xmt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>

#include "xmt/error.hpp"
#include "xmt/model.hpp"

namespace xmt {

// Checkpoint layout (little-endian):
//   magic "XMTCKPT1"
//   u32 config entry count, then (u32 len, bytes) key/value string pairs
//   u32 parameter count, then per tensor: name, u64 rows, u64 cols,
//   rows*cols f64 values in column-major order.

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  out.append(b, 4);
}
inline void put_u64(std::string& out, std::uint64_t v) {
  char b[8];
  std::memcpy(b, &v, 8);
  out.append(b, 8);
}
inline void put_str(std::string& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out += s;
}

class Reader {
 public:
  explicit Reader(std::string data) : data_(std::move(data)) {}
  std::uint32_t u32() {
    std::uint32_t v;
    take(&v, 4);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    take(&v, 8);
    return v;
  }
  std::string str() {
    const std::uint32_t n = u32();
    check(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void doubles(double* out, std::size_t n) { take(out, n * sizeof(double)); }

 private:
  void check(std::size_t n) const {
    if (pos_ + n > data_.size())
      throw Error::config("truncated checkpoint file");
  }
  void take(void* out, std::size_t n) {
    check(n);
    std::memcpy(out, data_.data() + pos_, n);
    pos_ += n;
  }
  std::string data_;
  std::size_t pos_ = 0;
};

inline std::map<std::string, std::string> config_entries(
    const ModelConfig& c) {
  char dropout[32];
  std::snprintf(dropout, sizeof(dropout), "%.17g", c.dropout);
  return {
      {"enc_layers", std::to_string(c.enc_layers)},
      {"dec_layers", std::to_string(c.dec_layers)},
      {"d_model", std::to_string(c.d_model)},
      {"heads", std::to_string(c.heads)},
      {"ffn_dim", std::to_string(c.ffn_dim)},
      {"dropout", dropout},
      {"final_layernorm", c.final_layernorm ? "1" : "0"},
      {"vocab_size", std::to_string(c.vocab_size)},
      {"max_positions", std::to_string(c.max_positions)},
  };
}

}  // namespace detail

template <class Scalar>
void save_checkpoint(const Seq2SeqModel<Scalar>& model,
                     const std::filesystem::path& path) {
  std::string out;
  out += "XMTCKPT1";
  const auto entries = detail::config_entries(model.config);
  detail::put_u32(out, static_cast<std::uint32_t>(entries.size()));
  for (const auto& [k, v] : entries) {
    detail::put_str(out, k);
    detail::put_str(out, v);
  }
  std::uint32_t n_params = 0;
  model.params.visit(
      [&](const std::string&, const MatX<Scalar>&) { ++n_params; });
  detail::put_u32(out, n_params);
  model.params.visit([&](const std::string& name, const MatX<Scalar>& t) {
    detail::put_str(out, name);
    detail::put_u64(out, static_cast<std::uint64_t>(t.rows()));
    detail::put_u64(out, static_cast<std::uint64_t>(t.cols()));
    const MatX<double> d = t.template cast<double>();
    out.append(reinterpret_cast<const char*>(d.data()),
               static_cast<std::size_t>(d.size()) * sizeof(double));
  });

  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error::other("cannot write checkpoint: " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

template <class Scalar = double>
Seq2SeqModel<Scalar> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error::missing_input("cannot open checkpoint: " + path.string());
  std::string data((std::istreambuf_iterator<char>(f)),
                   std::istreambuf_iterator<char>());
  if (data.size() < 8 || data.substr(0, 8) != "XMTCKPT1")
    throw Error::config("not a checkpoint file: " + path.string());
  detail::Reader r(data.substr(8));

  std::map<std::string, std::string> entries;
  const std::uint32_t n_entries = r.u32();
  for (std::uint32_t i = 0; i < n_entries; ++i) {
    std::string k = r.str();
    entries[k] = r.str();
  }
  auto want = [&](const std::string& k) {
    auto it = entries.find(k);
    if (it == entries.end())
      throw Error::config("checkpoint missing config key: " + k);
    return it->second;
  };
  ModelConfig cfg;
  cfg.enc_layers = std::stoi(want("enc_layers"));
  cfg.dec_layers = std::stoi(want("dec_layers"));
  cfg.d_model = std::stoi(want("d_model"));
  cfg.heads = std::stoi(want("heads"));
  cfg.ffn_dim = std::stoi(want("ffn_dim"));
  cfg.dropout = std::stod(want("dropout"));
  cfg.final_layernorm = want("final_layernorm") == "1";
  cfg.vocab_size = std::stoi(want("vocab_size"));
  cfg.max_positions = std::stoi(want("max_positions"));
  cfg.validate();

  Seq2SeqModel<Scalar> model{cfg, make_param_set<Scalar>(cfg)};
  std::map<std::string, MatX<Scalar>*> by_name;
  model.params.visit([&](const std::string& name, MatX<Scalar>& t) {
    by_name[name] = &t;
  });

  const std::uint32_t n_params = r.u32();
  if (n_params != by_name.size())
    throw Error::shape("checkpoint parameter count mismatch: file has " +
                       std::to_string(n_params) + ", config needs " +
                       std::to_string(by_name.size()));
  for (std::uint32_t i = 0; i < n_params; ++i) {
    const std::string name = r.str();
    const auto rows = static_cast<Eigen::Index>(r.u64());
    const auto cols = static_cast<Eigen::Index>(r.u64());
    auto it = by_name.find(name);
    if (it == by_name.end())
      throw Error::shape("checkpoint has unknown tensor: " + name);
    if (it->second->rows() != rows || it->second->cols() != cols)
      throw Error::shape("shape mismatch for " + name + ": file " +
                         std::to_string(rows) + "x" + std::to_string(cols) +
                         ", config " + std::to_string(it->second->rows()) +
                         "x" + std::to_string(it->second->cols()));
    MatX<double> tmp(rows, cols);
    r.doubles(tmp.data(), static_cast<std::size_t>(tmp.size()));
    *it->second = tmp.cast<Scalar>();
  }
  return model;
}

}  // namespace xmt

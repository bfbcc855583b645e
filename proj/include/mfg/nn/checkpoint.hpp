#pragma once

// Checkpoint file layout:
//
//   "MFGCKPT1"                 8 bytes magic
//   header length              uint64, little-endian
//   header                     JSON (architecture, seed, iteration, optimizer settings,
//                              array table with offsets into the payload)
//   payload                    float64 little-endian values

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mfg/common.hpp"
#include "mfg/nn/adam.hpp"
#include "mfg/nn/mlp.hpp"

namespace mfg::nn {

struct CheckpointNet {
  std::string name;
  Mlp net;
  std::optional<AdamState> adam;
};

struct Checkpoint {
  std::uint64_t seed = 0;
  long long iteration = 0;
  std::vector<CheckpointNet> nets;
  std::map<std::string, double> scalars;
  nlohmann::json metadata = nlohmann::json::object();

  const CheckpointNet& net(const std::string& name) const {
    for (const auto& n : nets)
      if (n.name == name) return n;
    throw std::out_of_range("checkpoint has no net '" + name + "'");
  }
};

namespace detail {

inline constexpr char checkpoint_magic[9] = "MFGCKPT1";

inline void put_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 8);
}

inline std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

inline nlohmann::json arch_to_json(const Architecture& a) {
  return {{"input_dim", a.input_dim},
          {"time_inputs", a.time_inputs},
          {"hidden", a.hidden},
          {"output", to_string(a.output)}};
}

inline Architecture arch_from_json(const nlohmann::json& j) {
  Architecture a;
  a.input_dim = j.at("input_dim").get<int>();
  a.time_inputs = j.at("time_inputs").get<int>();
  a.hidden = j.at("hidden").get<std::vector<int>>();
  a.output = output_from_string(j.at("output").get<std::string>());
  return a;
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::vector<double> payload;
  nlohmann::json arrays = nlohmann::json::array();
  auto append = [&](const std::string& name, const VectorXd& v) {
    arrays.push_back({{"name", name}, {"offset", payload.size()}, {"count", v.size()}});
    payload.insert(payload.end(), v.data(), v.data() + v.size());
  };

  nlohmann::json nets = nlohmann::json::array();
  for (const auto& n : ckpt.nets) {
    nlohmann::json jn = {{"name", n.name}, {"architecture", detail::arch_to_json(n.net.arch())}};
    append(n.name + ".params", n.net.params());
    if (n.adam) {
      const AdamState& s = *n.adam;
      jn["adam"] = {{"step", s.step},
                    {"beta1", s.beta1},
                    {"beta2", s.beta2},
                    {"epsilon", s.epsilon},
                    {"lr_initial", s.schedule.initial},
                    {"lr_final", s.schedule.final_rate},
                    {"lr_iterations", s.schedule.iterations}};
      append(n.name + ".adam.m", s.m);
      append(n.name + ".adam.v", s.v);
    }
    nets.push_back(std::move(jn));
  }

  nlohmann::json header = {{"format", "mfg-checkpoint"},
                           {"version", 1},
                           {"seed", ckpt.seed},
                           {"iteration", ckpt.iteration},
                           {"nets", nets},
                           {"scalars", ckpt.scalars},
                           {"arrays", arrays},
                           {"metadata", ckpt.metadata}};
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint '" + path + "'");
  out.write(detail::checkpoint_magic, 8);
  detail::put_u64(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (double d : payload) detail::put_u64(out, std::bit_cast<std::uint64_t>(d));
  if (!out) throw std::runtime_error("error writing checkpoint '" + path + "'");
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint '" + path + "'");
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, detail::checkpoint_magic, 8) != 0)
    throw std::runtime_error("'" + path + "' is not a checkpoint file");
  const std::uint64_t len = detail::get_u64(in);
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw std::runtime_error("checkpoint: truncated header");
  const auto header = nlohmann::json::parse(text);

  std::map<std::string, std::pair<std::size_t, std::size_t>> table;
  std::size_t total = 0;
  for (const auto& a : header.at("arrays")) {
    const auto off = a.at("offset").get<std::size_t>();
    const auto cnt = a.at("count").get<std::size_t>();
    table[a.at("name").get<std::string>()] = {off, cnt};
    total = std::max(total, off + cnt);
  }
  std::vector<double> payload(total);
  for (auto& d : payload) d = std::bit_cast<double>(detail::get_u64(in));

  auto array = [&](const std::string& name) {
    const auto it = table.find(name);
    if (it == table.end()) throw std::runtime_error("checkpoint: missing array '" + name + "'");
    const auto [off, cnt] = it->second;
    return VectorXd(Eigen::Map<const VectorXd>(payload.data() + off, static_cast<Index>(cnt)));
  };

  Checkpoint ckpt;
  ckpt.seed = header.at("seed").get<std::uint64_t>();
  ckpt.iteration = header.at("iteration").get<long long>();
  ckpt.scalars = header.at("scalars").get<std::map<std::string, double>>();
  ckpt.metadata = header.value("metadata", nlohmann::json::object());
  for (const auto& jn : header.at("nets")) {
    CheckpointNet n;
    n.name = jn.at("name").get<std::string>();
    n.net = Mlp(detail::arch_from_json(jn.at("architecture")));
    VectorXd p = array(n.name + ".params");
    if (p.size() != n.net.num_params())
      throw std::runtime_error("checkpoint: parameter count mismatch for '" + n.name + "'");
    n.net.params() = p;
    if (jn.contains("adam")) {
      const auto& ja = jn.at("adam");
      AdamState s;
      s.step = ja.at("step").get<long long>();
      s.beta1 = ja.at("beta1").get<double>();
      s.beta2 = ja.at("beta2").get<double>();
      s.epsilon = ja.at("epsilon").get<double>();
      s.schedule = {ja.at("lr_initial").get<double>(), ja.at("lr_final").get<double>(),
                    ja.at("lr_iterations").get<long long>()};
      s.m = array(n.name + ".adam.m");
      s.v = array(n.name + ".adam.v");
      n.adam = std::move(s);
    }
    ckpt.nets.push_back(std::move(n));
  }
  return ckpt;
}

}  // namespace mfg::nn

#include "ucha/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace ucha::ckpt {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[8] = {'U', 'C', 'H', 'A', 'C', 'K', 'P', 'T'};

class Writer {
 public:
  explicit Writer(std::ofstream& out) : out_(out) {}
  template <typename T>
  void pod(T v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void str(const std::string& s) {
    pod<std::uint64_t>(s.size());
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void doubles(const double* p, std::size_t n) {
    out_.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
  }

 private:
  std::ofstream& out_;
};

class Reader {
 public:
  explicit Reader(std::ifstream& in) : in_(in) {}
  template <typename T>
  T pod() {
    T v{};
    read(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
  }
  std::string str() {
    const auto n = pod<std::uint64_t>();
    if (n > (std::uint64_t{1} << 32)) throw std::runtime_error("checkpoint: implausible string length");
    std::string s(n, '\0');
    read(s.data(), n);
    return s;
  }
  void doubles(double* p, std::size_t n) { read(reinterpret_cast<char*>(p), n * sizeof(double)); }

 private:
  void read(char* p, std::size_t n) {
    in_.read(p, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) throw std::runtime_error("checkpoint: truncated file");
  }
  std::ifstream& in_;
};

void write_mlp(Writer& w, const std::string& name, const nn::Mlp& net) {
  w.str(name);
  const auto& layers = net.layers();
  w.pod<std::uint32_t>(static_cast<std::uint32_t>(layers.size()));
  for (const auto& l : layers) {
    w.pod<std::uint64_t>(static_cast<std::uint64_t>(l.weight.rows()));
    w.pod<std::uint64_t>(static_cast<std::uint64_t>(l.weight.cols()));
    w.pod<std::uint8_t>(static_cast<std::uint8_t>(l.activation));
    w.doubles(l.weight.data(), static_cast<std::size_t>(l.weight.size()));
    w.doubles(l.bias.data(), static_cast<std::size_t>(l.bias.size()));
  }
}

nn::Mlp read_mlp(Reader& r, const std::string& expected) {
  const auto name = r.str();
  if (name != expected) throw std::runtime_error("checkpoint: expected network '" + expected + "', found '" + name + "'");
  const auto count = r.pod<std::uint32_t>();
  if (count == 0 || count > 64) throw std::runtime_error("checkpoint: bad layer count for " + name);
  std::vector<std::size_t> dims;
  std::vector<nn::Layer> layers(count);
  for (auto& l : layers) {
    const auto rows = r.pod<std::uint64_t>();
    const auto cols = r.pod<std::uint64_t>();
    if (rows == 0 || cols == 0 || rows * cols > (std::uint64_t{1} << 31)) {
      throw std::runtime_error("checkpoint: bad layer shape for " + name);
    }
    const auto act = r.pod<std::uint8_t>();
    if (act > 1) throw std::runtime_error("checkpoint: unknown activation in " + name);
    l.activation = static_cast<nn::Activation>(act);
    l.weight.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    l.bias.resize(static_cast<Eigen::Index>(rows));
    r.doubles(l.weight.data(), static_cast<std::size_t>(l.weight.size()));
    r.doubles(l.bias.data(), static_cast<std::size_t>(l.bias.size()));
    if (dims.empty()) dims.push_back(cols);
    if (dims.back() != cols) throw std::runtime_error("checkpoint: inconsistent layer shapes in " + name);
    dims.push_back(rows);
  }
  nn::Mlp net(dims);
  net.layers() = std::move(layers);
  return net;
}

}  // namespace

void save(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("checkpoint: cannot open " + tmp.string());
    Writer w(out);
    out.write(kMagic, sizeof kMagic);
    w.pod<std::uint32_t>(kFormatVersion);
    w.str(ckpt.config_json);
    w.str(train::to_string(ckpt.algo));
    w.pod<std::uint64_t>(ckpt.seed);
    w.pod<std::int64_t>(ckpt.step);
    w.pod<std::int32_t>(ckpt.num_channels);
    w.pod<std::uint32_t>(static_cast<std::uint32_t>(ckpt.profiles.size()));
    for (const auto& p : ckpt.profiles) {
      w.pod<double>(p.cpu_hz);
      w.pod<double>(p.mu);
      w.pod<std::int32_t>(p.tau_f);
      w.pod<double>(p.distance_m);
    }
    const auto& nets = ckpt.nets;
    w.pod<std::int64_t>(nets.policy_version);
    write_mlp(w, "actor1", nets.actor1.net);
    write_mlp(w, "actor2", nets.actor2.net);
    w.str("actor2.log_std");
    w.pod<std::uint64_t>(static_cast<std::uint64_t>(nets.actor2.log_std.size()));
    w.doubles(nets.actor2.log_std.data(), static_cast<std::size_t>(nets.actor2.log_std.size()));
    write_mlp(w, "critic1", nets.critic1.net);
    write_mlp(w, "critic1.target", nets.critic1.target);
    w.pod<std::uint8_t>(nets.critic2 ? 1 : 0);
    if (nets.critic2) {
      write_mlp(w, "critic2", nets.critic2->net);
      write_mlp(w, "critic2.target", nets.critic2->target);
    }
    if (!out) throw std::runtime_error("checkpoint: write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path.string());
  Reader r(in);
  char magic[8];
  in.read(magic, sizeof magic);
  if (in.gcount() != sizeof magic || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw std::runtime_error("checkpoint: " + path.string() + " is not a checkpoint file");
  }
  const auto version = r.pod<std::uint32_t>();
  if (version != kFormatVersion) {
    throw std::runtime_error("checkpoint: unsupported format version " + std::to_string(version));
  }
  Checkpoint c;
  c.config_json = r.str();
  c.algo = train::parse_algorithm(r.str());
  c.seed = r.pod<std::uint64_t>();
  c.step = r.pod<std::int64_t>();
  c.num_channels = r.pod<std::int32_t>();
  const auto n = r.pod<std::uint32_t>();
  if (n == 0 || n > 64) throw std::runtime_error("checkpoint: bad VU count");
  c.profiles.resize(n);
  for (auto& p : c.profiles) {
    p.cpu_hz = r.pod<double>();
    p.mu = r.pod<double>();
    p.tau_f = r.pod<std::int32_t>();
    p.distance_m = r.pod<double>();
  }
  auto& nets = c.nets;
  nets.kind = c.algo;
  nets.num_vus = n;
  nets.num_channels = c.num_channels;
  nets.policy_version = r.pod<std::int64_t>();
  nets.actor1.net = read_mlp(r, "actor1");
  nets.actor2.net = read_mlp(r, "actor2");
  if (r.str() != "actor2.log_std") throw std::runtime_error("checkpoint: missing actor2.log_std");
  const auto k = r.pod<std::uint64_t>();
  if (k != nets.actor2.net.output_dim()) throw std::runtime_error("checkpoint: log_std size mismatch");
  nets.actor2.log_std.resize(static_cast<Eigen::Index>(k));
  r.doubles(nets.actor2.log_std.data(), k);
  nets.critic1.net = read_mlp(r, "critic1");
  nets.critic1.target = read_mlp(r, "critic1.target");
  if (r.pod<std::uint8_t>() != 0) {
    ppo::CriticHeads c2;
    c2.net = read_mlp(r, "critic2");
    c2.target = read_mlp(r, "critic2.target");
    nets.critic2 = std::move(c2);
  }
  const auto expected = static_cast<std::size_t>(env::action_space_size(static_cast<int>(n), c.num_channels));
  if (nets.actor1.net.output_dim() != expected || nets.actor2.net.output_dim() != n) {
    throw std::runtime_error("checkpoint: network shapes do not match the stored scenario");
  }
  return c;
}

}  // namespace ucha::ckpt

#include "wattgov/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "wattgov/errors.hpp"

namespace wattgov::checkpoint {

namespace {

constexpr const char* kMagic = "wattgov-checkpoint";
constexpr int kVersion = 1;

void put(std::ostream& out, double x) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%a", x);
  out << buf;
}

void write_matrix(std::ostream& out, const char* tag,
                  const Eigen::MatrixXd& m) {
  out << tag << " " << m.rows() << " " << m.cols();
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      out << " ";
      put(out, m(i, j));
    }
  }
  out << "\n";
}

void write_vector(std::ostream& out, const char* tag,
                  const Eigen::VectorXd& v) {
  write_matrix(out, tag, Eigen::MatrixXd(v));
}

void write_mlp(std::ostream& out, const char* name, const nn::Mlp& net) {
  out << "mlp " << name << " " << net.layer_count() << "\n";
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    write_matrix(out, "w", net.weights()[l]);
    write_vector(out, "b", net.biases()[l]);
  }
}

void write_grads(std::ostream& out, const char* name, const nn::Grads& g) {
  out << "grads " << name << " " << g.w.size() << "\n";
  for (std::size_t l = 0; l < g.w.size(); ++l) {
    write_matrix(out, "w", g.w[l]);
    write_vector(out, "b", g.b[l]);
  }
}

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  std::string word() {
    std::string w;
    if (!(in_ >> w)) raise(Errc::MalformedRow, "checkpoint truncated");
    return w;
  }

  void expect(const std::string& want) {
    const std::string got = word();
    if (got != want) {
      raise(Errc::MalformedRow,
            "checkpoint: expected '" + want + "', got '" + got + "'");
    }
  }

  long long integer() {
    const std::string w = word();
    try {
      std::size_t used = 0;
      const long long x = std::stoll(w, &used);
      if (used != w.size()) throw std::invalid_argument(w);
      return x;
    } catch (const std::exception&) {
      raise(Errc::MalformedRow, "checkpoint: bad integer '" + w + "'");
    }
  }

  double number() {
    const std::string w = word();
    try {
      std::size_t used = 0;
      const double x = std::stod(w, &used);
      if (used != w.size()) throw std::invalid_argument(w);
      return x;
    } catch (const std::exception&) {
      raise(Errc::MalformedRow, "checkpoint: bad number '" + w + "'");
    }
  }

  Eigen::MatrixXd matrix(const std::string& tag) {
    expect(tag);
    const auto rows = integer();
    const auto cols = integer();
    if (rows < 0 || cols < 0 || rows * cols > (1ll << 24)) {
      raise(Errc::MalformedRow, "checkpoint: implausible matrix shape");
    }
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = number();
    }
    return m;
  }

  Eigen::VectorXd vector(const std::string& tag) {
    const Eigen::MatrixXd m = matrix(tag);
    if (m.cols() != 1) {
      raise(Errc::MalformedRow, "checkpoint: expected a column vector");
    }
    return Eigen::VectorXd(m);
  }

  nn::Mlp mlp(const std::string& name) {
    expect("mlp");
    expect(name);
    const auto layers = integer();
    if (layers < 1 || layers > 64) {
      raise(Errc::MalformedRow, "checkpoint: implausible layer count");
    }
    std::vector<Eigen::MatrixXd> w;
    std::vector<Eigen::VectorXd> b;
    for (long long l = 0; l < layers; ++l) {
      w.push_back(matrix("w"));
      b.push_back(vector("b"));
    }
    const int in_dim = static_cast<int>(w.front().cols());
    const int out_dim = static_cast<int>(w.back().rows());
    std::vector<int> hidden;
    for (std::size_t l = 0; l + 1 < w.size(); ++l) {
      hidden.push_back(static_cast<int>(w[l].rows()));
    }
    nn::Mlp net(in_dim, hidden, out_dim);
    net.set_params(std::move(w), std::move(b));
    return net;
  }

  nn::Grads grads(const std::string& name) {
    expect("grads");
    expect(name);
    const auto layers = integer();
    if (layers < 1 || layers > 64) {
      raise(Errc::MalformedRow, "checkpoint: implausible layer count");
    }
    nn::Grads g;
    for (long long l = 0; l < layers; ++l) {
      g.w.push_back(matrix("w"));
      g.b.push_back(vector("b"));
    }
    return g;
  }

 private:
  std::istream& in_;
};

}  // namespace

void save(const Checkpoint& ckpt, std::ostream& out) {
  out << kMagic << " " << kVersion << "\n";
  char hash[32];
  std::snprintf(hash, sizeof(hash), "%016llx",
                static_cast<unsigned long long>(ckpt.env_hash));
  out << "env_hash " << hash << "\n";
  write_mlp(out, "actor", ckpt.agent.actor);
  write_vector(out, "log_std", ckpt.agent.log_std);
  write_mlp(out, "critic", ckpt.agent.critic);
  out << "adam actor_opt " << ckpt.actor_opt.step << "\n";
  write_grads(out, "m", ckpt.actor_opt.m);
  write_grads(out, "v", ckpt.actor_opt.v);
  out << "adam log_std_opt " << ckpt.log_std_opt.step << "\n";
  write_vector(out, "m", ckpt.log_std_opt.m);
  write_vector(out, "v", ckpt.log_std_opt.v);
  out << "adam critic_opt " << ckpt.critic_opt.step << "\n";
  write_grads(out, "m", ckpt.critic_opt.m);
  write_grads(out, "v", ckpt.critic_opt.v);
  if (!out) raise(Errc::SinkError, "failed writing checkpoint");
}

void save_file(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream out(path);
  if (!out) raise(Errc::SinkError, "cannot open '" + path + "' for writing");
  save(ckpt, out);
}

Checkpoint load(std::istream& in) {
  Reader r(in);
  r.expect(kMagic);
  if (r.integer() != kVersion) {
    raise(Errc::MalformedRow, "checkpoint: unsupported version");
  }
  Checkpoint ckpt;
  r.expect("env_hash");
  {
    const std::string hex = r.word();
    std::uint64_t h = 0;
    if (hex.size() != 16) {
      raise(Errc::MalformedRow, "checkpoint: bad env_hash");
    }
    for (const char c : hex) {
      int digit;
      if (c >= '0' && c <= '9') digit = c - '0';
      else if (c >= 'a' && c <= 'f') digit = c - 'a' + 10;
      else raise(Errc::MalformedRow, "checkpoint: bad env_hash");
      h = (h << 4) | static_cast<std::uint64_t>(digit);
    }
    ckpt.env_hash = h;
  }
  ckpt.agent.actor = r.mlp("actor");
  ckpt.agent.log_std = r.vector("log_std");
  ckpt.agent.critic = r.mlp("critic");
  r.expect("adam");
  r.expect("actor_opt");
  ckpt.actor_opt.step = r.integer();
  ckpt.actor_opt.m = r.grads("m");
  ckpt.actor_opt.v = r.grads("v");
  r.expect("adam");
  r.expect("log_std_opt");
  ckpt.log_std_opt.step = r.integer();
  ckpt.log_std_opt.m = r.vector("m");
  ckpt.log_std_opt.v = r.vector("v");
  r.expect("adam");
  r.expect("critic_opt");
  ckpt.critic_opt.step = r.integer();
  ckpt.critic_opt.m = r.grads("m");
  ckpt.critic_opt.v = r.grads("v");
  return ckpt;
}

Checkpoint load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(Errc::NoSuchFile, "cannot open checkpoint '" + path + "'");
  return load(in);
}

}  // namespace wattgov::checkpoint

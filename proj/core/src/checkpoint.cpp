#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "ucvme/errors.hpp"
#include "ucvme/mlp.hpp"

namespace ucvme {

namespace {

constexpr const char* kMagic = "ucvme-mlp-checkpoint";
constexpr int kVersion = 1;

std::string hex(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

double parse_hex(const std::string& token) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(token.c_str(), &end);
  if (end == token.c_str() || *end != '\0' || errno == ERANGE) {
    throw FormatError("checkpoint: bad real '" + token + "'");
  }
  return v;
}

void expect(std::istream& in, const std::string& keyword) {
  std::string word;
  if (!(in >> word) || word != keyword) {
    throw FormatError("checkpoint: expected '" + keyword + "', found '" + word + "'");
  }
}

template <typename T>
T read_value(std::istream& in, const char* what) {
  T v{};
  if (!(in >> v)) throw FormatError(std::string("checkpoint: could not read ") + what);
  return v;
}

}  // namespace

void save_checkpoint(const MlpModel& model, std::ostream& out) {
  const auto& cfg = model.config();
  out << kMagic << ' ' << kVersion << '\n';
  out << "input_dim " << cfg.input_dim << '\n';
  out << "hidden_dims " << cfg.hidden_dims.size();
  for (auto d : cfg.hidden_dims) out << ' ' << d;
  out << '\n';
  out << "activation " << to_string(cfg.activation) << '\n';
  out << "dropout_p " << hex(cfg.dropout_p) << '\n';
  out << "z_range " << hex(cfg.z_min) << ' ' << hex(cfg.z_max) << '\n';
  const auto& tensors = model.parameters().tensors;
  out << "tensors " << tensors.size() << '\n';
  for (std::size_t t = 0; t < tensors.size(); ++t) {
    const Matrix& m = tensors[t];
    out << "tensor " << t << ' ' << m.rows() << ' ' << m.cols() << '\n';
    for (std::size_t r = 0; r < m.rows(); ++r) {
      for (std::size_t c = 0; c < m.cols(); ++c) out << (c ? " " : "") << hex(m(r, c));
      out << '\n';
    }
  }
  out << "end\n";
}

MlpModel load_checkpoint(std::istream& in) {
  expect(in, kMagic);
  const int version = read_value<int>(in, "version");
  if (version != kVersion) {
    throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  }
  MlpConfig cfg;
  expect(in, "input_dim");
  cfg.input_dim = read_value<std::size_t>(in, "input_dim");
  expect(in, "hidden_dims");
  const auto n_hidden = read_value<std::size_t>(in, "hidden layer count");
  for (std::size_t i = 0; i < n_hidden; ++i) cfg.hidden_dims.push_back(read_value<std::size_t>(in, "hidden dim"));
  expect(in, "activation");
  cfg.activation = activation_from_string(read_value<std::string>(in, "activation"));
  expect(in, "dropout_p");
  cfg.dropout_p = parse_hex(read_value<std::string>(in, "dropout_p"));
  expect(in, "z_range");
  cfg.z_min = parse_hex(read_value<std::string>(in, "z_min"));
  cfg.z_max = parse_hex(read_value<std::string>(in, "z_max"));

  MlpModel model(cfg);
  auto& tensors = model.parameters().tensors;
  expect(in, "tensors");
  if (read_value<std::size_t>(in, "tensor count") != tensors.size()) {
    throw FormatError("checkpoint: tensor count does not match architecture");
  }
  for (std::size_t t = 0; t < tensors.size(); ++t) {
    expect(in, "tensor");
    const auto index = read_value<std::size_t>(in, "tensor index");
    const auto rows = read_value<std::size_t>(in, "rows");
    const auto cols = read_value<std::size_t>(in, "cols");
    if (index != t || rows != tensors[t].rows() || cols != tensors[t].cols()) {
      throw FormatError("checkpoint: tensor " + std::to_string(t) + " has unexpected header");
    }
    for (double& v : tensors[t].data()) v = parse_hex(read_value<std::string>(in, "tensor value"));
  }
  expect(in, "end");
  return model;
}

void save_checkpoint(const MlpModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("checkpoint: cannot open '" + path + "' for writing");
  save_checkpoint(model, out);
}

MlpModel load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("checkpoint: cannot open '" + path + "'");
  return load_checkpoint(in);
}

}  // namespace ucvme

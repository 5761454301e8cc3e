#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "uavsec/nn.hpp"

namespace uavsec::nn {

namespace {

constexpr const char* kMagic = "uavsec-network";
constexpr int kFormatVersion = 1;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void expect(std::istream& in, const std::string& word, const std::string& path) {
  std::string got;
  if (!(in >> got) || got != word)
    throw std::runtime_error(path + ": expected '" + word + "', found '" + got + "'");
}

template <typename T>
T read_value(std::istream& in, const std::string& path, const char* what) {
  T v{};
  if (!(in >> v)) throw std::runtime_error(path + ": could not read " + what);
  return v;
}

}  // namespace

void save_network(const Network& net, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  const NetworkSpec& s = net.spec();
  out << kMagic << ' ' << kFormatVersion << '\n';
  out << "blocks " << s.block_lengths.size();
  for (int b : s.block_lengths) out << ' ' << b;
  out << '\n';
  out << "tail " << s.tail_dim << '\n';
  out << "expansion " << s.expansion_width << '\n';
  out << "hidden " << s.hidden.size();
  for (int h : s.hidden) out << ' ' << h;
  out << '\n';
  out << "output " << s.output_dim << ' ' << to_string(s.output) << '\n';
  const auto params = net.parameters();
  out << "tensors " << params.size() << '\n';
  for (const Matrix* p : params) {
    out << p->rows() << ' ' << p->cols() << '\n';
    for (Eigen::Index r = 0; r < p->rows(); ++r) {
      for (Eigen::Index c = 0; c < p->cols(); ++c) out << (c ? " " : "") << fmt((*p)(r, c));
      out << '\n';
    }
  }
  if (!out) throw std::runtime_error("error writing " + path);
}

Network load_network(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  expect(in, kMagic, path);
  const int version = read_value<int>(in, path, "format version");
  if (version != kFormatVersion)
    throw std::runtime_error(path + ": unsupported format version " + std::to_string(version));

  NetworkSpec s;
  expect(in, "blocks", path);
  const auto nb = read_value<std::size_t>(in, path, "block count");
  for (std::size_t i = 0; i < nb; ++i) s.block_lengths.push_back(read_value<int>(in, path, "block length"));
  expect(in, "tail", path);
  s.tail_dim = read_value<int>(in, path, "tail dim");
  expect(in, "expansion", path);
  s.expansion_width = read_value<int>(in, path, "expansion width");
  expect(in, "hidden", path);
  const auto nh = read_value<std::size_t>(in, path, "hidden count");
  for (std::size_t i = 0; i < nh; ++i) s.hidden.push_back(read_value<int>(in, path, "hidden width"));
  expect(in, "output", path);
  s.output_dim = read_value<int>(in, path, "output dim");
  s.output = parse_activation(read_value<std::string>(in, path, "output activation"));

  std::mt19937_64 rng(0);
  Network net(s, rng);
  expect(in, "tensors", path);
  const auto nt = read_value<std::size_t>(in, path, "tensor count");
  auto params = net.mutable_parameters();
  if (nt != params.size())
    throw std::runtime_error(path + ": tensor count " + std::to_string(nt) + " does not match architecture");
  for (Matrix* p : params) {
    const auto rows = read_value<Eigen::Index>(in, path, "tensor rows");
    const auto cols = read_value<Eigen::Index>(in, path, "tensor cols");
    if (rows != p->rows() || cols != p->cols())
      throw std::runtime_error(path + ": tensor shape mismatch");
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) (*p)(r, c) = read_value<double>(in, path, "tensor value");
  }
  return net;
}

}  // namespace uavsec::nn

#include "lelp/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace lelp::nn {

namespace {

constexpr char kMagic[8] = {'L', 'E', 'L', 'P', 'M', 'D', 'L', '\0'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void write_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void write_doubles(std::ostream& out, const std::vector<double>& v) {
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
}

std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}

std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}

void read_doubles(std::istream& in, std::vector<double>& v) {
  in.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(v.size() * sizeof(double)));
}

}  // namespace

void save_model(const MlpParams& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_model: cannot open " + path);
  out.write(kMagic, sizeof kMagic);
  write_u32(out, kVersion);
  write_u32(out, static_cast<std::uint32_t>(model.layer_dims.size()));
  for (std::size_t d : model.layer_dims) write_u64(out, d);
  write_u32(out, static_cast<std::uint32_t>(model.head.classes));
  write_u32(out, static_cast<std::uint32_t>(model.head.subclasses));
  write_u64(out, model.init_seed);
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    write_doubles(out, model.weights[l].data);
    write_doubles(out, model.biases[l]);
  }
  if (!out) throw std::runtime_error("save_model: write failed for " + path);

  std::ofstream meta(path + ".meta");
  if (!meta) throw std::runtime_error("save_model: cannot open " + path + ".meta");
  meta << "format: lelp-model v" << kVersion << "\n";
  meta << "layer_dims:";
  for (std::size_t d : model.layer_dims) meta << ' ' << d;
  meta << "\n";
  meta << "head_split: " << model.head.classes << " x " << model.head.subclasses << "\n";
  meta << "activation: relu\n";
  meta << "seed: " << model.init_seed << "\n";
}

MlpParams load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_model: cannot open " + path);
  char magic[8] = {};
  in.read(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw std::runtime_error("load_model: bad magic in " + path);
  const std::uint32_t version = read_u32(in);
  if (version != kVersion)
    throw std::runtime_error("load_model: unsupported version in " + path);
  const std::uint32_t n_dims = read_u32(in);
  if (n_dims < 2) throw std::runtime_error("load_model: corrupt layer-dim list");
  MlpParams model;
  model.layer_dims.resize(n_dims);
  for (auto& d : model.layer_dims) d = read_u64(in);
  model.head.classes = read_u32(in);
  model.head.subclasses = read_u32(in);
  model.init_seed = read_u64(in);
  for (std::size_t l = 0; l + 1 < n_dims; ++l) {
    Matrix w(model.layer_dims[l + 1], model.layer_dims[l]);
    read_doubles(in, w.data);
    Vector b(model.layer_dims[l + 1], 0.0);
    read_doubles(in, b);
    model.weights.push_back(std::move(w));
    model.biases.push_back(std::move(b));
  }
  if (!in) throw std::runtime_error("load_model: truncated file " + path);
  if (model.head.units() != model.output_dim())
    throw std::runtime_error("load_model: head split inconsistent with output dim");
  for (const Matrix& w : model.weights)
    if (!all_finite(w)) throw std::runtime_error("load_model: non-finite parameters");
  return model;
}

}  // namespace lelp::nn

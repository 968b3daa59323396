#include "ceunet/checkpoint.hpp"

#include <fstream>

#include "ceunet/error.hpp"

namespace ceunet {

namespace {

constexpr const char* kMagic = "CEUNET-CHECKPOINT";

template <class T>
void write_raw(std::ofstream& out, const std::vector<T>& v) {
  for (T x : v) {
    x = io::byteswap_if_big(x);
    out.write(reinterpret_cast<const char*>(&x), sizeof(T));
  }
}

template <class T>
std::vector<T> read_raw(std::ifstream& in, std::size_t count) {
  std::vector<T> v(count);
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(count * sizeof(T)));
  for (auto& x : v) x = io::byteswap_if_big(x);
  return v;
}

const Checkpoint::Tensor& find(const Checkpoint& c, const std::string& name) {
  for (const auto& t : c.tensors) {
    if (t.name == name) return t;
  }
  fail(ErrorKind::Load, "checkpoint has no tensor '" + name + "'");
}

}  // namespace

const std::vector<float>& Checkpoint::f32(const std::string& name) const {
  const auto& t = find(*this, name);
  if (const auto* v = std::get_if<std::vector<float>>(&t.values)) return *v;
  fail(ErrorKind::Load, "tensor '" + name + "' is not float32");
}

const std::vector<double>& Checkpoint::f64(const std::string& name) const {
  const auto& t = find(*this, name);
  if (const auto* v = std::get_if<std::vector<double>>(&t.values)) return *v;
  fail(ErrorKind::Load, "tensor '" + name + "' is not float64");
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  io::Json header = {{"kind", ckpt.kind}, {"meta", ckpt.meta}, {"tensors", io::Json::array()}};
  for (const auto& t : ckpt.tensors) {
    const bool is32 = std::holds_alternative<std::vector<float>>(t.values);
    const std::size_t size = is32 ? std::get<0>(t.values).size() : std::get<1>(t.values).size();
    header["tensors"].push_back({{"name", t.name}, {"dtype", is32 ? "float32" : "float64"}, {"size", size}});
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot open for writing: " + path.string());
  out << kMagic << ' ' << Checkpoint::kVersion << '\n' << header.dump() << '\n';
  for (const auto& t : ckpt.tensors) {
    std::visit([&](const auto& v) { write_raw(out, v); }, t.values);
  }
  if (!out) fail(ErrorKind::Io, "write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const std::string& expected_kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Load, "missing checkpoint: " + path.string());
  std::string magic_line;
  std::getline(in, magic_line);
  const std::string want = std::string(kMagic) + ' ' + std::to_string(Checkpoint::kVersion);
  if (magic_line != want) fail(ErrorKind::Load, path.string() + ": not a version-1 checkpoint");
  std::string header_line;
  std::getline(in, header_line);
  Checkpoint ckpt;
  try {
    const auto header = io::Json::parse(header_line);
    ckpt.kind = header.at("kind").get<std::string>();
    ckpt.meta = header.at("meta");
    if (ckpt.kind != expected_kind) {
      fail(ErrorKind::Load, path.string() + ": expected a " + expected_kind + " checkpoint, found " + ckpt.kind);
    }
    for (const auto& t : header.at("tensors")) {
      const auto name = t.at("name").get<std::string>();
      const auto size = t.at("size").get<std::size_t>();
      if (t.at("dtype").get<std::string>() == "float32") {
        ckpt.add(name, read_raw<float>(in, size));
      } else {
        ckpt.add(name, read_raw<double>(in, size));
      }
    }
  } catch (const io::Json::exception& e) {
    fail(ErrorKind::Load, path.string() + ": " + e.what());
  }
  if (!in) fail(ErrorKind::Integrity, path.string() + ": truncated checkpoint");
  return ckpt;
}

}  // namespace ceunet

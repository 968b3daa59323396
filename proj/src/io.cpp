#include "ceunet/io.hpp"

#include <fstream>
#include <sstream>

#include "ceunet/error.hpp"

namespace ceunet::io {

template <class T>
void write_le(const std::filesystem::path& path, std::span<const T> values) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot open for writing: " + path.string());
  std::vector<T> buf(values.begin(), values.end());
  for (auto& v : buf) v = byteswap_if_big(v);
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(T)));
  if (!out) fail(ErrorKind::Io, "write failed: " + path.string());
}

template <class T>
std::vector<T> read_le(const std::filesystem::path& path, std::size_t expected_count) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Load, "missing file: " + path.string());
  in.seekg(0, std::ios::end);
  const auto bytes = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  if (bytes != expected_count * sizeof(T)) {
    fail(ErrorKind::Integrity, path.string() + ": expected " +
                                   std::to_string(expected_count * sizeof(T)) +
                                   " bytes, found " + std::to_string(bytes));
  }
  std::vector<T> values(expected_count);
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(bytes));
  if (!in) fail(ErrorKind::Load, "read failed: " + path.string());
  for (auto& v : values) v = byteswap_if_big(v);
  return values;
}

Json read_json(const std::filesystem::path& path) {
  try {
    return Json::parse(read_text(path));
  } catch (const Json::exception& e) {
    fail(ErrorKind::Load, path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const Json& value) {
  write_text(path, value.dump(2) + "\n");
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Load, "missing file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot open for writing: " + path.string());
  out << text;
  if (!out) fail(ErrorKind::Io, "write failed: " + path.string());
}

template void write_le<float>(const std::filesystem::path&, std::span<const float>);
template void write_le<std::uint16_t>(const std::filesystem::path&, std::span<const std::uint16_t>);
template void write_le<std::uint32_t>(const std::filesystem::path&, std::span<const std::uint32_t>);
template std::vector<float> read_le<float>(const std::filesystem::path&, std::size_t);
template std::vector<std::uint16_t> read_le<std::uint16_t>(const std::filesystem::path&, std::size_t);
template std::vector<std::uint32_t> read_le<std::uint32_t>(const std::filesystem::path&, std::size_t);

}  // namespace ceunet::io

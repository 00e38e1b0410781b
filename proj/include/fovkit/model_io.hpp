#pragma once

#include "fovkit/nn.hpp"
#include "fovkit/types.hpp"

#include <filesystem>
#include <fstream>
#include <vector>

#include <json.hpp>

// Shared container for trained weights: 4-byte magic, u32le header length,
// UTF-8 JSON header, then raw f32le tensors in header order. Tensors are
// stored column-major as they live in memory.
namespace fovkit::io {

inline void write_model(const std::filesystem::path& path, const char magic[4],
                        nlohmann::json header,
                        const std::vector<nn::ParamRef<float>>& params) {
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& p : params) {
    tensors.push_back({{"name", p.name},
                       {"rows", p.value->rows()},
                       {"cols", p.value->cols()}});
  }
  header["tensors"] = tensors;
  const std::string head = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot open for writing: " + path.string());
  out.write(magic, 4);
  const std::uint32_t len = static_cast<std::uint32_t>(head.size());
  out.write(reinterpret_cast<const char*>(&len), 4);
  out.write(head.data(), static_cast<std::streamsize>(head.size()));
  for (const auto& p : params) {
    out.write(reinterpret_cast<const char*>(p.value->data()),
              static_cast<std::streamsize>(sizeof(float) * p.value->size()));
  }
  if (!out) throw Error(ErrorKind::Io, "write failed: " + path.string());
}

inline nlohmann::json read_model_header(const std::filesystem::path& path, const char magic[4]) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open: " + path.string());
  char got[4];
  std::uint32_t len = 0;
  in.read(got, 4);
  in.read(reinterpret_cast<char*>(&len), 4);
  if (!in || std::memcmp(got, magic, 4) != 0) {
    throw Error(ErrorKind::Io, "bad magic in model file: " + path.string());
  }
  std::string head(len, '\0');
  in.read(head.data(), len);
  if (!in) throw Error(ErrorKind::Io, "truncated model header: " + path.string());
  return nlohmann::json::parse(head);
}

// Fills `params` (already sized by the caller from the header's architecture
// fields) with the stored tensors, verifying shapes.
inline void read_model_tensors(const std::filesystem::path& path, const char magic[4],
                               const std::vector<nn::ParamRef<float>>& params) {
  const nlohmann::json header = read_model_header(path, magic);
  const auto& tensors = header.at("tensors");
  if (tensors.size() != params.size()) {
    throw Error(ErrorKind::Io, "tensor count mismatch in " + path.string());
  }
  std::ifstream in(path, std::ios::binary);
  std::uint32_t len = 0;
  in.seekg(4);
  in.read(reinterpret_cast<char*>(&len), 4);
  in.seekg(8 + len);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& t = tensors.at(i);
    if (t.at("name").get<std::string>() != params[i].name ||
        t.at("rows").get<Eigen::Index>() != params[i].value->rows() ||
        t.at("cols").get<Eigen::Index>() != params[i].value->cols()) {
      throw Error(ErrorKind::Io, "tensor layout mismatch in " + path.string());
    }
    in.read(reinterpret_cast<char*>(params[i].value->data()),
            static_cast<std::streamsize>(sizeof(float) * params[i].value->size()));
  }
  if (!in) throw Error(ErrorKind::Io, "truncated tensor payload: " + path.string());
}

}  // namespace fovkit::io

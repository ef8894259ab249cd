#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sesame/binary_io.hpp"
#include "sesame/error.hpp"
#include "sesame/tensor.hpp"

namespace sesame {

struct NamedMatrix {
  std::string name;
  Matrix<float> value;
};

/// Contents of a "SCKP" file: a JSON header (model description plus the
/// tensor table) followed by every tensor as row-major f32 LE.
struct Checkpoint {
  nlohmann::json meta;
  std::vector<NamedMatrix> tensors;

  const Matrix<float>& tensor(const std::string& name) const {
    for (const auto& t : tensors) {
      if (t.name == name) return t.value;
    }
    throw FormatError("checkpoint has no tensor named \"" + name + "\"");
  }
};

inline constexpr char kCheckpointMagic[5] = "SCKP";

inline void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  nlohmann::json header;
  header["format"] = "sesame-checkpoint";
  header["version"] = 1;
  header["meta"] = ckpt.meta;
  header["tensors"] = nlohmann::json::array();
  for (const auto& t : ckpt.tensors) {
    header["tensors"].push_back({{"name", t.name}, {"rows", t.value.rows()}, {"cols", t.value.cols()}});
  }
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint file: " + path);
  out.write(kCheckpointMagic, 4);
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& t : ckpt.tensors) {
    for (Index r = 0; r < t.value.rows(); ++r) {
      for (Index c = 0; c < t.value.cols(); ++c) io::write_f32(out, t.value(r, c));
    }
  }
  if (!out) throw DataError("failed writing checkpoint file: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint file: " + path);
  const std::string what = "checkpoint file " + path;
  io::expect_magic(in, kCheckpointMagic, what);
  const auto length = io::read_le<std::uint32_t>(in, "header length");
  std::string text(length, '\0');
  if (!in.read(text.data(), length)) throw FormatError(what + ": truncated header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(what + ": malformed header: " + e.what());
  }
  if (header.value("format", "") != "sesame-checkpoint" || header.value("version", 0) != 1) {
    throw FormatError(what + ": unsupported header format");
  }

  Checkpoint ckpt;
  ckpt.meta = header["meta"];
  for (const auto& entry : header.at("tensors")) {
    NamedMatrix t{entry.at("name").get<std::string>(),
                  Matrix<float>(entry.at("rows").get<Index>(), entry.at("cols").get<Index>())};
    for (Index r = 0; r < t.value.rows(); ++r) {
      for (Index c = 0; c < t.value.cols(); ++c) {
        const float v = io::read_f32(in, "tensor " + t.name);
        if (!std::isfinite(v)) throw NonFiniteError(what + ": non-finite value in tensor " + t.name);
        t.value(r, c) = v;
      }
    }
    ckpt.tensors.push_back(std::move(t));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError(what + ": trailing bytes after payload");
  return ckpt;
}

}  // namespace sesame

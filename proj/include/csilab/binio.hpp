#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "csilab/errors.hpp"

// Little-endian binary file helpers with byte-offset tracking so format
// errors can name the exact failure position.

static_assert(std::endian::native == std::endian::little,
              "binary file formats assume a little-endian host");

namespace csilab::binio {

class Writer {
 public:
  explicit Writer(const std::string& path) : path_(path), out_(path, std::ios::binary) {
    if (!out_) throw IoError("cannot open for writing: " + path);
  }

  void bytes(const void* p, std::size_t n) {
    out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    if (!out_) throw IoError("write failed at byte " + std::to_string(offset_) + ": " + path_);
    offset_ += n;
  }

  template <typename T>
  void pod(T v) {
    bytes(&v, sizeof(T));
  }

  std::uint64_t offset() const { return offset_; }

 private:
  std::string path_;
  std::ofstream out_;
  std::uint64_t offset_ = 0;
};

class Reader {
 public:
  explicit Reader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw IoError("cannot open for reading: " + path);
  }

  void bytes(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) {
      throw FormatError("truncated file at byte " + std::to_string(offset_ + static_cast<std::uint64_t>(in_.gcount())) +
                        " (wanted " + std::to_string(n) + " more bytes): " + path_);
    }
    offset_ += n;
  }

  template <typename T>
  T pod() {
    T v;
    bytes(&v, sizeof(T));
    return v;
  }

  bool at_eof() {
    in_.peek();
    return in_.eof();
  }

  std::uint64_t offset() const { return offset_; }
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ifstream in_;
  std::uint64_t offset_ = 0;
};

} // namespace csilab::binio

#pragma once

#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>

#include "lpo/policy.hpp"

namespace lpo::detail {

inline std::string hexfloat(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

inline double read_hexfloat(std::istream& is) {
  std::string tok;
  if (!(is >> tok)) throw std::runtime_error("checkpoint: truncated parameter list");
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (end != tok.c_str() + tok.size()) throw std::runtime_error("checkpoint: bad number '" + tok + "'");
  return v;
}

template <class T>
T read_field(std::istream& is, std::string_view name) {
  std::string key;
  T value{};
  if (!(is >> key >> value) || key != name) {
    throw std::runtime_error("checkpoint: expected '" + std::string(name) + "'");
  }
  return value;
}

inline void write_header(std::ostream& os, std::string_view kind, const Vocab& vocab) {
  os << "lpo-policy 1\nkind " << kind << "\nvocab " << vocab.size() << '\n';
  for (const std::string& s : vocab.symbols()) os << s << '\n';
}

}  // namespace lpo::detail

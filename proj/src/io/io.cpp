#include "firkrylov/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

namespace firkrylov {

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  if (res.ec != std::errc()) throw Error(ErrorCode::Internal, "failed to format a double");
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view text) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r'))
    text.remove_suffix(1);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw Error(ErrorCode::Io, "cannot parse '" + std::string(text) + "' as a number");
  }
  return value;
}

void write_signal_csv(const std::string& path, const Vector& u, const Vector& y,
                      const std::string& comment) {
  require(u.size() == y.size(), ErrorCode::DimensionMismatch, "u and y must have equal length");
  std::string out;
  if (!comment.empty()) out += "# " + comment + "\n";
  out += "u,y\n";
  out.reserve(static_cast<size_t>(u.size()) * 48);
  for (Index i = 0; i < u.size(); ++i) {
    out += format_double(u(i));
    out += ',';
    out += format_double(y(i));
    out += '\n';
  }
  write_text_file(path, out);
}

void read_signal_csv(const std::string& path, Vector& u, Vector& y) {
  std::istringstream in(read_text_file(path));
  std::string line;
  size_t row = 0;
  do {
    if (!std::getline(in, line)) throw Error(ErrorCode::Io, path + ": empty file");
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
  } while (!line.empty() && line.front() == '#');
  if (line != "u,y") throw Error(ErrorCode::Io, path + ": expected header 'u,y'");
  std::vector<double> us, ys;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const size_t comma = line.find(',');
    if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos) {
      throw Error(ErrorCode::Io, path + ": row " + std::to_string(row) + " must have two fields");
    }
    try {
      us.push_back(parse_double(std::string_view(line).substr(0, comma)));
      ys.push_back(parse_double(std::string_view(line).substr(comma + 1)));
    } catch (const Error& e) {
      throw Error(ErrorCode::Io, path + ": row " + std::to_string(row) + ": " + e.what());
    }
  }
  if (us.empty()) throw Error(ErrorCode::Io, path + ": no samples");
  u = Eigen::Map<const Vector>(us.data(), static_cast<Index>(us.size()));
  y = Eigen::Map<const Vector>(ys.data(), static_cast<Index>(ys.size()));
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot open '" + path + "' for writing");
  out << contents;
  if (!out) throw Error(ErrorCode::Io, "failed writing '" + path + "'");
}

}  // namespace firkrylov

#include "ctxrank/dataset.hpp"

#include "json.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace ctxrank {

using nlohmann::json;

void Dataset::validate() const {
  if (dim <= 0) throw std::invalid_argument("dataset dimension must be positive");
  for (std::size_t k = 0; k < instances.size(); ++k) {
    const auto& inst = instances[k];
    const std::string where = "instance " + std::to_string(k);
    if (inst.objects.rows() != dim) throw std::invalid_argument(where + ": feature dimension mismatch");
    if (inst.objects.cols() < 1) throw std::invalid_argument(where + ": empty task");
    if (inst.ranking.size() != inst.objects.cols())
      throw std::invalid_argument(where + ": ranking length differs from task size");
    if (!inst.objects.allFinite()) throw std::invalid_argument(where + ": non-finite feature");
  }
}

void write_dataset(std::ostream& out, const Dataset& data) {
  json header = {{"format", "ctxrank-dataset"}, {"version", 1}, {"dim", data.dim}};
  out << header.dump() << '\n';
  for (const auto& inst : data.instances) {
    json objects = json::array();
    for (Eigen::Index c = 0; c < inst.objects.cols(); ++c) {
      json point = json::array();
      for (Eigen::Index r = 0; r < inst.objects.rows(); ++r) point.push_back(inst.objects(r, c));
      objects.push_back(std::move(point));
    }
    json line = {{"objects", std::move(objects)}, {"ranking", inst.ranking.positions()}};
    out << line.dump() << '\n';
  }
}

Dataset read_dataset(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("dataset: missing header line");
  const json header = json::parse(line);
  if (header.value("format", "") != "ctxrank-dataset") throw std::invalid_argument("dataset: unknown format");
  if (header.value("version", 0) != 1) throw std::invalid_argument("dataset: unsupported version");
  Dataset data;
  data.dim = header.at("dim").get<int>();
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const json j = json::parse(line);
    const auto& objects = j.at("objects");
    Instance inst;
    inst.objects.resize(data.dim, static_cast<Eigen::Index>(objects.size()));
    for (std::size_t c = 0; c < objects.size(); ++c) {
      if (objects[c].size() != static_cast<std::size_t>(data.dim))
        throw std::invalid_argument("dataset line " + std::to_string(lineno) + ": wrong feature dimension");
      for (int r = 0; r < data.dim; ++r) inst.objects(r, static_cast<Eigen::Index>(c)) = objects[c][r].get<double>();
    }
    inst.ranking = Ranking(j.at("ranking").get<std::vector<int>>());
    data.instances.push_back(std::move(inst));
  }
  data.validate();
  return data;
}

void save_dataset(const std::filesystem::path& path, const Dataset& data) {
  std::ostringstream buffer;
  write_dataset(buffer, data);
  write_file_atomic(path, buffer.str());
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset " + path.string());
  return read_dataset(in);
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw std::runtime_error("failed writing " + path.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

std::string checksum_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

}  // namespace ctxrank

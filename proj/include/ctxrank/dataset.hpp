#pragma once

#include "ctxrank/ranking.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace ctxrank {

// One ranking task: objects stored as columns (dim x n) plus the
// ground-truth ranking over those columns.
struct Instance {
  Eigen::MatrixXd objects;
  Ranking ranking;

  int size() const { return static_cast<int>(objects.cols()); }
};

struct Dataset {
  int dim = 0;
  std::vector<Instance> instances;

  std::size_t size() const { return instances.size(); }
  // Throws std::invalid_argument on dimension, length or finiteness violations.
  void validate() const;
};

// JSONL with a header line {"format":"ctxrank-dataset","version":1,"dim":d}
// followed by one {"objects":[[...],...],"ranking":[...]} line per instance.
void write_dataset(std::ostream& out, const Dataset& data);
Dataset read_dataset(std::istream& in);

void save_dataset(const std::filesystem::path& path, const Dataset& data);
Dataset load_dataset(const std::filesystem::path& path);

// Writes `contents` to a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

// 64-bit FNV-1a of the bytes, as 16 lowercase hex digits.
std::string checksum_hex(const std::string& bytes);

}  // namespace ctxrank

#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <system_error>
#include <utility>
#include <vector>

#include <unistd.h>

#include "bbt/error.hpp"

namespace bbt::cli {

// Collects every output of a command and publishes them together: all
// contents go to temporary siblings first, then each is renamed into place.
// Nothing is touched until commit(), so a failing command leaves no files.
class OutputSet {
 public:
  void add(std::string path, std::string content) { files_.emplace_back(std::move(path), std::move(content)); }

  std::size_t size() const { return files_.size(); }

  void commit() {
    namespace fs = std::filesystem;
    std::vector<fs::path> temps;
    const auto cleanup = [&temps] {
      std::error_code ec;
      for (const auto& t : temps) fs::remove(t, ec);
    };
    for (const auto& [path, content] : files_) {
      const fs::path target(path);
      std::error_code ec;
      if (target.has_parent_path()) fs::create_directories(target.parent_path(), ec);
      if (ec) {
        cleanup();
        throw RuntimeError(path + ": cannot create directory: " + ec.message());
      }
      fs::path temp = target;
      temp += ".tmp." + std::to_string(::getpid());
      temps.push_back(temp);
      std::ofstream out(temp, std::ios::binary | std::ios::trunc);
      out.write(content.data(), static_cast<std::streamsize>(content.size()));
      out.close();
      if (!out) {
        cleanup();
        throw RuntimeError(path + ": write failed");
      }
    }
    for (std::size_t i = 0; i < files_.size(); ++i) {
      std::error_code ec;
      std::filesystem::rename(temps[i], files_[i].first, ec);
      if (ec) {
        cleanup();
        throw RuntimeError(files_[i].first + ": cannot rename into place: " + ec.message());
      }
    }
    files_.clear();
  }

 private:
  std::vector<std::pair<std::string, std::string>> files_;
};

}  // namespace bbt::cli

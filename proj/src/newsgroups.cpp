#include "corex/newsgroups.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace corex {

namespace {

bool is_number(const std::string& s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) { return c >= '0' && c <= '9'; });
}

bool file_order(const std::string& a, const std::string& b) {
  if (is_number(a) && is_number(b) && a.size() != b.size()) return a.size() < b.size();
  return a < b;
}

}  // namespace

std::vector<Document> read_newsgroups_split(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw DataError("newsgroups split not found: " + dir.string());
  std::vector<std::string> groups;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_directory()) groups.push_back(entry.path().filename().string());
  }
  std::sort(groups.begin(), groups.end());

  std::vector<Document> docs;
  for (const auto& group : groups) {
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(dir / group)) {
      if (entry.is_regular_file()) files.push_back(entry.path().filename().string());
    }
    std::sort(files.begin(), files.end(), file_order);
    for (const auto& name : files) {
      std::ifstream in(dir / group / name, std::ios::binary);
      if (!in) throw DataError("cannot read " + (dir / group / name).string());
      std::ostringstream buf;
      buf << in.rdbuf();
      docs.push_back({group + "/" + name, strip_newsgroup_boilerplate(buf.str()), {group}});
    }
  }
  if (docs.empty()) throw DataError("newsgroups split is empty: " + dir.string());
  return docs;
}

NewsgroupsPaths find_newsgroups(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  for (const auto& [train, test] : {std::pair{"20news-bydate-train", "20news-bydate-test"}, std::pair{"train", "test"}}) {
    if (fs::is_directory(root / train) && fs::is_directory(root / test)) return {root / train, root / test};
  }
  throw DataError("no 20 Newsgroups train/test split under " + root.string());
}

}  // namespace corex

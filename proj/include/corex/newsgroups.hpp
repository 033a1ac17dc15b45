#ifndef COREX_NEWSGROUPS_HPP
#define COREX_NEWSGROUPS_HPP

#include <filesystem>
#include <vector>

#include "corex/corpus.hpp"

namespace corex {

/// Reads one split of the "bydate" 20 Newsgroups layout: `dir/<group>/<file>`.
/// Each file becomes a Document with id "<group>/<file>", label "<group>" and
/// boilerplate-stripped text. Groups and files are visited in sorted order
/// (files numerically when their names are numbers). Throws DataError when the
/// directory is missing or empty.
std::vector<Document> read_newsgroups_split(const std::filesystem::path& dir);

/// Locates the train and test split directories under `root`, accepting
/// either "20news-bydate-train"/"20news-bydate-test" or "train"/"test".
struct NewsgroupsPaths {
  std::filesystem::path train;
  std::filesystem::path test;
};
NewsgroupsPaths find_newsgroups(const std::filesystem::path& root);

}  // namespace corex

#endif  // COREX_NEWSGROUPS_HPP

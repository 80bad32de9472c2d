#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace e2f::cli {

// Flat key=value settings. Every key has a default; unknown keys are rejected.
class RunConfig {
 public:
  RunConfig();

  void set(const std::string& key, const std::string& value);
  // "key=value" form.
  void assign(const std::string& assignment);
  // Lines of key=value; '#' starts a comment.
  void load_file(const std::filesystem::path& path);
  std::string dump() const;

  const std::string& str(const std::string& key) const;
  double num(const std::string& key) const;
  std::size_t count(const std::string& key) const;
  std::uint64_t u64(const std::string& key) const;
  bool flag(const std::string& key) const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

// Runs one command line (args[0] is the program name). Returns the exit status; diagnostics go to
// `err` as a single line.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace e2f::cli

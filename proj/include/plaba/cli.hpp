#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

namespace plaba::cli {

// Runs one subcommand. `args` excludes the program name.
// Exit codes: 0 success, 1 usage or validation error, 2 I/O or backend failure.
int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int cli_dispatch(const std::vector<std::string>& args);

// One JSON Lines entry per successful subcommand:
//   {"command", "argv", "timestamp", "seed"?, "system_ids", "template_ids",
//    "inputs": [{"role","path","sha256"}], "outputs": [...]}
std::vector<nlohmann::json> load_manifest(const std::filesystem::path& path);

// Walks back from `file` through the entries that produced it and their
// inputs. Each node: {"path","sha256","role"?,"produced_by"?: entry,
// "inputs": [nodes]}. A file no entry produced is a leaf.
nlohmann::json trace_provenance(const std::vector<nlohmann::json>& manifest,
                                const std::filesystem::path& file);

std::string format_provenance(const nlohmann::json& tree);

}  // namespace plaba::cli

#pragma once

#include <string>
#include <vector>

namespace threatlens {

// Throws DataError on a missing/unreadable file.
std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

// FNV-1a/64 of the file bytes as "fnv64:<16 hex digits>" (manifests).
std::string hash_file_hex(const std::string& path);

// Regular files under dir with the given extension, sorted by filename.
std::vector<std::string> list_files(const std::string& dir,
                                    const std::string& extension);

}  // namespace threatlens

// Copyright 2026 The TriCLIP Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef TRICLIP_JSON_IO_HPP_
#define TRICLIP_JSON_IO_HPP_

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

namespace triclip {

// Throws IoError when the file cannot be opened and FormatError when it does
// not parse; both messages carry the path.
nlohmann::json read_json_file(const std::filesystem::path& path);

// Pretty-printed with a trailing newline; parent directories are created.
void write_json_file(const std::filesystem::path& path,
                     const nlohmann::json& j);

// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);
std::string sha256_bytes(std::string_view bytes);

}  // namespace triclip

#endif  // TRICLIP_JSON_IO_HPP_

// SPDX-License-Identifier: Apache-2.0
//
// csiforge: variable-rate CSI feedback codec and MIMO-OFDM simulation harness
// Copyright (C) 2026 The csiforge Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace csiforge::eval
{

/// Environment variable naming the default output directory.
inline constexpr const char *kOutDirEnv = "CSIFORGE_OUT_DIR";

/// Runs one command line (without the program name). Returns 0 on success,
/// 2 on usage errors (unknown flags, missing arguments) and 1 on any other error.
int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

} // namespace csiforge::eval

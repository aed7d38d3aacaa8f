// Licensed under the Apache License, Version 2.0 (the "License"); you
// may not use this file except in compliance with the License.  You
// may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or
// implied.  See the License for the specific language governing
// permissions and limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace retime {

/// Malformed or out-of-contract argument (shapes, ranges, file contents).
class InvalidInput : public std::invalid_argument {
public:
    explicit InvalidInput(const std::string& what) : std::invalid_argument(what) {}
};

/// The requested output length cannot be produced from the source (l >= n).
class InvalidTarget : public std::invalid_argument {
public:
    explicit InvalidTarget(const std::string& what) : std::invalid_argument(what) {}
};

/// A re-timing signal that permits no speed-up anywhere.
class DegenerateSignal : public std::domain_error {
public:
    explicit DegenerateSignal(const std::string& what) : std::domain_error(what) {}
};

} // namespace retime

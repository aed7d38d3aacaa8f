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

#include "retime/errors.hpp"

#include <cmath>
#include <span>
#include <string>

namespace retime {

/// Mean absolute error between two skip sequences of equal length.
inline double mae(std::span<const double> predicted, std::span<const double> truth)
{
    if (predicted.size() != truth.size()) {
        throw InvalidInput("mae: length mismatch " + std::to_string(predicted.size()) + " vs " +
                           std::to_string(truth.size()));
    }
    if (predicted.empty()) {
        throw InvalidInput("mae: empty sequences");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        acc += std::abs(predicted[i] - truth[i]);
    }
    return acc / static_cast<double>(predicted.size());
}

} // namespace retime

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

#include "retime/baselines.hpp"
#include "retime/errors.hpp"
#include "retime/eval.hpp"
#include "retime/interpolation.hpp"
#include "retime/io.hpp"
#include "retime/metrics.hpp"
#include "retime/model_math.hpp"
#include "retime/optimizer.hpp"
#include "retime/random.hpp"
#include "retime/signals.hpp"
#include "retime/synth.hpp"

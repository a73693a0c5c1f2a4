// Copyright 2026 The bevpf Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef BEVPF_BEVPF_HPP
#define BEVPF_BEVPF_HPP

#include "bevpf/bev_splat.hpp"
#include "bevpf/errors.hpp"
#include "bevpf/evaluation.hpp"
#include "bevpf/grid_maps.hpp"
#include "bevpf/likelihood.hpp"
#include "bevpf/particle_filter.hpp"
#include "bevpf/patch_sampler.hpp"
#include "bevpf/runner.hpp"
#include "bevpf/se2.hpp"
#include "bevpf/simulator.hpp"
#include "bevpf/training_losses.hpp"

#endif  // BEVPF_BEVPF_HPP

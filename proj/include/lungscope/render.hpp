// Copyright 2026 The lungscope Authors.
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

#pragma once

#include <string_view>
#include <vector>

#include "lungscope/evaluation.hpp"
#include "lungscope/image.hpp"

namespace lungscope {

/// 2x2 confusion matrix figure: rows are true classes, columns predicted
/// classes, covid first; cells shaded by their share of the row.
RasterImage render_confusion(const ConfusionMatrix& cm, std::string_view title);

/// Places RGB renderings next to each other on a white canvas, top-aligned.
RasterImage side_by_side(const std::vector<RasterImage>& panels, int gap = 16);

}  // namespace lungscope

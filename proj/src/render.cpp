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

#include "lungscope/render.hpp"

#include <algorithm>
#include <string>

#include <opencv2/imgproc.hpp>

#include "lungscope/errors.hpp"

namespace lungscope {

namespace {

RasterImage from_mat(const cv::Mat& rgb) {
  RasterImage out(rgb.cols, rgb.rows, 3);
  for (int y = 0; y < rgb.rows; ++y) {
    const auto* row = rgb.ptr<cv::Vec3b>(y);
    for (int x = 0; x < rgb.cols; ++x) {
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = row[x][c];
    }
  }
  return out;
}

void centered_text(cv::Mat& m, const std::string& text, cv::Point centre, double scale, const cv::Scalar& color,
                   int thickness = 1) {
  int baseline = 0;
  const cv::Size size = cv::getTextSize(text, cv::FONT_HERSHEY_SIMPLEX, scale, thickness, &baseline);
  cv::putText(m, text, {centre.x - size.width / 2, centre.y + size.height / 2}, cv::FONT_HERSHEY_SIMPLEX, scale,
              color, thickness, cv::LINE_AA);
}

}  // namespace

RasterImage render_confusion(const ConfusionMatrix& cm, std::string_view title) {
  constexpr int kCell = 140;
  constexpr int kLeft = 110;
  constexpr int kTop = 80;
  cv::Mat m(kTop + 2 * kCell + 50, kLeft + 2 * kCell + 20, CV_8UC3, cv::Scalar(255, 255, 255));
  const cv::Scalar ink(20, 20, 20);
  centered_text(m, std::string(title), {m.cols / 2, 22}, 0.6, ink, 1);
  centered_text(m, "predicted", {kLeft + kCell, 52}, 0.5, ink);
  const std::int64_t cells[2][2] = {{cm.tp, cm.fn}, {cm.fp, cm.tn}};
  const char* names[2] = {"covid", "normal"};
  for (int r = 0; r < 2; ++r) {
    const std::int64_t row_total = cells[r][0] + cells[r][1];
    centered_text(m, names[r], {kLeft / 2, kTop + r * kCell + kCell / 2}, 0.5, ink);
    centered_text(m, names[r], {kLeft + r * kCell + kCell / 2, kTop - 12}, 0.5, ink);
    for (int c = 0; c < 2; ++c) {
      const double share = row_total > 0 ? static_cast<double>(cells[r][c]) / static_cast<double>(row_total) : 0.0;
      const int shade = static_cast<int>(std::lround(235.0 - 180.0 * share));
      const cv::Rect cell(kLeft + c * kCell, kTop + r * kCell, kCell, kCell);
      cv::rectangle(m, cell, cv::Scalar(shade, shade, 255), cv::FILLED);
      cv::rectangle(m, cell, ink, 1);
      const cv::Scalar text_color = share > 0.5 ? cv::Scalar(255, 255, 255) : ink;
      centered_text(m, std::to_string(cells[r][c]), {cell.x + kCell / 2, cell.y + kCell / 2}, 0.9, text_color, 2);
    }
  }
  centered_text(m, "true", {kLeft / 2, kTop - 12}, 0.5, ink);
  centered_text(m, "rows: true class, columns: predicted", {m.cols / 2, kTop + 2 * kCell + 28}, 0.4, ink);
  return from_mat(m);
}

RasterImage side_by_side(const std::vector<RasterImage>& panels, int gap) {
  if (panels.empty()) throw Error(ErrorKind::kInvalidArgument, "nothing to lay out");
  int width = gap;
  int height = 0;
  for (const auto& p : panels) {
    width += p.width() + gap;
    height = std::max(height, p.height());
  }
  RasterImage out(width, height + 2 * gap, 3, 255);
  int x0 = gap;
  for (const auto& p : panels) {
    for (int y = 0; y < p.height(); ++y) {
      for (int x = 0; x < p.width(); ++x) {
        for (int c = 0; c < 3; ++c) out.at(x0 + x, gap + y, c) = p.at(x, y, p.channels() == 3 ? c : 0);
      }
    }
    x0 += p.width() + gap;
  }
  return out;
}

}  // namespace lungscope

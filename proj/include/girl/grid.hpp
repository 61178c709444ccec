#pragma once

#include <cmath>

#include "girl/errors.hpp"
#include "girl/retina.hpp"

namespace girl {

// Canonical action geometry: a 512x320 canvas carved into a 10x16 grid of
// 32x32 cells; actions are cell indices in row-major order.
inline constexpr int kCanvasW = 512;
inline constexpr int kCanvasH = 320;
inline constexpr int kCellPx = 32;
inline constexpr int kGridRows = 10;
inline constexpr int kGridCols = 16;
inline constexpr int kNumActions = kGridRows * kGridCols;

inline int action_row(int a) { return a / kGridCols; }
inline int action_col(int a) { return a % kGridCols; }

inline PixelPoint action_center(int a) {
  return {static_cast<float>(action_col(a) * kCellPx + kCellPx / 2),
          static_cast<float>(action_row(a) * kCellPx + kCellPx / 2)};
}

// The grid cell containing the canvas center (256, 160).
inline constexpr int kCenterAction = 5 * kGridCols + 8;

// Maps a native-resolution fixation to its action cell after the virtual
// resize to 512x320. Out-of-bounds points are rejected; points that land
// exactly on the far edge after scaling clamp into the last row/column.
inline int discretize_fixation(double x, double y, int native_w,
                               int native_h) {
  if (native_w <= 0 || native_h <= 0)
    throw ValidationError("discretize_fixation: bad native extents");
  if (x < 0 || x >= native_w || y < 0 || y >= native_h)
    throw ValidationError("discretize_fixation: point out of bounds");
  int col = static_cast<int>(std::floor(x * kCanvasW / native_w / kCellPx));
  int row = static_cast<int>(std::floor(y * kCanvasH / native_h / kCellPx));
  col = std::min(std::max(col, 0), kGridCols - 1);
  row = std::min(std::max(row, 0), kGridRows - 1);
  return row * kGridCols + col;
}

}  // namespace girl

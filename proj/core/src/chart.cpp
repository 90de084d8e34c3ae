#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <png.h>

#include "cmh/errors.hpp"
#include "cmh/harness.hpp"

namespace cmh {

namespace {

// 5x7 glyphs, one byte per row, low 5 bits used. Letters are drawn upper case.
struct Glyph {
  char c;
  std::array<std::uint8_t, 7> rows;
};

constexpr Glyph kFont[] = {
    {'A', {0b01110, 0b10001, 0b10001, 0b11111, 0b10001, 0b10001, 0b10001}},
    {'B', {0b11110, 0b10001, 0b10001, 0b11110, 0b10001, 0b10001, 0b11110}},
    {'C', {0b01110, 0b10001, 0b10000, 0b10000, 0b10000, 0b10001, 0b01110}},
    {'D', {0b11100, 0b10010, 0b10001, 0b10001, 0b10001, 0b10010, 0b11100}},
    {'E', {0b11111, 0b10000, 0b10000, 0b11110, 0b10000, 0b10000, 0b11111}},
    {'F', {0b11111, 0b10000, 0b10000, 0b11110, 0b10000, 0b10000, 0b10000}},
    {'G', {0b01110, 0b10001, 0b10000, 0b10111, 0b10001, 0b10001, 0b01111}},
    {'H', {0b10001, 0b10001, 0b10001, 0b11111, 0b10001, 0b10001, 0b10001}},
    {'I', {0b01110, 0b00100, 0b00100, 0b00100, 0b00100, 0b00100, 0b01110}},
    {'J', {0b00111, 0b00010, 0b00010, 0b00010, 0b00010, 0b10010, 0b01100}},
    {'K', {0b10001, 0b10010, 0b10100, 0b11000, 0b10100, 0b10010, 0b10001}},
    {'L', {0b10000, 0b10000, 0b10000, 0b10000, 0b10000, 0b10000, 0b11111}},
    {'M', {0b10001, 0b11011, 0b10101, 0b10101, 0b10001, 0b10001, 0b10001}},
    {'N', {0b10001, 0b10001, 0b11001, 0b10101, 0b10011, 0b10001, 0b10001}},
    {'O', {0b01110, 0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b01110}},
    {'P', {0b11110, 0b10001, 0b10001, 0b11110, 0b10000, 0b10000, 0b10000}},
    {'Q', {0b01110, 0b10001, 0b10001, 0b10001, 0b10101, 0b10010, 0b01101}},
    {'R', {0b11110, 0b10001, 0b10001, 0b11110, 0b10100, 0b10010, 0b10001}},
    {'S', {0b01111, 0b10000, 0b10000, 0b01110, 0b00001, 0b00001, 0b11110}},
    {'T', {0b11111, 0b00100, 0b00100, 0b00100, 0b00100, 0b00100, 0b00100}},
    {'U', {0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b01110}},
    {'V', {0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b01010, 0b00100}},
    {'W', {0b10001, 0b10001, 0b10001, 0b10101, 0b10101, 0b10101, 0b01010}},
    {'X', {0b10001, 0b10001, 0b01010, 0b00100, 0b01010, 0b10001, 0b10001}},
    {'Y', {0b10001, 0b10001, 0b10001, 0b01010, 0b00100, 0b00100, 0b00100}},
    {'Z', {0b11111, 0b00001, 0b00010, 0b00100, 0b01000, 0b10000, 0b11111}},
    {'0', {0b01110, 0b10001, 0b10011, 0b10101, 0b11001, 0b10001, 0b01110}},
    {'1', {0b00100, 0b01100, 0b00100, 0b00100, 0b00100, 0b00100, 0b01110}},
    {'2', {0b01110, 0b10001, 0b00001, 0b00010, 0b00100, 0b01000, 0b11111}},
    {'3', {0b11111, 0b00010, 0b00100, 0b00010, 0b00001, 0b10001, 0b01110}},
    {'4', {0b00010, 0b00110, 0b01010, 0b10010, 0b11111, 0b00010, 0b00010}},
    {'5', {0b11111, 0b10000, 0b11110, 0b00001, 0b00001, 0b10001, 0b01110}},
    {'6', {0b00110, 0b01000, 0b10000, 0b11110, 0b10001, 0b10001, 0b01110}},
    {'7', {0b11111, 0b00001, 0b00010, 0b00100, 0b01000, 0b01000, 0b01000}},
    {'8', {0b01110, 0b10001, 0b10001, 0b01110, 0b10001, 0b10001, 0b01110}},
    {'9', {0b01110, 0b10001, 0b10001, 0b01111, 0b00001, 0b00010, 0b01100}},
    {'.', {0b00000, 0b00000, 0b00000, 0b00000, 0b00000, 0b01100, 0b01100}},
    {'-', {0b00000, 0b00000, 0b00000, 0b11111, 0b00000, 0b00000, 0b00000}},
    {'_', {0b00000, 0b00000, 0b00000, 0b00000, 0b00000, 0b00000, 0b11111}},
    {':', {0b00000, 0b01100, 0b01100, 0b00000, 0b01100, 0b01100, 0b00000}},
    {'=', {0b00000, 0b00000, 0b11111, 0b00000, 0b11111, 0b00000, 0b00000}},
    {'/', {0b00000, 0b00001, 0b00010, 0b00100, 0b01000, 0b10000, 0b00000}},
    {'@', {0b01110, 0b10001, 0b10111, 0b10101, 0b10111, 0b10000, 0b01110}},
    {'(', {0b00010, 0b00100, 0b01000, 0b01000, 0b01000, 0b00100, 0b00010}},
    {')', {0b01000, 0b00100, 0b00010, 0b00010, 0b00010, 0b00100, 0b01000}},
};

using Rgb = std::array<std::uint8_t, 3>;

constexpr Rgb kPalette[] = {
    {31, 119, 180}, {255, 127, 14}, {44, 160, 44},  {214, 39, 40},
    {148, 103, 189}, {140, 86, 75}, {227, 119, 194}, {127, 127, 127},
};

class Canvas {
 public:
  Canvas(int w, int h) : w_(w), h_(h), px_(static_cast<std::size_t>(w * h * 3), 255) {}

  void fill(int x0, int y0, int x1, int y1, Rgb c) {
    for (int y = std::max(0, y0); y < std::min(h_, y1); ++y) {
      for (int x = std::max(0, x0); x < std::min(w_, x1); ++x) {
        auto* p = &px_[static_cast<std::size_t>((y * w_ + x) * 3)];
        p[0] = c[0];
        p[1] = c[1];
        p[2] = c[2];
      }
    }
  }

  // Scale 2: each glyph cell is 12x16 pixels.
  void text(int x, int y, const std::string& s, Rgb c = {0, 0, 0}) {
    for (char ch : s) {
      const char up = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
      for (const auto& g : kFont) {
        if (g.c != up) continue;
        for (int r = 0; r < 7; ++r) {
          for (int b = 0; b < 5; ++b) {
            if (g.rows[static_cast<std::size_t>(r)] & (1 << (4 - b))) fill(x + 2 * b, y + 2 * r, x + 2 * b + 2, y + 2 * r + 2, c);
          }
        }
        break;
      }
      x += 12;
    }
  }

  static int text_width(const std::string& s) { return static_cast<int>(s.size()) * 12; }

  void save(const std::string& path) const {
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(w_);
    img.height = static_cast<png_uint_32>(h_);
    img.format = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&img, path.c_str(), 0, px_.data(), 0, nullptr)) {
      throw IoError("cannot write " + path + ": " + img.message);
    }
  }

 private:
  int w_, h_;
  std::vector<std::uint8_t> px_;
};

std::string two_decimals(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  return buf;
}

}  // namespace

void write_png_chart(const std::string& path, const ResultsTable& table) {
  if (table.rows.empty()) throw ConfigError("nothing to plot: the results table is empty");

  std::vector<std::string> groups, policies;
  for (const auto& r : table.rows) {
    const std::string g = r.dataset + " b=" + std::to_string(r.beta) + " k=" + std::to_string(r.k);
    if (std::find(groups.begin(), groups.end(), g) == groups.end()) groups.push_back(g);
    if (std::find(policies.begin(), policies.end(), r.policy) == policies.end()) policies.push_back(r.policy);
  }

  const int bar = 28, gap = 36, left = 70, top = 60, plot_h = 300, bottom = 60;
  int group_w = static_cast<int>(policies.size()) * bar;
  for (const auto& g : groups) group_w = std::max(group_w, Canvas::text_width(g));
  int legend_w = 0;
  for (const auto& p : policies) legend_w += 20 + Canvas::text_width(p) + 16;
  const int width = std::max(left + static_cast<int>(groups.size()) * (group_w + gap) + gap, left + 40 + legend_w + 10);
  const int height = top + plot_h + bottom;
  Canvas cv(width, height);

  cv.text(left, 10, "F1");
  int lx = left + 40;
  for (std::size_t i = 0; i < policies.size(); ++i) {
    cv.fill(lx, 12, lx + 14, 26, kPalette[i % std::size(kPalette)]);
    cv.text(lx + 20, 12, policies[i]);
    lx += 20 + Canvas::text_width(policies[i]) + 16;
  }

  const int y0 = top + plot_h;
  auto y_of = [&](double v) { return y0 - static_cast<int>(std::clamp(v, 0.0, 1.0) * plot_h + 0.5); };
  for (double t : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    const int y = y_of(t);
    cv.fill(left - 4, y, width - gap / 2, y + 1, {220, 220, 220});
    cv.text(8, y - 7, two_decimals(t));
  }
  cv.fill(left - 1, top, left, y0 + 1, {0, 0, 0});
  cv.fill(left - 1, y0, width - gap / 2, y0 + 1, {0, 0, 0});

  for (std::size_t g = 0; g < groups.size(); ++g) {
    const int gx = left + gap + static_cast<int>(g) * (group_w + gap);
    for (const auto& r : table.rows) {
      const std::string key = r.dataset + " b=" + std::to_string(r.beta) + " k=" + std::to_string(r.k);
      if (key != groups[g]) continue;
      const auto pi = static_cast<std::size_t>(std::find(policies.begin(), policies.end(), r.policy) - policies.begin());
      const int x = gx + static_cast<int>(pi) * bar;
      cv.fill(x + 2, y_of(r.report.f1), x + bar - 2, y0, kPalette[pi % std::size(kPalette)]);
      const int mid = x + bar / 2;
      cv.fill(mid, y_of(r.report.f1_ci.hi), mid + 1, y_of(r.report.f1_ci.lo) + 1, {0, 0, 0});
      cv.fill(mid - 4, y_of(r.report.f1_ci.hi), mid + 5, y_of(r.report.f1_ci.hi) + 1, {0, 0, 0});
      cv.fill(mid - 4, y_of(r.report.f1_ci.lo), mid + 5, y_of(r.report.f1_ci.lo) + 1, {0, 0, 0});
    }
    cv.text(gx, y0 + 14, groups[g]);
  }
  cv.save(path);
}

}  // namespace cmh

#include "evio/image.hpp"

#include <cmath>
#include <fstream>
#include <string>

namespace evio {

float sample_bilinear(const GrayImage& img, double x, double y) {
  const int w = img.width(), h = img.height();
  x = std::clamp(x, 0.0, static_cast<double>(w - 1));
  y = std::clamp(y, 0.0, static_cast<double>(h - 1));
  const int x0 = std::min(static_cast<int>(x), w - 1);
  const int y0 = std::min(static_cast<int>(y), h - 1);
  const int x1 = std::min(x0 + 1, w - 1);
  const int y1 = std::min(y0 + 1, h - 1);
  const float fx = static_cast<float>(x - x0);
  const float fy = static_cast<float>(y - y0);
  const float top = img(x0, y0) + fx * (img(x1, y0) - img(x0, y0));
  const float bottom = img(x0, y1) + fx * (img(x1, y1) - img(x0, y1));
  return top + fy * (bottom - top);
}

Image<std::uint8_t> to_u8(const GrayImage& img) {
  Image<std::uint8_t> out(img.width(), img.height());
  auto src = img.pixels();
  auto dst = out.pixels();
  for (std::size_t i = 0; i < src.size(); ++i) {
    const float v = std::clamp(src[i], 0.0f, 1.0f);
    dst[i] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
  }
  return out;
}

GrayImage from_u8(const Image<std::uint8_t>& img) {
  GrayImage out(img.width(), img.height());
  auto src = img.pixels();
  auto dst = out.pixels();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = static_cast<float>(src[i]) / 255.0f;
  return out;
}

GrayImage normalize_max(const Image<double>& img) {
  GrayImage out(img.width(), img.height());
  double peak = 0.0;
  for (double v : img.pixels()) peak = std::max(peak, v);
  auto src = img.pixels();
  auto dst = out.pixels();
  if (peak <= 0.0) return out;
  for (std::size_t i = 0; i < src.size(); ++i) {
    dst[i] = static_cast<float>(std::max(src[i], 0.0) / peak);
  }
  return out;
}

namespace {

struct PgmHeader {
  int width = 0;
  int height = 0;
  int maxval = 0;
};

PgmHeader read_header(std::istream& in, const std::filesystem::path& path) {
  auto next_token = [&]() {
    std::string tok;
    while (in >> tok) {
      if (tok[0] == '#') {
        std::string rest;
        std::getline(in, rest);
        continue;
      }
      return tok;
    }
    throw Error(Errc::Io, "truncated PGM header in " + path.string());
  };
  if (next_token() != "P5") throw Error(Errc::Io, "not a binary PGM: " + path.string());
  PgmHeader h;
  try {
    h.width = std::stoi(next_token());
    h.height = std::stoi(next_token());
    h.maxval = std::stoi(next_token());
  } catch (const std::logic_error&) {
    throw Error(Errc::Io, "malformed PGM header in " + path.string());
  }
  in.get();  // single whitespace before the raster
  if (h.width <= 0 || h.height <= 0 || h.maxval <= 0 || h.maxval > 65535) {
    throw Error(Errc::Io, "invalid PGM dimensions in " + path.string());
  }
  return h;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  return out;
}

}  // namespace

Image<std::uint8_t> read_pgm8(const std::filesystem::path& path) {
  auto in = open_in(path);
  const PgmHeader h = read_header(in, path);
  if (h.maxval > 255) throw Error(Errc::Io, "expected 8-bit PGM: " + path.string());
  Image<std::uint8_t> img(h.width, h.height);
  in.read(reinterpret_cast<char*>(img.data()), static_cast<std::streamsize>(img.size()));
  if (!in) throw Error(Errc::Io, "truncated PGM raster in " + path.string());
  return img;
}

void write_pgm8(const std::filesystem::path& path, const Image<std::uint8_t>& img) {
  auto out = open_out(path);
  out << "P5\n" << img.width() << ' ' << img.height() << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.data()), static_cast<std::streamsize>(img.size()));
  if (!out) throw Error(Errc::Io, "write failed: " + path.string());
}

Image<std::uint16_t> read_pgm16(const std::filesystem::path& path) {
  auto in = open_in(path);
  const PgmHeader h = read_header(in, path);
  Image<std::uint16_t> img(h.width, h.height);
  std::vector<unsigned char> raw(img.size() * (h.maxval > 255 ? 2 : 1));
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!in) throw Error(Errc::Io, "truncated PGM raster in " + path.string());
  auto dst = img.pixels();
  if (h.maxval > 255) {
    for (std::size_t i = 0; i < dst.size(); ++i) {
      dst[i] = static_cast<std::uint16_t>((raw[2 * i] << 8) | raw[2 * i + 1]);
    }
  } else {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = raw[i];
  }
  return img;
}

void write_pgm16(const std::filesystem::path& path, const Image<std::uint16_t>& img) {
  auto out = open_out(path);
  out << "P5\n" << img.width() << ' ' << img.height() << "\n65535\n";
  std::vector<unsigned char> raw(img.size() * 2);
  auto src = img.pixels();
  for (std::size_t i = 0; i < src.size(); ++i) {
    raw[2 * i] = static_cast<unsigned char>(src[i] >> 8);
    raw[2 * i + 1] = static_cast<unsigned char>(src[i] & 0xff);
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw Error(Errc::Io, "write failed: " + path.string());
}

}  // namespace evio

#include "locrel/image_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <vector>

#include "locrel/error.hpp"

namespace locrel {

namespace {

uint8_t quantize(double v) {
  double s = std::round(v * 255.0);
  if (s < 0.0) s = 0.0;
  if (s > 255.0) s = 255.0;
  return static_cast<uint8_t>(s);
}

std::string lower_ext(const std::string& path) {
  auto dot = path.find_last_of('.');
  if (dot == std::string::npos) return "";
  std::string ext = path.substr(dot + 1);
  for (char& c : ext) c = static_cast<char>(std::tolower(c));
  return ext;
}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

Image load_png(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IoError("cannot open " + path);

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("failed to decode PNG " + path);
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);

  png_uint_32 w = png_get_image_width(png, info);
  png_uint_32 h = png_get_image_height(png, info);
  int color = png_get_color_type(png, info);
  int depth = png_get_bit_depth(png, info);

  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  color = png_get_color_type(png, info);
  const int channels = (color == PNG_COLOR_TYPE_GRAY) ? 1 : 3;
  if (color != PNG_COLOR_TYPE_GRAY && color != PNG_COLOR_TYPE_RGB) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("unsupported PNG color type in " + path);
  }

  std::vector<uint8_t> rowbuf(static_cast<size_t>(w) * channels);
  Image img(static_cast<int>(h), static_cast<int>(w), channels);
  for (png_uint_32 y = 0; y < h; ++y) {
    png_read_row(png, rowbuf.data(), nullptr);
    for (png_uint_32 x = 0; x < w; ++x) {
      for (int c = 0; c < channels; ++c) {
        img.at(c, static_cast<int>(y), static_cast<int>(x)) = rowbuf[x * channels + c] / 255.0;
      }
    }
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

void save_png(const Image& img, const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw IoError("cannot open " + path + " for writing");

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("failed to encode PNG " + path);
  }
  png_init_io(png, fp.get());
  const int color = img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
  png_set_IHDR(png, info, img.width, img.height, 8, color, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  std::vector<uint8_t> rowbuf(static_cast<size_t>(img.width) * img.channels);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < img.channels; ++c) {
        rowbuf[static_cast<size_t>(x) * img.channels + c] = quantize(img.at(c, y, x));
      }
    }
    png_write_row(png, rowbuf.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

// Binary PGM (P5) / PPM (P6), maxval 255.
Image load_pnm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::string magic;
  in >> magic;
  if (magic != "P5" && magic != "P6") throw IoError("unsupported PNM magic in " + path);
  const int channels = magic == "P5" ? 1 : 3;

  auto next_int = [&in, &path]() {
    // Skips whitespace and '#' comments.
    while (true) {
      int c = in.peek();
      if (c == '#') {
        std::string line;
        std::getline(in, line);
      } else if (std::isspace(c)) {
        in.get();
      } else {
        break;
      }
    }
    long v = -1;
    in >> v;
    if (!in || v < 0) throw IoError("malformed PNM header in " + path);
    return v;
  };
  const long w = next_int();
  const long h = next_int();
  const long maxval = next_int();
  if (maxval != 255) throw IoError("only maxval 255 PNM supported: " + path);
  in.get();  // single whitespace after header

  std::vector<uint8_t> buf(static_cast<size_t>(w) * h * channels);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!in) throw IoError("truncated PNM data in " + path);

  Image img(static_cast<int>(h), static_cast<int>(w), channels);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < channels; ++c)
        img.at(c, y, x) = buf[(static_cast<size_t>(y) * w + x) * channels + c] / 255.0;
  return img;
}

void save_pnm(const Image& img, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << (img.channels == 1 ? "P5" : "P6") << "\n" << img.width << " " << img.height << "\n255\n";
  std::vector<uint8_t> buf(img.pixels() * img.channels);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c)
        buf[(static_cast<size_t>(y) * img.width + x) * img.channels + c] = quantize(img.at(c, y, x));
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("short write to " + path);
}

}  // namespace

Image load_image(const std::string& path) {
  const std::string ext = lower_ext(path);
  if (ext == "png") return load_png(path);
  if (ext == "pgm" || ext == "ppm") return load_pnm(path);
  throw IoError("unsupported image extension: " + path);
}

void save_image(const Image& img, const std::string& path) {
  if (img.channels != 1 && img.channels != 3) {
    throw DimensionError("save_image: only 1- or 3-channel images supported");
  }
  const std::string ext = lower_ext(path);
  if (ext == "png") {
    save_png(img, path);
  } else if (ext == "pgm") {
    if (img.channels != 1) throw DimensionError("PGM requires a 1-channel image");
    save_pnm(img, path);
  } else if (ext == "ppm") {
    if (img.channels != 3) throw DimensionError("PPM requires a 3-channel image");
    save_pnm(img, path);
  } else {
    throw IoError("unsupported image extension: " + path);
  }
}

void save_mask_pgm(const Image& mask, const std::string& path) {
  if (mask.channels != 1) throw DimensionError("mask must be single-channel");
  save_pnm(mask, path);
}

Image load_mask_pgm(const std::string& path) {
  Image img = load_pnm(path);
  if (img.channels != 1) throw IoError("mask PGM must be single-channel: " + path);
  for (double& v : img.data) v = v >= 0.5 ? 1.0 : 0.0;
  return img;
}

}  // namespace locrel

#include <png.h>

#include <cctype>
#include <cstring>
#include <fstream>
#include <string>

#include "mrstitch/error.hpp"
#include "mrstitch/image.hpp"

namespace mrstitch {

namespace {

Image load_png(const std::filesystem::path& path, bool alpha_as_mask) {
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str())) {
    throw DecodeError("cannot decode PNG '" + path.string() + "': " + png.message);
  }
  png.format = PNG_FORMAT_RGBA;
  if (png.width == 0 || png.height == 0) {
    png_image_free(&png);
    throw DecodeError("zero-sized image '" + path.string() + "'");
  }
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, buf.data(), 0, nullptr)) {
    throw DecodeError("cannot decode PNG '" + path.string() + "': " + png.message);
  }
  Image img(static_cast<int>(png.width), static_cast<int>(png.height));
  std::size_t i = 0;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x, i += 4) {
      if (alpha_as_mask && buf[i + 3] == 0) {
        img.set_invalid(x, y);
      } else {
        img.set(x, y, {double(buf[i]), double(buf[i + 1]), double(buf[i + 2])});
      }
    }
  }
  return img;
}

// Reads the next whitespace/comment-delimited header token of a PNM file.
std::string pnm_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  return tok;
}

Image load_ppm(std::istream& in, const std::filesystem::path& path) {
  auto fail = [&](const std::string& why) {
    return DecodeError("cannot decode PPM '" + path.string() + "': " + why);
  };
  pnm_token(in);  // magic, already checked
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(pnm_token(in));
    h = std::stoi(pnm_token(in));
    maxval = std::stoi(pnm_token(in));
  } catch (const std::exception&) {
    throw fail("malformed header");
  }
  if (w <= 0 || h <= 0) throw fail("zero dimension");
  if (maxval != 255) throw fail("only maxval 255 is supported");
  std::vector<char> buf(static_cast<std::size_t>(w) * h * 3);
  in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (in.gcount() != static_cast<std::streamsize>(buf.size())) {
    throw fail("truncated pixel data");
  }
  Image img(w, h);
  std::size_t i = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x, i += 3) {
      img.set(x, y,
              {double(static_cast<unsigned char>(buf[i])),
               double(static_cast<unsigned char>(buf[i + 1])),
               double(static_cast<unsigned char>(buf[i + 2]))});
    }
  }
  return img;
}

}  // namespace

Image load_image(const std::filesystem::path& path, bool alpha_as_mask) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DecodeError("cannot open image '" + path.string() + "'");
  unsigned char magic[8] = {};
  in.read(reinterpret_cast<char*>(magic), 8);
  const auto got = in.gcount();
  in.clear();
  in.seekg(0);
  if (got >= 8 && png_sig_cmp(magic, 0, 8) == 0) {
    in.close();
    return load_png(path, alpha_as_mask);
  }
  if (got >= 2 && magic[0] == 'P' && magic[1] == '6') return load_ppm(in, path);
  throw DecodeError("unsupported image format '" + path.string() + "'");
}

void write_png(const std::filesystem::path& path, int width, int height,
               int channels, const std::vector<std::uint8_t>& rows) {
  if (std::filesystem::is_directory(path)) {
    throw IoError("cannot write PNG '" + path.string() + "': is a directory");
  }
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(width);
  png.height = static_cast<png_uint_32>(height);
  png.format = channels == 4 ? PNG_FORMAT_RGBA : PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&png, path.c_str(), 0, rows.data(), 0, nullptr)) {
    throw IoError("cannot write PNG '" + path.string() + "': " + png.message);
  }
}

void write_indexed_png(const std::filesystem::path& path, int width, int height,
                       const std::vector<std::uint8_t>& indices,
                       const std::vector<std::array<std::uint8_t, 3>>& palette) {
  if (std::filesystem::is_directory(path)) {
    throw IoError("cannot write PNG '" + path.string() + "': is a directory");
  }
  if (palette.empty() || palette.size() > 256) {
    throw IoError("cannot write PNG '" + path.string() + "': palette needs 1..256 entries");
  }
  std::vector<std::uint8_t> colormap;
  for (const auto& c : palette) colormap.insert(colormap.end(), c.begin(), c.end());
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(width);
  png.height = static_cast<png_uint_32>(height);
  png.format = PNG_FORMAT_RGB_COLORMAP;
  png.colormap_entries = static_cast<png_uint_32>(palette.size());
  if (!png_image_write_to_file(&png, path.c_str(), 0, indices.data(), 0, colormap.data())) {
    throw IoError("cannot write PNG '" + path.string() + "': " + png.message);
  }
}

void save_image(const Image& img, const std::filesystem::path& path,
                bool mask_as_alpha) {
  if (img.empty()) throw IoError("refusing to save empty image to '" + path.string() + "'");
  const int channels = mask_as_alpha ? 4 : 3;
  std::vector<std::uint8_t> rows(static_cast<std::size_t>(img.width()) *
                                 img.height() * channels);
  std::size_t i = 0;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const bool valid = img.valid(x, y);
      const Color c = valid ? img.at(x, y) : kSentinelColor;
      rows[i++] = quantize(c[0]);
      rows[i++] = quantize(c[1]);
      rows[i++] = quantize(c[2]);
      if (mask_as_alpha) rows[i++] = valid ? 255 : 0;
    }
  }
  write_png(path, img.width(), img.height(), channels, rows);
}

}  // namespace mrstitch

#include "sodbench/image_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "sodbench/error.hpp"

namespace sodbench {

namespace {

using Bytes = std::vector<std::uint8_t>;

std::uint8_t quantize(double v) {
  const long long q = std::llround(v);  // half away from zero
  return static_cast<std::uint8_t>(std::clamp(q, 0LL, 255LL));
}

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, path.string());
  Bytes bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return bytes;
}

void write_file(const std::filesystem::path& path, const Bytes& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::UnwritablePath, path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::UnwritablePath, path.string());
}

// ---------------------------------------------------------------------------
// PNG
// ---------------------------------------------------------------------------

constexpr std::uint8_t kPngSig[8] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};

std::uint32_t be32(const std::uint8_t* p) {
  return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
         (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
}

void put_be32(Bytes& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void put_chunk(Bytes& out, const char type[4], const Bytes& data) {
  put_be32(out, static_cast<std::uint32_t>(data.size()));
  const std::size_t type_at = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data.begin(), data.end());
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, out.data() + type_at, static_cast<uInt>(4 + data.size()));
  put_be32(out, static_cast<std::uint32_t>(crc));
}

struct PngRaster {
  int height = 0;
  int width = 0;
  int channels = 0;  // 1 gray, 2 gray+alpha, 3 rgb, 4 rgba
  Bytes pixels;      // channels interleaved, row-major
};

int paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

PngRaster decode_png(const Bytes& file, const std::string& origin) {
  if (file.size() < 8 + 12 || std::memcmp(file.data(), kPngSig, 8) != 0) {
    throw Error(ErrorCode::CorruptData, origin + ": bad PNG signature");
  }
  std::size_t pos = 8;
  bool have_header = false;
  std::uint32_t width = 0, height = 0;
  int color_type = -1;
  Bytes idat;
  bool done = false;
  while (!done) {
    if (pos + 12 > file.size()) throw Error(ErrorCode::CorruptData, origin + ": truncated chunk");
    const std::uint32_t len = be32(file.data() + pos);
    if (pos + 12 + len > file.size()) {
      throw Error(ErrorCode::CorruptData, origin + ": truncated chunk body");
    }
    const char* type = reinterpret_cast<const char*>(file.data() + pos + 4);
    const std::uint8_t* data = file.data() + pos + 8;
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, file.data() + pos + 4, 4 + len);
    if (static_cast<std::uint32_t>(crc) != be32(file.data() + pos + 8 + len)) {
      throw Error(ErrorCode::CorruptData, origin + ": chunk CRC mismatch");
    }
    if (std::memcmp(type, "IHDR", 4) == 0) {
      if (len != 13) throw Error(ErrorCode::CorruptData, origin + ": bad IHDR");
      width = be32(data);
      height = be32(data + 4);
      const int bit_depth = data[8];
      color_type = data[9];
      const int interlace = data[12];
      if (width == 0 || height == 0) throw Error(ErrorCode::CorruptData, origin + ": zero dims");
      if (bit_depth != 8 || interlace != 0 ||
          (color_type != 0 && color_type != 2 && color_type != 4 && color_type != 6)) {
        throw Error(ErrorCode::UnsupportedFormat,
                    origin + ": only 8-bit non-interlaced gray/RGB(+alpha) PNG supported");
      }
      have_header = true;
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      idat.insert(idat.end(), data, data + len);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      done = true;
    }
    pos += 12 + len;
  }
  if (!have_header || idat.empty()) {
    throw Error(ErrorCode::CorruptData, origin + ": missing IHDR/IDAT");
  }

  const int channels = color_type == 0 ? 1 : color_type == 2 ? 3 : color_type == 4 ? 2 : 4;
  const std::size_t stride = static_cast<std::size_t>(width) * channels;
  const std::size_t raw_size = (stride + 1) * height;
  Bytes raw(raw_size);
  uLongf dest_len = static_cast<uLongf>(raw_size);
  const int zrc = uncompress(raw.data(), &dest_len, idat.data(), static_cast<uLong>(idat.size()));
  if (zrc != Z_OK || dest_len != raw_size) {
    throw Error(ErrorCode::CorruptData, origin + ": zlib inflate failed");
  }

  PngRaster out;
  out.height = static_cast<int>(height);
  out.width = static_cast<int>(width);
  out.channels = channels;
  out.pixels.assign(stride * height, 0);
  const int bpp = channels;  // bytes per pixel at 8-bit depth
  for (std::uint32_t y = 0; y < height; ++y) {
    const std::uint8_t filter = raw[y * (stride + 1)];
    const std::uint8_t* src = raw.data() + y * (stride + 1) + 1;
    std::uint8_t* cur = out.pixels.data() + y * stride;
    const std::uint8_t* up = y > 0 ? out.pixels.data() + (y - 1) * stride : nullptr;
    for (std::size_t i = 0; i < stride; ++i) {
      const int a = i >= static_cast<std::size_t>(bpp) ? cur[i - bpp] : 0;
      const int b = up ? up[i] : 0;
      const int c = (up && i >= static_cast<std::size_t>(bpp)) ? up[i - bpp] : 0;
      int recon;
      switch (filter) {
        case 0: recon = src[i]; break;
        case 1: recon = src[i] + a; break;
        case 2: recon = src[i] + b; break;
        case 3: recon = src[i] + (a + b) / 2; break;
        case 4: recon = src[i] + paeth(a, b, c); break;
        default: throw Error(ErrorCode::CorruptData, origin + ": bad filter byte");
      }
      cur[i] = static_cast<std::uint8_t>(recon & 0xFF);
    }
  }
  return out;
}

Bytes encode_png(int height, int width, int channels, const Bytes& pixels) {
  const std::size_t stride = static_cast<std::size_t>(width) * channels;
  Bytes raw;
  raw.reserve((stride + 1) * height);
  for (int y = 0; y < height; ++y) {
    raw.push_back(0);  // filter: none
    raw.insert(raw.end(), pixels.begin() + y * stride, pixels.begin() + (y + 1) * stride);
  }
  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  Bytes compressed(bound);
  if (compress2(compressed.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK) {
    throw Error(ErrorCode::UnwritablePath, "zlib deflate failed");
  }
  compressed.resize(bound);

  Bytes out(kPngSig, kPngSig + 8);
  Bytes ihdr;
  put_be32(ihdr, static_cast<std::uint32_t>(width));
  put_be32(ihdr, static_cast<std::uint32_t>(height));
  ihdr.push_back(8);                                    // bit depth
  ihdr.push_back(channels == 1 ? 0 : 2);                // gray or rgb
  ihdr.push_back(0);                                    // compression
  ihdr.push_back(0);                                    // filter
  ihdr.push_back(0);                                    // interlace
  put_chunk(out, "IHDR", ihdr);
  put_chunk(out, "IDAT", compressed);
  put_chunk(out, "IEND", {});
  return out;
}

// ---------------------------------------------------------------------------
// PPM / PGM (binary, maxval 255)
// ---------------------------------------------------------------------------

struct PnmRaster {
  int height = 0;
  int width = 0;
  int channels = 0;
  Bytes pixels;
};

// Reads one whitespace/comment-separated token of a PNM header.
bool pnm_token(const Bytes& file, std::size_t& pos, std::string& token) {
  token.clear();
  while (pos < file.size()) {
    char c = static_cast<char>(file[pos]);
    if (c == '#') {
      while (pos < file.size() && file[pos] != '\n') ++pos;
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      ++pos;
    } else {
      break;
    }
  }
  while (pos < file.size() && !std::isspace(static_cast<unsigned char>(file[pos])) ) {
    token.push_back(static_cast<char>(file[pos]));
    ++pos;
  }
  return !token.empty();
}

PnmRaster decode_pnm(const Bytes& file, const std::string& origin) {
  std::size_t pos = 2;
  const int channels = file[1] == '6' ? 3 : 1;
  std::string tok;
  long vals[3];
  for (int i = 0; i < 3; ++i) {
    if (!pnm_token(file, pos, tok)) throw Error(ErrorCode::CorruptData, origin + ": bad PNM header");
    try {
      vals[i] = std::stol(tok);
    } catch (const std::exception&) {
      throw Error(ErrorCode::CorruptData, origin + ": bad PNM header");
    }
  }
  if (vals[0] <= 0 || vals[1] <= 0) throw Error(ErrorCode::CorruptData, origin + ": bad PNM dims");
  if (vals[2] != 255) {
    throw Error(ErrorCode::UnsupportedFormat, origin + ": PNM maxval must be 255");
  }
  ++pos;  // single whitespace after maxval
  PnmRaster out;
  out.width = static_cast<int>(vals[0]);
  out.height = static_cast<int>(vals[1]);
  out.channels = channels;
  const std::size_t need = static_cast<std::size_t>(out.width) * out.height * channels;
  if (file.size() < pos + need) throw Error(ErrorCode::CorruptData, origin + ": truncated PNM data");
  out.pixels.assign(file.begin() + pos, file.begin() + pos + need);
  return out;
}

Bytes encode_pnm(int height, int width, int channels, const Bytes& pixels) {
  std::string header = (channels == 3 ? std::string("P6\n") : std::string("P5\n")) +
                       std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  Bytes out(header.begin(), header.end());
  out.insert(out.end(), pixels.begin(), pixels.end());
  return out;
}

enum class Container { Png, Ppm, Pgm };

Container sniff(const Bytes& file, const std::string& origin) {
  if (file.size() >= 8 && std::memcmp(file.data(), kPngSig, 8) == 0) return Container::Png;
  if (file.size() >= 2 && file[0] == 'P' && file[1] == '6') return Container::Ppm;
  if (file.size() >= 2 && file[0] == 'P' && file[1] == '5') return Container::Pgm;
  throw Error(ErrorCode::UnsupportedFormat, origin + ": not a PNG/PPM/PGM file");
}

Container container_for(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (ext == ".png") return Container::Png;
  if (ext == ".ppm") return Container::Ppm;
  if (ext == ".pgm") return Container::Pgm;
  throw Error(ErrorCode::UnsupportedFormat, path.string() + ": unknown extension for writing");
}

// Decoded 8-bit raster of any supported container.
struct AnyRaster {
  int height = 0, width = 0, channels = 0;
  Bytes pixels;
};

AnyRaster decode_any(const std::filesystem::path& path) {
  const Bytes file = read_file(path);
  const Container c = sniff(file, path.string());
  AnyRaster out;
  if (c == Container::Png) {
    PngRaster png = decode_png(file, path.string());
    out = {png.height, png.width, png.channels, std::move(png.pixels)};
  } else {
    PnmRaster pnm = decode_pnm(file, path.string());
    out = {pnm.height, pnm.width, pnm.channels, std::move(pnm.pixels)};
  }
  return out;
}

// Gray byte of one pixel: native for 1/2-channel data, rounded mean for color.
std::uint8_t gray_byte(const AnyRaster& r, std::size_t p) {
  const std::uint8_t* px = r.pixels.data() + p * r.channels;
  if (r.channels <= 2) return px[0];
  const int sum = int(px[0]) + int(px[1]) + int(px[2]);
  return static_cast<std::uint8_t>((2 * sum + 3) / 6);  // round(sum / 3)
}

}  // namespace

Image load_image(const std::filesystem::path& path) {
  const AnyRaster r = decode_any(path);
  Image img = Image::zeros(r.height, r.width);
  const std::size_t n = img.pixels();
  for (std::size_t p = 0; p < n; ++p) {
    const std::uint8_t* px = r.pixels.data() + p * r.channels;
    if (r.channels <= 2) {
      img.data[p * 3] = img.data[p * 3 + 1] = img.data[p * 3 + 2] = px[0];
    } else {
      img.data[p * 3] = px[0];
      img.data[p * 3 + 1] = px[1];
      img.data[p * 3 + 2] = px[2];
    }
  }
  return img;
}

void save_image(const Image& img, const std::filesystem::path& path) {
  const Container c = container_for(path);
  Bytes bytes;
  if (c == Container::Pgm) {
    Bytes gray(img.pixels());
    for (std::size_t p = 0; p < img.pixels(); ++p) {
      gray[p] = quantize((img.data[p * 3] + img.data[p * 3 + 1] + img.data[p * 3 + 2]) / 3.0);
    }
    bytes = encode_pnm(img.height, img.width, 1, gray);
  } else {
    Bytes rgb(img.entries());
    for (std::size_t i = 0; i < img.entries(); ++i) rgb[i] = quantize(img.data[i]);
    bytes = c == Container::Png ? encode_png(img.height, img.width, 3, rgb)
                                : encode_pnm(img.height, img.width, 3, rgb);
  }
  write_file(path, bytes);
}

BinaryMask load_mask(const std::filesystem::path& path) {
  const AnyRaster r = decode_any(path);
  BinaryMask mask = BinaryMask::zeros(r.height, r.width);
  for (std::size_t p = 0; p < mask.pixels(); ++p) {
    mask.data[p] = gray_byte(r, p) >= 128 ? 1 : 0;
  }
  return mask;
}

void save_mask(const BinaryMask& mask, const std::filesystem::path& path) {
  Bytes gray(mask.pixels());
  for (std::size_t p = 0; p < mask.pixels(); ++p) gray[p] = mask.data[p] ? 255 : 0;
  const Container c = container_for(path);
  Bytes bytes = c == Container::Png ? encode_png(mask.height, mask.width, 1, gray)
                                    : encode_pnm(mask.height, mask.width, 1, gray);
  write_file(path, bytes);
}

void save_saliency(const SaliencyMap& map, const std::filesystem::path& path) {
  Bytes gray(map.pixels());
  for (std::size_t p = 0; p < map.pixels(); ++p) gray[p] = quantize(map.data[p] * 255.0);
  const Container c = container_for(path);
  Bytes bytes = c == Container::Png ? encode_png(map.height, map.width, 1, gray)
                                    : encode_pnm(map.height, map.width, 1, gray);
  write_file(path, bytes);
}

SaliencyMap load_saliency(const std::filesystem::path& path) {
  const AnyRaster r = decode_any(path);
  SaliencyMap map = SaliencyMap::zeros(r.height, r.width);
  for (std::size_t p = 0; p < map.pixels(); ++p) {
    map.data[p] = gray_byte(r, p) / 255.0;
  }
  return map;
}

std::pair<int, int> probe_dims(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, path.string());
  Bytes head(512);
  in.read(reinterpret_cast<char*>(head.data()), static_cast<std::streamsize>(head.size()));
  head.resize(static_cast<std::size_t>(in.gcount()));
  const Container c = sniff(head, path.string());
  if (c == Container::Png) {
    if (head.size() < 8 + 8 + 13) throw Error(ErrorCode::CorruptData, path.string() + ": truncated IHDR");
    return {static_cast<int>(be32(head.data() + 16 + 4)), static_cast<int>(be32(head.data() + 16))};
  }
  std::size_t pos = 2;
  std::string w, h;
  if (!pnm_token(head, pos, w) || !pnm_token(head, pos, h)) {
    throw Error(ErrorCode::CorruptData, path.string() + ": bad PNM header");
  }
  return {std::stoi(h), std::stoi(w)};
}

}  // namespace sodbench

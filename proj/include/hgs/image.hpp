#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace hgs {

// Interleaved row-major image, arbitrary channel count.
template <class S>
struct Image {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<S> data;

  Image() = default;
  Image(int w, int h, int c, S fill = S(0))
      : width(w), height(h), channels(c),
        data(static_cast<size_t>(w) * h * c, fill) {}

  S& at(int x, int y, int c) {
    return data[(static_cast<size_t>(y) * width + x) * channels + c];
  }
  S at(int x, int y, int c) const {
    return data[(static_cast<size_t>(y) * width + x) * channels + c];
  }

  bool same_shape(const Image& other) const {
    return width == other.width && height == other.height &&
           channels == other.channels;
  }

  template <class T>
  Image<T> cast() const {
    Image<T> out(width, height, channels);
    for (size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<T>(data[i]);
    return out;
  }
};

using ImageBuffer = Image<float>;

template <class S>
void require_same_shape(const Image<S>& a, const Image<S>& b, const char* what) {
  if (!a.same_shape(b))
    throw std::invalid_argument(std::string(what) + ": image shapes differ");
}

}  // namespace hgs

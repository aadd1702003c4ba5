#pragma once

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace cslidar {

// Row-major grayscale image of nonnegative-or-signed intensities.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<double> data;

    Image() = default;
    Image(int w, int h, double fill = 0.0) : width(w), height(h) {
        if (w <= 0 || h <= 0) throw std::invalid_argument("Image: dimensions must be positive");
        data.assign(static_cast<std::size_t>(w) * h, fill);
    }

    std::size_t size() const { return data.size(); }

    double& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
    double at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }

    double max_value() const {
        return data.empty() ? 0.0 : *std::max_element(data.begin(), data.end());
    }
};

} // namespace cslidar

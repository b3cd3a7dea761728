#include "fpd/image_io.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

namespace fpd {

Image load_image(const std::string& path) {
  cv::Mat mat = cv::imread(path, cv::IMREAD_COLOR);
  if (mat.empty()) throw IoError("load_image: cannot read " + path);
  Image img = Image::filled(mat.rows, mat.cols);
  for (int y = 0; y < mat.rows; ++y) {
    const cv::Vec3b* row = mat.ptr<cv::Vec3b>(y);
    for (int x = 0; x < mat.cols; ++x) {
      img.at(0, y, x) = row[x][2] / 255.0f;  // OpenCV stores BGR
      img.at(1, y, x) = row[x][1] / 255.0f;
      img.at(2, y, x) = row[x][0] / 255.0f;
    }
  }
  return img;
}

void save_image(const std::string& path, const Image& img) {
  cv::Mat mat(img.height, img.width, CV_8UC3);
  for (int y = 0; y < img.height; ++y) {
    cv::Vec3b* row = mat.ptr<cv::Vec3b>(y);
    for (int x = 0; x < img.width; ++x) {
      auto to_byte = [](float v) {
        return static_cast<uchar>(std::clamp(v, 0.0f, 1.0f) * 255.0f + 0.5f);
      };
      row[x] = cv::Vec3b(to_byte(img.at(2, y, x)), to_byte(img.at(1, y, x)),
                         to_byte(img.at(0, y, x)));
    }
  }
  if (!cv::imwrite(path, mat)) throw IoError("save_image: cannot write " + path);
}

}  // namespace fpd

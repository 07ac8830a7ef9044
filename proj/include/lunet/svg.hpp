#pragma once

#include <string>
#include <vector>

namespace lunet::svg {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

struct LineChart {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  bool reverse_x = false;  // e.g. channels remaining counting down
  int width = 640;
  int height = 400;
};

std::string render(const LineChart& chart);

}  // namespace lunet::svg

#include "dgstgcn/tensor.hpp"

#include <sstream>

namespace dgstgcn {

std::string shape_string(const Shape &shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

AxisSplit split_at_axis(const Shape &shape, Index axis) {
  const auto rank = static_cast<Index>(shape.size());
  if (axis < 0) axis += rank;
  if (axis < 0 || axis >= rank)
    throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " + shape_string(shape));
  AxisSplit s{1, shape[static_cast<std::size_t>(axis)], 1};
  for (Index i = 0; i < axis; ++i) s.outer *= shape[static_cast<std::size_t>(i)];
  for (Index i = axis + 1; i < rank; ++i) s.inner *= shape[static_cast<std::size_t>(i)];
  return s;
}

} // namespace dgstgcn

#include "vlp/learn/matrix.hpp"

#include <stdexcept>

namespace vlp::learn {

void FeatureMatrix::append_row(std::span<const double> values) {
    if (values.size() != cols_) throw std::invalid_argument("row width does not match the matrix");
    data_.insert(data_.end(), values.begin(), values.end());
    ++rows_;
}

}  // namespace vlp::learn

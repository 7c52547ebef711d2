#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "gmmsum/error.hpp"

namespace gmmsum {

// n points of dimension d stored row-major.
class PointSet {
public:
    PointSet() = default;
    explicit PointSet(std::size_t dim) : dim_(dim) {}
    PointSet(std::size_t dim, std::vector<double> values) : dim_(dim), values_(std::move(values)) {
        if (dim_ == 0 || values_.size() % dim_ != 0) throw DimensionMismatch("point values are not a multiple of the dimension");
    }

    std::size_t size() const { return dim_ == 0 ? 0 : values_.size() / dim_; }
    bool empty() const { return values_.empty(); }
    std::size_t dim() const { return dim_; }

    std::span<const double> operator[](std::size_t i) const { return {values_.data() + i * dim_, dim_}; }
    std::span<const double> values() const { return values_; }

    void reserve(std::size_t n) { values_.reserve(n * dim_); }
    void push_back(std::span<const double> point) {
        if (point.size() != dim_) throw DimensionMismatch("point dimension does not match the set");
        values_.insert(values_.end(), point.begin(), point.end());
    }

    bool operator==(const PointSet&) const = default;

private:
    std::size_t dim_ = 0;
    std::vector<double> values_;
};

}  // namespace gmmsum

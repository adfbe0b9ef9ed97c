#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "graphdoc/error.hpp"

namespace graphdoc {

/// Dense row-major tensor of doubles. Rank is 1 or 2 everywhere in this
/// project; shape is kept generic so the invariant product(shape) == size
/// stays checkable.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;

    static Tensor zeros(std::vector<std::size_t> shape) {
        Tensor t;
        std::size_t n = 1;
        for (std::size_t d : shape) n *= d;
        t.shape = std::move(shape);
        t.data.assign(n, 0.0);
        return t;
    }

    static Tensor full(std::vector<std::size_t> shape, double v) {
        Tensor t = zeros(std::move(shape));
        for (double& x : t.data) x = v;
        return t;
    }

    static Tensor vec(std::initializer_list<double> xs) {
        Tensor t;
        t.shape = {xs.size()};
        t.data.assign(xs.begin(), xs.end());
        return t;
    }

    static Tensor mat(std::initializer_list<std::initializer_list<double>> rows) {
        Tensor t;
        std::size_t r = rows.size();
        std::size_t c = r == 0 ? 0 : rows.begin()->size();
        t.shape = {r, c};
        t.data.reserve(r * c);
        for (const auto& row : rows) {
            if (row.size() != c) throw dim_error("Tensor::mat: ragged rows");
            t.data.insert(t.data.end(), row.begin(), row.end());
        }
        return t;
    }

    std::size_t size() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }

    // Row/column view of a rank-1 tensor treats it as a single row.
    std::size_t rows() const { return rank() == 1 ? 1 : shape.at(0); }
    std::size_t cols() const { return rank() == 1 ? shape.at(0) : shape.at(1); }

    double& at(std::size_t i) { return data[i]; }
    double at(std::size_t i) const { return data[i]; }
    double& at(std::size_t i, std::size_t j) { return data[i * cols() + j]; }
    double at(std::size_t i, std::size_t j) const { return data[i * cols() + j]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    bool finite() const {
        for (double x : data)
            if (!std::isfinite(x)) return false;
        return true;
    }

    std::string shape_str() const {
        std::string s = "[";
        for (std::size_t i = 0; i < shape.size(); ++i) {
            if (i) s += "x";
            s += std::to_string(shape[i]);
        }
        return s + "]";
    }
};

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* where) {
    if (!a.same_shape(b))
        throw dim_error(std::string(where) + ": shape mismatch " + a.shape_str() + " vs " +
                        b.shape_str());
}

} // namespace graphdoc

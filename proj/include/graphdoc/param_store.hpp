#pragma once

#include <map>
#include <string>

#include "graphdoc/rng.hpp"
#include "graphdoc/tensor.hpp"

namespace graphdoc {

/// Named parameter map. std::map gives the deterministic lexicographic
/// iteration order that the optimizer and checkpoint writer rely on.
struct ParamStore {
    std::map<std::string, Tensor> values;
    std::map<std::string, Tensor> grads;

    bool has(const std::string& path) const { return values.count(path) != 0; }

    Tensor& value(const std::string& path) {
        auto it = values.find(path);
        if (it == values.end()) throw data_error("ParamStore: unknown parameter " + path);
        return it->second;
    }

    const Tensor& value(const std::string& path) const {
        auto it = values.find(path);
        if (it == values.end()) throw data_error("ParamStore: unknown parameter " + path);
        return it->second;
    }

    void add(const std::string& path, Tensor t) {
        if (has(path)) throw data_error("ParamStore: duplicate parameter " + path);
        values.emplace(path, std::move(t));
    }

    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialization.
    void add_uniform(const std::string& path, std::vector<std::size_t> shape,
                     std::size_t fan_in, Rng& rng) {
        Tensor t = Tensor::zeros(std::move(shape));
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (double& x : t.data) x = rng.uniform(-bound, bound);
        add(path, std::move(t));
    }

    void add_zeros(const std::string& path, std::vector<std::size_t> shape) {
        add(path, Tensor::zeros(std::move(shape)));
    }

    std::size_t total_size() const {
        std::size_t n = 0;
        for (const auto& [path, t] : values) n += t.size();
        return n;
    }
};

} // namespace graphdoc

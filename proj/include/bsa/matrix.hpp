// Copyright (C) 2026 The BSA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "bsa/errors.hpp"

namespace bsa {

/// Dense row-major matrix. Rows are tokens (or blocks), columns are channels.
template <typename T>
class BasicMatrix {
public:
    using value_type = T;

    BasicMatrix() = default;
    BasicMatrix(std::size_t rows, std::size_t cols, T fill = T{})
        : m_rows(rows),
          m_cols(cols),
          m_data(rows * cols, fill) {}
    BasicMatrix(std::size_t rows, std::size_t cols, std::vector<T> data)
        : m_rows(rows),
          m_cols(cols),
          m_data(std::move(data)) {
        if (m_data.size() != rows * cols) {
            throw InvalidShape("matrix data size does not match rows*cols");
        }
    }

    std::size_t rows() const noexcept { return m_rows; }
    std::size_t cols() const noexcept { return m_cols; }
    std::size_t size() const noexcept { return m_data.size(); }
    bool empty() const noexcept { return m_data.empty(); }

    std::span<T> row(std::size_t i) noexcept { return {m_data.data() + i * m_cols, m_cols}; }
    std::span<const T> row(std::size_t i) const noexcept { return {m_data.data() + i * m_cols, m_cols}; }

    T& operator()(std::size_t i, std::size_t j) noexcept { return m_data[i * m_cols + j]; }
    const T& operator()(std::size_t i, std::size_t j) const noexcept { return m_data[i * m_cols + j]; }

    std::span<T> data() noexcept { return m_data; }
    std::span<const T> data() const noexcept { return m_data; }

    bool operator==(const BasicMatrix&) const = default;

private:
    std::size_t m_rows = 0;
    std::size_t m_cols = 0;
    std::vector<T> m_data;
};

using Matrix = BasicMatrix<float>;
using MatrixD = BasicMatrix<double>;

}  // namespace bsa

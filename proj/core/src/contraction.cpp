#include "tnsupernet/contraction.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "tnsupernet/errors.hpp"

namespace tnsupernet {

namespace {

std::vector<std::size_t> merge_sorted(const std::vector<std::size_t>& a,
                                      const std::vector<std::size_t>& b) {
  std::vector<std::size_t> out;
  out.reserve(a.size() + b.size());
  std::set_union(a.begin(), a.end(), b.begin(), b.end(),
                 std::back_inserter(out));
  return out;
}

}  // namespace

Contractor::Contractor(std::span<const std::size_t> ranks,
                       std::uint64_t factor_cap)
    : ranks_(ranks.begin(), ranks.end()), factor_cap_(factor_cap) {}

Factor Contractor::multiply(std::span<const Factor* const> factors,
                            const std::vector<std::size_t>& out_vars,
                            std::size_t eliminated,
                            bool has_eliminated) const {
  std::vector<std::size_t> loop_vars = out_vars;
  if (has_eliminated) loop_vars = merge_sorted(out_vars, {eliminated});
  const std::size_t k = loop_vars.size();

  std::uint64_t total = 1;
  std::vector<std::size_t> dims(k);
  for (std::size_t i = 0; i < k; ++i) {
    dims[i] = ranks_[loop_vars[i]];
    total *= dims[i];
    if (total > factor_cap_) {
      throw CapExceeded("contraction intermediate exceeds factor cap " +
                        std::to_string(factor_cap_));
    }
  }

  // Per-factor strides aligned to loop_vars (0 where a factor lacks a var).
  const std::size_t nf = factors.size();
  std::vector<std::size_t> strides(nf * k, 0);
  for (std::size_t f = 0; f < nf; ++f) {
    const auto& vars = factors[f]->vars;
    std::size_t stride = 1;
    for (std::size_t j = vars.size(); j-- > 0;) {
      auto pos = std::lower_bound(loop_vars.begin(), loop_vars.end(), vars[j]);
      strides[f * k + static_cast<std::size_t>(pos - loop_vars.begin())] =
          stride;
      stride *= ranks_[vars[j]];
    }
  }
  std::vector<std::size_t> out_strides(k, 0);
  {
    std::size_t stride = 1;
    for (std::size_t i = k; i-- > 0;) {
      if (has_eliminated && loop_vars[i] == eliminated) continue;
      out_strides[i] = stride;
      stride *= dims[i];
    }
  }

  Factor out;
  out.vars = out_vars;
  std::size_t out_size = 1;
  for (auto v : out_vars) out_size *= ranks_[v];
  out.values.assign(out_size, 0.0);

  std::vector<std::size_t> counter(k, 0);
  std::vector<std::size_t> offset(nf, 0);
  std::size_t out_offset = 0;
  for (std::uint64_t step = 0; step < total; ++step) {
    double product = 1.0;
    for (std::size_t f = 0; f < nf; ++f) product *= factors[f]->values[offset[f]];
    out.values[out_offset] += product;

    for (std::size_t i = k; i-- > 0;) {
      if (++counter[i] < dims[i]) {
        for (std::size_t f = 0; f < nf; ++f) offset[f] += strides[f * k + i];
        out_offset += out_strides[i];
        break;
      }
      const std::size_t back = dims[i] - 1;
      counter[i] = 0;
      for (std::size_t f = 0; f < nf; ++f) offset[f] -= back * strides[f * k + i];
      out_offset -= back * out_strides[i];
    }
  }
  return out;
}

Factor Contractor::contract(std::vector<Factor> factors,
                            std::vector<std::size_t> keep) const {
  std::sort(keep.begin(), keep.end());
  keep.erase(std::unique(keep.begin(), keep.end()), keep.end());

  std::vector<bool> kept(ranks_.size(), false);
  for (auto v : keep) kept[v] = true;

  std::vector<bool> present(ranks_.size(), false);
  for (const auto& f : factors) {
    for (auto v : f.vars) present[v] = true;
  }

  // Summing a variable no factor touches multiplies by its rank.
  double scale = 1.0;
  for (std::size_t n = 0; n < ranks_.size(); ++n) {
    if (!present[n] && !kept[n]) scale *= static_cast<double>(ranks_[n]);
  }

  std::vector<std::size_t> pending;
  for (std::size_t n = 0; n < ranks_.size(); ++n) {
    if (present[n] && !kept[n]) pending.push_back(n);
  }

  while (!pending.empty()) {
    std::size_t best_pos = 0;
    std::uint64_t best_size = std::numeric_limits<std::uint64_t>::max();
    std::vector<std::size_t> best_vars;
    for (std::size_t p = 0; p < pending.size(); ++p) {
      const std::size_t var = pending[p];
      std::vector<std::size_t> vars;
      for (const auto& f : factors) {
        if (std::binary_search(f.vars.begin(), f.vars.end(), var)) {
          vars = merge_sorted(vars, f.vars);
        }
      }
      std::uint64_t size = 1;
      for (auto v : vars) {
        if (v != var) size *= ranks_[v];
      }
      if (size < best_size) {
        best_size = size;
        best_pos = p;
        best_vars = std::move(vars);
      }
    }
    const std::size_t var = pending[best_pos];
    pending.erase(pending.begin() + static_cast<std::ptrdiff_t>(best_pos));

    std::vector<Factor> rest;
    std::vector<const Factor*> touching;
    std::vector<Factor> touched_storage;
    for (auto& f : factors) {
      if (std::binary_search(f.vars.begin(), f.vars.end(), var)) {
        touched_storage.push_back(std::move(f));
      } else {
        rest.push_back(std::move(f));
      }
    }
    for (const auto& f : touched_storage) touching.push_back(&f);
    std::vector<std::size_t> out_vars;
    for (auto v : best_vars) {
      if (v != var) out_vars.push_back(v);
    }
    rest.push_back(multiply(touching, out_vars, var, true));
    factors = std::move(rest);
  }

  std::vector<const Factor*> all;
  for (const auto& f : factors) all.push_back(&f);
  Factor out = multiply(all, keep, 0, false);
  if (scale != 1.0) {
    for (auto& x : out.values) x *= scale;
  }
  return out;
}

double Contractor::contract_all(std::vector<Factor> factors) const {
  return contract(std::move(factors), {}).values.front();
}

}  // namespace tnsupernet

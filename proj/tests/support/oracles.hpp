#pragma once

// Independent reference computations used by the tests. Nothing here calls
// into the engine's kernels; everything is written out with plain loops in
// double or long double so a shared bug cannot hide on both sides.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "duolens/encoder.hpp"
#include "duolens/fusion.hpp"
#include "duolens/tokenizer.hpp"

namespace oracle {

using Matrix = std::vector<std::vector<double>>;

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  const std::size_t m = a.size(), k = b.size(), n = b.front().size();
  Matrix c(m, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t t = 0; t < k; ++t) c[i][j] += a[i][t] * b[t][j];
  return c;
}

inline std::vector<long double> softmax(const std::vector<long double>& x) {
  long double mx = x[0];
  for (auto v : x) mx = std::max(mx, v);
  long double s = 0;
  std::vector<long double> out;
  for (auto v : x) s += std::exp(v - mx);
  for (auto v : x) out.push_back(std::exp(v - mx) / s);
  return out;
}

inline long double gelu(long double x) { return 0.5L * x * (1.0L + std::erf(x / std::sqrt(2.0L))); }

inline std::vector<long double> layer_norm(const std::vector<long double>& x, long double eps) {
  long double mean = 0;
  for (auto v : x) mean += v;
  mean /= static_cast<long double>(x.size());
  long double var = 0;
  for (auto v : x) var += (v - mean) * (v - mean);
  var /= static_cast<long double>(x.size());
  std::vector<long double> out;
  for (auto v : x) out.push_back((v - mean) / std::sqrt(var + eps));
  return out;
}

// All-pairs AUROC: a positive above a negative counts 1, a tie counts 1/2.
inline double auroc_pairs(const std::vector<double>& s, const std::vector<int>& y) {
  long double wins = 0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (y[i] != 1) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j] != 0) continue;
      ++pairs;
      wins += s[i] > s[j] ? 1.0L : (s[i] == s[j] ? 0.5L : 0.0L);
    }
  }
  return static_cast<double>(wins / static_cast<long double>(pairs));
}

inline long double bce_weighted(const std::vector<double>& z, const std::vector<int>& y, long double w0,
                                long double w1) {
  long double total = 0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    // -log p = log(1 + e^-z) and -log(1 - p) = log(1 + e^z), written without cancellation.
    const long double zi = z[i];
    total += y[i] == 1 ? w1 * std::log1p(std::exp(-zi)) : w0 * std::log1p(std::exp(zi));
  }
  return total / static_cast<long double>(z.size());
}

// Straight-line encoder forward over one unpadded input, in double.
inline Matrix encoder_forward(const duolens::EncoderModel& m, const std::vector<std::uint32_t>& ids) {
  const auto& c = m.config();
  const std::size_t n = ids.size(), d = c.hidden, heads = c.heads, dh = d / heads;
  auto P = [&](const std::string& name, std::size_t r, std::size_t col) {
    const auto& t = m.param(name);
    return t.rank() == 1 ? static_cast<double>(t.data()[r]) : static_cast<double>(t.data()[r * t.dim(1) + col]);
  };
  auto ln = [&](Matrix x, const std::string& pre) {
    for (auto& row : x) {
      double mean = 0, var = 0;
      for (double v : row) mean += v;
      mean /= double(d);
      for (double v : row) var += (v - mean) * (v - mean);
      var /= double(d);
      for (std::size_t k = 0; k < d; ++k) {
        row[k] = (row[k] - mean) / std::sqrt(var + double(c.layer_norm_eps)) * P(pre + ".gamma", k, 0) +
                 P(pre + ".beta", k, 0);
      }
    }
    return x;
  };
  auto lin = [&](const Matrix& x, const std::string& w, const std::string& b, std::size_t out) {
    Matrix y(x.size(), std::vector<double>(out, 0.0));
    for (std::size_t i = 0; i < x.size(); ++i) {
      for (std::size_t o = 0; o < out; ++o) {
        double s = P(b, o, 0);
        for (std::size_t k = 0; k < x[i].size(); ++k) s += P(w, o, k) * x[i][k];
        y[i][o] = s;
      }
    }
    return y;
  };
  Matrix x(n, std::vector<double>(d));
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t k = 0; k < d; ++k)
      x[t][k] = P("embed.word", ids[t], k) + P("embed.pos", t + c.position_offset, k) + P("embed.type", 0, k);
  x = ln(x, "embed.ln");
  for (std::uint32_t li = 0; li < c.layers; ++li) {
    const std::string l = "layer." + std::to_string(li) + ".";
    const Matrix q = lin(x, l + "attn.q.w", l + "attn.q.b", d);
    const Matrix k = lin(x, l + "attn.k.w", l + "attn.k.b", d);
    const Matrix v = lin(x, l + "attn.v.w", l + "attn.v.b", d);
    Matrix ctx(n, std::vector<double>(d, 0.0));
    for (std::size_t h = 0; h < heads; ++h) {
      for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> s(n);
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < n; ++j) {
          double dot = 0;
          for (std::size_t e = 0; e < dh; ++e) dot += q[i][h * dh + e] * k[j][h * dh + e];
          s[j] = dot / std::sqrt(double(dh));
          mx = std::max(mx, s[j]);
        }
        double sum = 0;
        for (auto& sj : s) sum += (sj = std::exp(sj - mx));
        for (std::size_t j = 0; j < n; ++j)
          for (std::size_t e = 0; e < dh; ++e) ctx[i][h * dh + e] += s[j] / sum * v[j][h * dh + e];
      }
    }
    const Matrix o = lin(ctx, l + "attn.o.w", l + "attn.o.b", d);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t e = 0; e < d; ++e) x[i][e] += o[i][e];
    x = ln(x, l + "attn.ln");
    Matrix hdn = lin(x, l + "ffn.w1", l + "ffn.b1", c.ffn);
    for (auto& row : hdn)
      for (auto& vv : row) vv = 0.5 * vv * (1.0 + std::erf(vv / std::sqrt(2.0)));
    const Matrix f = lin(hdn, l + "ffn.w2", l + "ffn.b2", d);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t e = 0; e < d; ++e) x[i][e] += f[i][e];
    x = ln(x, l + "ffn.ln");
  }
  return x;
}

// Fusion-head loss written from the formula, over f64 parameters laid out in
// FusionHead::parameters() order.
struct HeadLoss {
  std::size_t da, db, df;
  std::vector<std::vector<double>> ha, hb;
  std::vector<int> y;
  double w0, w1;

  double operator()(const std::vector<std::vector<double>>& p) const {
    const auto &Wa = p[0], &ba = p[1], &Wb = p[2], &bb = p[3], &Wg = p[4], &bg = p[5], &w = p[6], &b = p[7];
    double total = 0;
    for (std::size_t s = 0; s < y.size(); ++s) {
      double z = b[0];
      for (std::size_t i = 0; i < df; ++i) {
        double g = bg[i], pa = ba[i], pb = bb[i];
        for (std::size_t k = 0; k < da; ++k) {
          g += Wg[i * (da + db) + k] * ha[s][k];
          pa += Wa[i * da + k] * ha[s][k];
        }
        for (std::size_t k = 0; k < db; ++k) {
          g += Wg[i * (da + db) + da + k] * hb[s][k];
          pb += Wb[i * db + k] * hb[s][k];
        }
        g = 1.0 / (1.0 + std::exp(-g));
        z += w[i] * (g * pa + (1.0 - g) * pb);
      }
      const double lp = y[s] == 1 ? -std::log1p(std::exp(-z)) : -std::log1p(std::exp(z));
      total += -(y[s] == 1 ? w1 : w0) * lp;
    }
    return total / double(y.size());
  }
};

// Central differences in f64 of `loss` with respect to every entry of `p`.
template <class Loss>
std::vector<std::vector<double>> finite_differences(const Loss& loss, std::vector<std::vector<double>> p,
                                                    double step = 1e-4) {
  std::vector<std::vector<double>> g(p.size());
  for (std::size_t t = 0; t < p.size(); ++t) {
    g[t].resize(p[t].size());
    for (std::size_t i = 0; i < p[t].size(); ++i) {
      const double keep = p[t][i];
      p[t][i] = keep + step;
      const double up = loss(p);
      p[t][i] = keep - step;
      const double down = loss(p);
      p[t][i] = keep;
      g[t][i] = (up - down) / (2.0 * step);
    }
  }
  return g;
}

// Relative error with a small floor so exactly-zero gradients compare sanely.
inline double rel_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

// Best segmentation by enumerating every split of `chars`, using the same
// preference order as the tokenizer: higher score, then fewer pieces, then the
// lexicographically smaller first piece (compared piece by piece).
struct Segmentation {
  double score = -std::numeric_limits<double>::infinity();
  std::vector<std::string> pieces;
  bool found = false;
};

inline Segmentation exhaustive_unigram(const std::vector<std::string>& chars,
                                       const std::vector<std::pair<std::string, double>>& pieces) {
  Segmentation best;
  const std::size_t n = chars.size();
  if (n == 0) {
    best.score = 0;
    best.found = true;
    return best;
  }
  // Bit i of mask set => a cut after character i.
  for (std::uint64_t mask = 0; mask < (1ull << (n - 1)); ++mask) {
    std::vector<std::string> segs;
    std::string cur;
    for (std::size_t i = 0; i < n; ++i) {
      cur += chars[i];
      if (i + 1 == n || (mask >> i) & 1) {
        segs.push_back(cur);
        cur.clear();
      }
    }
    double score = 0;
    bool ok = true;
    for (const auto& sgm : segs) {
      auto it = std::find_if(pieces.begin(), pieces.end(), [&](const auto& p) { return p.first == sgm; });
      if (it == pieces.end()) {
        ok = false;
        break;
      }
      score += it->second;
    }
    if (!ok) continue;
    const bool better = !best.found || score > best.score ||
                        (score == best.score && (segs.size() < best.pieces.size() ||
                                                 (segs.size() == best.pieces.size() && segs < best.pieces)));
    if (better) best = {score, segs, true};
  }
  return best;
}

}  // namespace oracle

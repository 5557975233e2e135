#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace qpspec {

/// Shape of a piece on [0, duration).
struct PieceProfile {
  enum class Kind { constant, raised_cosine, step };

  Kind kind = Kind::constant;
  double mid = 0.0;  // constant value, or raised-cosine midpoint
  double amp = 0.0;  // raised-cosine amplitude
  std::vector<double> breaks;  // step: interior breakpoints as fractions of the duration
  std::vector<double> values;  // step: breaks.size() + 1 values
  bool reflected = false;

  static PieceProfile constant(double v) {
    PieceProfile p;
    p.mid = v;
    return p;
  }
  static PieceProfile raised_cosine(double mid, double amp) {
    PieceProfile p;
    p.kind = Kind::raised_cosine;
    p.mid = mid;
    p.amp = amp;
    return p;
  }
  static PieceProfile step(std::vector<double> breaks, std::vector<double> values) {
    detail::require(values.size() == breaks.size() + 1, "step profile: need breaks+1 values");
    PieceProfile p;
    p.kind = Kind::step;
    p.breaks = std::move(breaks);
    p.values = std::move(values);
    return p;
  }

  double value(double t, double duration) const {
    if (reflected) t = duration - t;
    switch (kind) {
      case Kind::constant: return mid;
      case Kind::raised_cosine:
        return mid + amp * (0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * t / duration)) - 0.5);
      case Kind::step: {
        const double u = t / duration;
        const auto it = std::upper_bound(breaks.begin(), breaks.end(), u);
        return values[static_cast<std::size_t>(it - breaks.begin())];
      }
    }
    return 0.0;
  }
};

struct Piece {
  int id = 0;
  double duration = 1.0;
  PieceProfile profile;

  double value(double t) const { return profile.value(t, duration); }
};

namespace detail {

inline constexpr int kInternGrid = 256;
inline constexpr double kInternTol = 1e-12;

inline bool same_function(const Piece& a, const Piece& b) {
  if (std::abs(a.duration - b.duration) > kInternTol) return false;
  for (int i = 0; i < kInternGrid; ++i) {
    const double t = a.duration * (static_cast<double>(i) + 0.5) / kInternGrid;
    if (std::abs(a.value(t) - b.value(t)) > kInternTol) return false;
  }
  return true;
}

}  // namespace detail

/// Finite alphabet of pieces; equality is decided once, at interning time.
class Alphabet {
 public:
  /// Returns the id of an existing piece that agrees on the 256-point grid, or a new id.
  int intern(double duration, PieceProfile profile) {
    detail::require(duration > 0.0 && std::isfinite(duration), "piece duration must be positive");
    Piece cand{static_cast<int>(pieces_.size()), duration, std::move(profile)};
    for (const auto& p : pieces_)
      if (detail::same_function(p, cand)) return p.id;
    pieces_.push_back(std::move(cand));
    return pieces_.back().id;
  }

  /// Appends without comparison; the caller guarantees distinctness.
  int push_unchecked(double duration, PieceProfile profile) {
    detail::require(duration > 0.0 && std::isfinite(duration), "piece duration must be positive");
    pieces_.push_back(Piece{static_cast<int>(pieces_.size()), duration, std::move(profile)});
    return pieces_.back().id;
  }

  std::size_t size() const { return pieces_.size(); }
  const Piece& operator[](int id) const { return pieces_.at(static_cast<std::size_t>(id)); }
  const std::vector<Piece>& pieces() const { return pieces_; }

 private:
  std::vector<Piece> pieces_;
};

/// Concatenation W_1 | W_2 | ... over a finite alphabet, placed at x0 = start_offset.
struct PieceSequence {
  Alphabet alphabet;
  std::vector<int> symbols;
  double start_offset = 0.0;

  double duration(std::size_t i) const { return alphabet[symbols[i]].duration; }

  double total_length() const {
    double s = 0.0;
    for (int id : symbols) s += alphabet[id].duration;
    return s;
  }

  bool valid() const {
    return std::all_of(symbols.begin(), symbols.end(), [&](int id) {
      return id >= 0 && static_cast<std::size_t>(id) < alphabet.size();
    });
  }
};

/// Evaluator for a concatenation: piece j is shifted by the sum of preceding durations.
class Concatenation {
 public:
  explicit Concatenation(const PieceSequence& seq) : seq_(&seq) {
    detail::require(seq.valid(), "concatenate: symbol outside the alphabet");
    starts_.reserve(seq.symbols.size() + 1);
    // Neumaier summation: long runs of equal durations otherwise drift systematically.
    double acc = 0.0, comp = 0.0;
    for (int id : seq.symbols) {
      starts_.push_back(acc + comp);
      const double d = seq.alphabet[id].duration;
      const double t = acc + d;
      comp += std::abs(acc) >= std::abs(d) ? (acc - t) + d : (d - t) + acc;
      acc = t;
    }
    starts_.push_back(acc + comp);
  }

  double total_length() const { return starts_.back(); }
  /// Left endpoint of piece i (i == size gives the total length).
  double piece_start(std::size_t i) const { return starts_[i]; }

  /// Index of the piece containing x and the local coordinate inside it.
  std::pair<std::size_t, double> locate(double x) const {
    if (!(x >= 0.0 && x < total_length()))
      throw ConfigError("concatenate: x outside [0, total length)");
    auto it = std::upper_bound(starts_.begin(), starts_.end(), x);
    const auto i = static_cast<std::size_t>(it - starts_.begin()) - 1;
    return {i, x - starts_[i]};
  }

  double operator()(double x) const {
    auto [i, t] = locate(x);
    return seq_->alphabet[seq_->symbols[i]].value(t);
  }

 private:
  const PieceSequence* seq_;
  std::vector<double> starts_;
};

inline Concatenation concatenate(const PieceSequence& seq) { return Concatenation(seq); }

struct FdpReport {
  bool holds = false;
  std::size_t alphabet_size = 0;
  std::size_t used_symbols = 0;
  std::vector<std::size_t> usage_counts;  // indexed by id
};

/// Audit: finite alphabet, every symbol interned, usage frequencies.
inline FdpReport check_fdp(const PieceSequence& seq) {
  FdpReport r;
  r.alphabet_size = seq.alphabet.size();
  r.usage_counts.assign(r.alphabet_size, 0);
  r.holds = seq.valid() && r.alphabet_size > 0;
  if (!r.holds) return r;
  for (int id : seq.symbols) ++r.usage_counts[static_cast<std::size_t>(id)];
  r.used_symbols = static_cast<std::size_t>(
      std::count_if(r.usage_counts.begin(), r.usage_counts.end(), [](auto c) { return c > 0; }));
  return r;
}

struct SimpleFdpWitness {
  std::size_t first = 0;   // position (index of the next piece) of the earlier occurrence
  std::size_t second = 0;  // position of the later occurrence
  std::vector<int> context;
  int next_first = 0;
  int next_second = 0;
};

struct SimpleFdpResult {
  bool holds = true;  // holds on the examined prefix
  std::optional<SimpleFdpWitness> witness;
  std::size_t positions_checked = 0;
  std::size_t context_classes = 0;
};

namespace detail {

/// Do the concatenations starting at piece positions i and j agree on [0, ell)?
/// Breakpoints are accumulated locally so the comparison does not depend on x.
inline bool forward_agree(const PieceSequence& seq, std::size_t i, std::size_t j, double ell) {
  constexpr double kPosTol = 1e-9;
  std::size_t pi = i, pj = j;
  double start_i = 0.0, start_j = 0.0;  // local left endpoints of the current pieces
  double a = 0.0;
  while (a < ell - kPosTol) {
    const Piece& P = seq.alphabet[seq.symbols[pi]];
    const Piece& Q = seq.alphabet[seq.symbols[pj]];
    const double end_i = start_i + P.duration;
    const double end_j = start_j + Q.duration;
    const double b = std::min({end_i, end_j, ell});
    const double li = a - start_i, lj = a - start_j;
    if (!(P.id == Q.id && std::abs(li - lj) <= kPosTol)) {
      constexpr int kSamples = 33;
      for (int s = 0; s < kSamples; ++s) {
        const double u = (static_cast<double>(s) + 0.5) / kSamples * (b - a);
        if (std::abs(P.value(li + u) - Q.value(lj + u)) > kInternTol) return false;
      }
    }
    a = b;
    if (end_i <= a + kPosTol) {
      start_i = end_i;
      ++pi;
    }
    if (end_j <= a + kPosTol) {
      start_j = end_j;
      ++pj;
    }
  }
  return true;
}

}  // namespace detail

/// Searches the first prefix_len symbols for two positions with equal length->=ell
/// past contexts and equal length-ell futures whose next pieces differ. The first
/// witness in lexicographic (first, second) order is reported.
inline SimpleFdpResult check_simple_fdp(const PieceSequence& seq, double ell, std::size_t prefix_len) {
  detail::require(seq.valid(), "check_simple_fdp: invalid sequence");
  detail::require(ell > 0.0, "check_simple_fdp: ell must be positive");
  detail::require(prefix_len <= seq.symbols.size(),
                  "check_simple_fdp: prefix_len exceeds the number of symbols");
  const Concatenation cat(seq);
  const std::size_t n = prefix_len;
  const double tol = 1e-9;  // positions, not values

  // Positions p in [0, n): next piece is symbols[p]; need a past of length >= ell inside
  // [0, p) and a future of length >= ell inside [p, n).
  std::map<std::vector<int>, std::vector<std::size_t>> by_context;
  std::size_t back = 0;  // minimal-cover start for the current p
  std::size_t fwd = 0;   // minimal-cover end (exclusive) for the current p
  for (std::size_t p = 0; p < n; ++p) {
    if (cat.piece_start(p) < ell - tol) continue;
    while (back + 1 < p && cat.piece_start(p) - cat.piece_start(back + 1) >= ell - tol) ++back;
    fwd = std::max(fwd, p + 1);
    while (fwd < n && cat.piece_start(fwd) - cat.piece_start(p) < ell - tol) ++fwd;
    if (cat.piece_start(fwd) - cat.piece_start(p) < ell - tol) break;  // future runs past the prefix
    std::vector<int> ctx(seq.symbols.begin() + static_cast<std::ptrdiff_t>(back),
                         seq.symbols.begin() + static_cast<std::ptrdiff_t>(p));
    by_context[std::move(ctx)].push_back(p);
  }

  SimpleFdpResult res;
  res.context_classes = by_context.size();
  std::optional<std::pair<std::size_t, std::size_t>> best;
  const std::vector<int>* best_ctx = nullptr;

  for (const auto& [ctx, positions] : by_context) {
    res.positions_checked += positions.size();
    // Representatives by exact future symbol cover; positions sharing it agree trivially.
    std::map<std::vector<int>, std::size_t> reps;  // future cover -> smallest position
    for (std::size_t p : positions) {
      std::size_t q = p;
      double len = 0.0;
      std::vector<int> fut;
      while (len < ell - tol) {
        fut.push_back(seq.symbols[q]);
        len += seq.duration(q);
        ++q;
      }
      reps.emplace(std::move(fut), p);  // positions ascend, so the first insert is the minimum
    }
    if (reps.size() < 2) continue;
    std::vector<std::pair<std::vector<int>, std::size_t>> classes(reps.begin(), reps.end());
    for (std::size_t a = 0; a < classes.size(); ++a)
      for (std::size_t b = a + 1; b < classes.size(); ++b) {
        if (classes[a].first.front() == classes[b].first.front()) continue;
        const std::size_t pa = classes[a].second, pb = classes[b].second;
        if (!detail::forward_agree(seq, pa, pb, ell)) continue;
        const std::pair<std::size_t, std::size_t> cand{std::min(pa, pb), std::max(pa, pb)};
        if (!best || cand < *best) {
          best = cand;
          best_ctx = &ctx;
        }
      }
  }
  if (best) {
    res.holds = false;
    res.witness = SimpleFdpWitness{best->first, best->second, *best_ctx,
                                   seq.symbols[best->first], seq.symbols[best->second]};
  }
  return res;
}

struct PeriodicityBreak {
  std::size_t period = 0;
  std::size_t position = 0;  // last i with symbols[i] != symbols[i + period]
};

struct EventualPeriodicityResult {
  bool falsified = false;
  std::size_t period = 0;  // when consistent
  std::size_t start = 0;   // when consistent
  std::vector<PeriodicityBreak> evidence;  // when falsified, one entry per period
};

/// Tests every symbol period q <= max_period for a periodic tail starting in the first
/// half of the sequence. The smallest consistent q (with its earliest start) is returned.
inline EventualPeriodicityResult falsify_eventual_periodicity(const PieceSequence& seq,
                                                              std::size_t max_period) {
  detail::require(max_period >= 1, "falsify_eventual_periodicity: max_period must be >= 1");
  const std::size_t n = seq.symbols.size();
  detail::require(n >= 3 * max_period,
                  "falsify_eventual_periodicity: prefix must hold at least 3*max_period symbols");
  EventualPeriodicityResult res;
  for (std::size_t q = 1; q <= max_period; ++q) {
    std::optional<std::size_t> last_break;
    for (std::size_t i = n - q; i-- > 0;) {
      if (seq.symbols[i] != seq.symbols[i + q]) {
        last_break = i;
        break;
      }
    }
    const std::size_t start = last_break ? *last_break + 1 : 0;
    if (start <= n / 2) {
      res.falsified = false;
      res.period = q;
      res.start = start;
      res.evidence.clear();
      return res;
    }
    res.evidence.push_back({q, *last_break});
  }
  res.falsified = true;
  return res;
}

/// V(-x): reversed order with reflected profiles. Distinct pieces stay distinct under
/// reflection, so the alphabet is carried over id for id.
inline PieceSequence reverse(const PieceSequence& seq) {
  detail::require(seq.valid(), "reverse: invalid sequence");
  PieceSequence out;
  for (const auto& p : seq.alphabet.pieces()) {
    auto prof = p.profile;
    prof.reflected = !prof.reflected;
    out.alphabet.push_unchecked(p.duration, std::move(prof));
  }
  out.symbols.assign(seq.symbols.rbegin(), seq.symbols.rend());
  out.start_offset = -(seq.start_offset + seq.total_length());
  return out;
}

}  // namespace qpspec

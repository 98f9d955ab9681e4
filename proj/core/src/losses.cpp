#include "sdh/losses.hpp"

#include <algorithm>
#include <string>

#include "sdh/error.hpp"
#include "sdh/gradcheck.hpp"

namespace sdh {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw UsageError("embeddings have different lengths");
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double t = a[i] - b[i];
    d += t * t;
  }
  return d;
}

GradientMode parse_gradient_mode(std::string_view name) {
  if (name == "exact") return GradientMode::Exact;
  if (name == "paper-eq7") return GradientMode::ClosedForm;
  throw UsageError("unknown gradient mode '" + std::string(name) + "' (expected exact or paper-eq7)");
}

std::string_view gradient_mode_name(GradientMode mode) {
  return mode == GradientMode::Exact ? "exact" : "paper-eq7";
}

namespace {

std::vector<Embedding> zero_grads(std::span<const Embedding> table) {
  std::vector<Embedding> g(table.size());
  for (std::size_t i = 0; i < table.size(); ++i) g[i].assign(table[i].size(), 0.0);
  return g;
}

void check_index(std::span<const Embedding> table, std::size_t i) {
  if (i >= table.size()) throw UsageError("loss term refers to embedding " + std::to_string(i) + " of " +
                                          std::to_string(table.size()));
  if (table[i].size() != table.front().size()) throw UsageError("embeddings have different lengths");
}

// grad_a += s * 2(a - b), grad_b -= s * 2(a - b): the gradient of s * d(a, b).
void add_distance_grad(std::span<const Embedding> table, std::vector<Embedding>& g, std::size_t a, std::size_t b,
                       double s) {
  const Embedding& ea = table[a];
  const Embedding& eb = table[b];
  for (std::size_t k = 0; k < ea.size(); ++k) {
    const double t = 2.0 * s * (ea[k] - eb[k]);
    g[a][k] += t;
    g[b][k] -= t;
  }
}

// Index of the most violated negative of one side and its hinge value m - d.
struct Worst {
  std::size_t index = 0;
  double hinge = 0.0;
};

Worst worst_negative(std::span<const Embedding> table, std::size_t anchor, const std::vector<std::size_t>& negatives,
                     double margin) {
  Worst w{negatives.front(), margin - squared_distance(table[anchor], table[negatives.front()])};
  for (std::size_t n = 1; n < negatives.size(); ++n) {
    const double h = margin - squared_distance(table[anchor], table[negatives[n]]);
    if (h > w.hinge) w = {negatives[n], h};
  }
  return w;
}

void check_term(std::span<const Embedding> table, const StructuredTerm& t) {
  if (t.x_negatives.empty() || t.y_negatives.empty()) {
    throw UsageError("every positive pair needs at least one hard negative on each side");
  }
  check_index(table, t.x);
  check_index(table, t.y);
  for (auto n : t.x_negatives) check_index(table, n);
  for (auto n : t.y_negatives) check_index(table, n);
}

}  // namespace

LossResult contrastive_loss(std::span<const Embedding> table, std::span<const PairTerm> pairs, double margin) {
  if (pairs.empty()) throw UsageError("contrastive loss needs a nonempty batch");
  LossResult r;
  r.grads = zero_grads(table);
  for (const PairTerm& p : pairs) {
    check_index(table, p.x);
    check_index(table, p.y);
    const double d = squared_distance(table[p.x], table[p.y]);
    if (p.same) {
      r.value += d;
      add_distance_grad(table, r.grads, p.x, p.y, 1.0);
      r.signature = mix_signature(r.signature, 2);
    } else {
      const bool active = margin - d > 0.0;
      if (active) {
        r.value += margin - d;
        add_distance_grad(table, r.grads, p.x, p.y, -1.0);
      }
      r.signature = mix_signature(r.signature, active ? 1 : 0);
    }
  }
  return r;
}

LossResult triplet_loss(std::span<const Embedding> table, std::span<const TripletTerm> triplets, double margin) {
  if (triplets.empty()) throw UsageError("triplet loss needs a nonempty batch");
  LossResult r;
  r.grads = zero_grads(table);
  for (const TripletTerm& t : triplets) {
    check_index(table, t.anchor);
    check_index(table, t.positive);
    check_index(table, t.negative);
    const double d_pos = squared_distance(table[t.anchor], table[t.positive]);
    const double d_neg = squared_distance(table[t.anchor], table[t.negative]);
    const double h = margin - (d_neg - d_pos);
    const bool active = h > 0.0;
    if (active) {
      r.value += h;
      add_distance_grad(table, r.grads, t.anchor, t.negative, -1.0);
      add_distance_grad(table, r.grads, t.anchor, t.positive, 1.0);
    }
    r.signature = mix_signature(r.signature, active ? 1 : 0);
  }
  return r;
}

double structured_term(std::span<const Embedding> table, const StructuredTerm& term, double margin) {
  check_term(table, term);
  const Worst wx = worst_negative(table, term.x, term.x_negatives, margin);
  const Worst wy = worst_negative(table, term.y, term.y_negatives, margin);
  const double hinge = std::max(std::max(0.0, wx.hinge), std::max(0.0, wy.hinge));
  return hinge + squared_distance(table[term.x], table[term.y]);
}

LossResult structured_loss(std::span<const Embedding> table, const StructuredBatch& batch, GradientMode mode) {
  if (batch.terms.empty()) throw UsageError("structured loss needs at least one positive pair");
  const double m = batch.margin;
  const double scale = 1.0 / static_cast<double>(batch.terms.size());
  LossResult r;
  r.grads = zero_grads(table);
  for (const StructuredTerm& t : batch.terms) {
    check_term(table, t);
    const Worst wx = worst_negative(table, t.x, t.x_negatives, m);
    const Worst wy = worst_negative(table, t.y, t.y_negatives, m);
    const double d_pos = squared_distance(table[t.x], table[t.y]);
    const double hinge = std::max(std::max(0.0, wx.hinge), std::max(0.0, wy.hinge));
    const double f = hinge + d_pos;
    r.value += scale * std::max(0.0, f);

    // 0: no hinge active, 1: query side, 2: match side; plus the chosen negative.
    std::uint64_t choice = 0;
    if (hinge > 0.0) choice = wx.hinge >= wy.hinge ? 1 : 2;
    r.signature = mix_signature(r.signature, choice);
    r.signature = mix_signature(r.signature, choice == 1 ? wx.index : choice == 2 ? wy.index : 0);

    if (mode == GradientMode::Exact) {
      if (f <= 0.0) continue;
      add_distance_grad(table, r.grads, t.x, t.y, scale);
      if (choice == 1) add_distance_grad(table, r.grads, t.x, wx.index, -scale);
      if (choice == 2) add_distance_grad(table, r.grads, t.y, wy.index, -scale);
    } else {
      const ClosedFormGradients g = closed_form_gradients(table[t.x], table[t.y], table[wx.index], table[wy.index], m);
      if (!g.active) continue;
      for (std::size_t k = 0; k < g.x.size(); ++k) {
        r.grads[t.x][k] += scale * g.x[k];
        r.grads[t.y][k] += scale * g.y[k];
        r.grads[wx.index][k] += scale * g.y_k[k];
        r.grads[wy.index][k] += scale * g.y_l[k];
      }
    }
  }
  return r;
}

ClosedFormGradients closed_form_gradients(std::span<const double> x, std::span<const double> y, std::span<const double> y_k,
                                 std::span<const double> y_l, double margin) {
  const std::size_t r = x.size();
  if (y.size() != r || y_k.size() != r || y_l.size() != r) throw UsageError("embeddings have different lengths");
  ClosedFormGradients g{Embedding(r, 0.0), Embedding(r, 0.0), Embedding(r, 0.0), Embedding(r, 0.0), false};
  g.active = 2.0 * margin + squared_distance(x, y) > squared_distance(x, y_k) + squared_distance(y, y_l);
  if (!g.active) return g;
  for (std::size_t i = 0; i < r; ++i) {
    g.x[i] = 2.0 * y_k[i] - 2.0 * y[i];
    g.y[i] = 2.0 * y_l[i] - 2.0 * x[i];
    g.y_k[i] = 2.0 * x[i];
    g.y_l[i] = 2.0 * y[i];
  }
  return g;
}

MarginTerms margin_terms(std::span<const double> x, std::span<const double> y_pos, std::span<const double> y) {
  MarginTerms t;
  t.delta = squared_distance(x, y) - squared_distance(x, y_pos);
  t.augmented = t.delta + squared_distance(y_pos, y);
  return t;
}

}  // namespace sdh

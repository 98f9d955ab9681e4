#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "sdh/hash_head.hpp"

namespace sdh {

// All losses read embeddings from a shared table and refer to them by index,
// so an image that appears in several terms of a batch is embedded once.
// Distances are squared L2 on the relaxed [0,1]^r embeddings.

double squared_distance(std::span<const double> a, std::span<const double> b);

enum class GradientMode {
  Exact,     // true subgradient of the relaxed structured loss
  ClosedForm,  // the closed-form expressions with a single gating indicator
};

GradientMode parse_gradient_mode(std::string_view name);
std::string_view gradient_mode_name(GradientMode mode);

struct PairTerm {
  std::size_t x = 0;
  std::size_t y = 0;
  bool same = false;  // 1 when both images depict the same person
};

struct TripletTerm {
  std::size_t anchor = 0;
  std::size_t positive = 0;
  std::size_t negative = 0;
};

// One positive pair (x_i, y_i) with its hard negatives: y_k for x_i, y_l for y_i.
struct StructuredTerm {
  std::size_t x = 0;
  std::size_t y = 0;
  std::vector<std::size_t> x_negatives;
  std::vector<std::size_t> y_negatives;
};

struct StructuredBatch {
  std::vector<StructuredTerm> terms;
  double margin = 1.0;
};

struct LossResult {
  double value = 0.0;
  // Gradient with respect to every table entry (zero for entries not referenced).
  std::vector<Embedding> grads;
  // Encodes which hinges are active and which negatives were selected.
  std::uint64_t signature = 0;
};

// sum a*d + (1-a)*max(0, m - d)
LossResult contrastive_loss(std::span<const Embedding> table, std::span<const PairTerm> pairs, double margin = 1.0);

// sum max(0, m - (d(anchor, negative) - d(anchor, positive)))
LossResult triplet_loss(std::span<const Embedding> table, std::span<const TripletTerm> triplets,
                        double margin = 1.0);

// F_i = max(max_k max(0, m - d(x_i, y_k)), max_l max(0, m - d(y_i, y_l))) + d(x_i, y_i)
double structured_term(std::span<const Embedding> table, const StructuredTerm& term, double margin = 1.0);

// (1/|P|) sum_i max(0, F_i). Multiple negatives per side reduce by max (worst violator).
LossResult structured_loss(std::span<const Embedding> table, const StructuredBatch& batch,
                           GradientMode mode = GradientMode::Exact);

struct ClosedFormGradients {
  Embedding x;
  Embedding y;
  Embedding y_k;
  Embedding y_l;
  bool active = false;
};

// Single pair, one negative per side:
//   I = [2m + d(x,y) > d(x,y_k) + d(y,y_l)]
//   dx = (2y_k - 2y) I,  dy = (2y_l - 2x) I,  dy_k = 2x I,  dy_l = 2y I
ClosedFormGradients closed_form_gradients(std::span<const double> x, std::span<const double> y, std::span<const double> y_k,
                                 std::span<const double> y_l, double margin = 1.0);

// Margin terms for a candidate y against the positive pair (x, y_pos):
//   delta     = d(x, y) - d(x, y_pos)
//   augmented = delta + d(y_pos, y)
// Mining both sides of the pair turns the constraint on delta into one on augmented.
struct MarginTerms {
  double delta = 0.0;
  double augmented = 0.0;
};

MarginTerms margin_terms(std::span<const double> x, std::span<const double> y_pos, std::span<const double> y);

}  // namespace sdh

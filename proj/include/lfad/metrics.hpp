// Copyright 2026 The lfad Authors
// SPDX-License-Identifier: Apache-2.0

// Token error rate and decode-pathology statistics.

#pragma once

#include <span>
#include <string>
#include <vector>

namespace lfad {

struct EditCounts {
  long substitutions = 0;
  long insertions = 0;
  long deletions = 0;
  long reference_length = 0;

  long errors() const { return substitutions + insertions + deletions; }
  // Errors per reference token; an empty reference scores the raw error count.
  double wer() const;
  EditCounts& operator+=(const EditCounts& other);
};

// Keeps content tokens only: blank, BOS, EOS and _segE are dropped.
std::vector<int> strip_tags(std::span<const int> tokens);

// Unit-cost Levenshtein alignment on tag-stripped sequences; counts come from
// the backtrace.
EditCounts wer(std::span<const int> reference, std::span<const int> hypothesis);

// Largest number of occurrences of any n-gram, 2 <= n <= 4.
int repetition_score(std::span<const int> tokens);

struct UtteranceRow {
  std::string id;
  std::vector<int> reference;
  std::vector<int> hypothesis;
  EditCounts counts;
  int decodes = 0;     // second-pass decodes behind this row
  int truncated = 0;   // of which stopped by the token cap
  int failed = 0;      // segments that raised and were skipped
};

UtteranceRow score_utterance(std::string id, std::span<const int> reference,
                             std::span<const int> hypothesis, int decodes = 1, int truncated = 0,
                             int failed = 0);

struct WerReport {
  EditCounts totals;
  std::vector<UtteranceRow> rows;
  double wer = 0;
  double truncation_rate = 0;
  double eos_rate = 0;
  double insertion_ratio = 0;
  int repetition = 0;
  long segments = 0;
};

// Aggregates rows in order: rates are per second-pass decode, ratios per
// reference token.
WerReport pathology_report(std::vector<UtteranceRow> rows);

struct Condition {
  std::string model;
  std::string encodings;
  std::string mode;
  std::string segmentation;
};

std::string summary_json(const Condition& condition, const WerReport& report);
std::string summary_table(std::span<const Condition> conditions, std::span<const WerReport> reports);

}  // namespace lfad

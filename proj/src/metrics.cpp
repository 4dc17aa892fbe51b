// Copyright 2026 The lfad Authors
// SPDX-License-Identifier: Apache-2.0

#include "lfad/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <sstream>

#include <json.hpp>

#include "lfad/segment.hpp"

namespace lfad {

double EditCounts::wer() const {
  if (reference_length == 0) return static_cast<double>(errors());
  return static_cast<double>(errors()) / static_cast<double>(reference_length);
}

EditCounts& EditCounts::operator+=(const EditCounts& other) {
  substitutions += other.substitutions;
  insertions += other.insertions;
  deletions += other.deletions;
  reference_length += other.reference_length;
  return *this;
}

std::vector<int> strip_tags(std::span<const int> tokens) {
  std::vector<int> out;
  for (int t : tokens)
    if (t >= kFirstContentToken) out.push_back(t);
  return out;
}

EditCounts wer(std::span<const int> reference, std::span<const int> hypothesis) {
  const std::vector<int> ref = strip_tags(reference);
  const std::vector<int> hyp = strip_tags(hypothesis);
  const std::size_t n = ref.size();
  const std::size_t m = hyp.size();
  std::vector<long> d((n + 1) * (m + 1));
  auto at = [&](std::size_t i, std::size_t j) -> long& { return d[i * (m + 1) + j]; };
  for (std::size_t i = 0; i <= n; ++i) at(i, 0) = static_cast<long>(i);
  for (std::size_t j = 0; j <= m; ++j) at(0, j) = static_cast<long>(j);
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 1; j <= m; ++j)
      at(i, j) = std::min({at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1), at(i - 1, j) + 1,
                           at(i, j - 1) + 1});

  EditCounts c;
  c.reference_length = static_cast<long>(n);
  std::size_t i = n;
  std::size_t j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && at(i, j) == at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1)) {
      if (ref[i - 1] != hyp[j - 1]) ++c.substitutions;
      --i;
      --j;
    } else if (i > 0 && at(i, j) == at(i - 1, j) + 1) {
      ++c.deletions;
      --i;
    } else {
      ++c.insertions;
      --j;
    }
  }
  return c;
}

int repetition_score(std::span<const int> tokens) {
  int best = 0;
  for (std::size_t n = 2; n <= 4; ++n) {
    if (tokens.size() < n) break;
    std::map<std::vector<int>, int> counts;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i)
      best = std::max(best, ++counts[std::vector<int>(tokens.begin() + static_cast<long>(i),
                                                       tokens.begin() + static_cast<long>(i + n))]);
  }
  return best;
}

UtteranceRow score_utterance(std::string id, std::span<const int> reference,
                             std::span<const int> hypothesis, int decodes, int truncated, int failed) {
  UtteranceRow row;
  row.id = std::move(id);
  row.reference = strip_tags(reference);
  row.hypothesis = strip_tags(hypothesis);
  row.counts = wer(row.reference, row.hypothesis);
  row.decodes = decodes;
  row.truncated = truncated;
  row.failed = failed;
  return row;
}

WerReport pathology_report(std::vector<UtteranceRow> rows) {
  WerReport r;
  long truncated = 0;
  for (const auto& row : rows) {
    r.totals += row.counts;
    r.segments += row.decodes;
    truncated += row.truncated;
    r.repetition = std::max(r.repetition, repetition_score(row.hypothesis));
  }
  r.rows = std::move(rows);
  r.wer = r.totals.wer();
  if (r.segments > 0) {
    r.truncation_rate = static_cast<double>(truncated) / static_cast<double>(r.segments);
    r.eos_rate = 1.0 - r.truncation_rate;
  }
  r.insertion_ratio = r.totals.reference_length > 0
                          ? static_cast<double>(r.totals.insertions) / static_cast<double>(r.totals.reference_length)
                          : static_cast<double>(r.totals.insertions);
  return r;
}

std::string summary_json(const Condition& condition, const WerReport& report) {
  nlohmann::json j{{"model", condition.model},
                   {"encodings", condition.encodings},
                   {"mode", condition.mode},
                   {"segmentation", condition.segmentation},
                   {"wer", report.wer},
                   {"trunc_rate", report.truncation_rate},
                   {"eos_rate", report.eos_rate},
                   {"ins_ratio", report.insertion_ratio},
                   {"repetition", report.repetition},
                   {"segments", report.segments}};
  return j.dump();
}

std::string summary_table(std::span<const Condition> conditions, std::span<const WerReport> reports) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%-8s %-5s %-4s %-9s %8s %8s %8s %6s\n", "model", "enc", "mode", "segments",
                "wer%", "trunc", "ins", "rep");
  out << line;
  for (std::size_t i = 0; i < conditions.size() && i < reports.size(); ++i) {
    const auto& c = conditions[i];
    const auto& r = reports[i];
    std::snprintf(line, sizeof line, "%-8s %-5s %-4s %-9s %8.2f %8.3f %8.3f %6d\n", c.model.c_str(),
                  c.encodings.c_str(), c.mode.c_str(), c.segmentation.c_str(), 100.0 * r.wer,
                  r.truncation_rate, r.insertion_ratio, r.repetition);
    out << line;
  }
  return out.str();
}

}  // namespace lfad

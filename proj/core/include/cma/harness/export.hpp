// Copyright 2026 The CMA Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CMA_HARNESS_EXPORT_HPP_
#define CMA_HARNESS_EXPORT_HPP_

#include <string>
#include <vector>

#include "cma/runtime/timeline.hpp"

namespace cma::harness {

/// CSV with header "ts,module,kind" and one row per event (ms
/// timestamps), in timeline order.
std::string timeline_to_csv(
    const std::vector<cma::runtime::TimelineEvent>& events);

/// Module-activity plot: one horizontal lane per module (sorted by name),
/// one dot per output event, time left to right.
std::string timeline_to_svg(
    const std::vector<cma::runtime::TimelineEvent>& events);

/// Render and write. Throws Error when the file cannot be written.
void export_timeline(const std::vector<cma::runtime::TimelineEvent>& events,
                     const std::string& format, const std::string& path);

/// Parses a CSV produced by timeline_to_csv. Throws ParseError with the
/// offending 1-based line.
std::vector<cma::runtime::TimelineEvent> read_timeline_csv(
    const std::string& path);

/// Collects the events recorded in every per-module JSONL log under
/// `log_dir` (files named <module>.jsonl).
std::vector<cma::runtime::TimelineEvent> read_jsonl_events(
    const std::string& log_dir);

/// True when the two sequences hold the same multiset of
/// (ts, module, kind). On mismatch, `detail` (if given) explains one
/// difference.
bool same_event_multiset(
    const std::vector<cma::runtime::TimelineEvent>& left,
    const std::vector<cma::runtime::TimelineEvent>& right,
    std::string* detail = nullptr);

}  // namespace cma::harness

#endif  // CMA_HARNESS_EXPORT_HPP_

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

#include "cma/harness/export.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include <nlohmann/json.hpp>

#include "cma/common/errors.hpp"

namespace cma::harness {

namespace {

namespace fs = std::filesystem;
using cma::runtime::EventKind;
using cma::runtime::TimelineEvent;

std::string xml_escape(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.is_open()) throw Error("cannot open file: " + path);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

}  // namespace

std::string timeline_to_csv(const std::vector<TimelineEvent>& events) {
  std::string out = "ts,module,kind\n";
  for (const auto& e : events) {
    out += std::to_string(e.ts_ms);
    out += ',';
    out += e.module;
    out += ',';
    out += cma::runtime::event_kind_name(e.kind);
    out += '\n';
  }
  return out;
}

std::string timeline_to_svg(const std::vector<TimelineEvent>& events) {
  // Lane layout constants (pixels).
  constexpr int kLabelWidth = 180;
  constexpr int kPlotWidth = 960;
  constexpr int kLaneHeight = 22;
  constexpr int kTopMargin = 16;
  constexpr int kAxisHeight = 30;
  constexpr int kRightMargin = 16;

  std::set<std::string> module_set;
  std::int64_t min_ts = 0;
  std::int64_t max_ts = 0;
  bool have_ts = false;
  for (const auto& e : events) {
    module_set.insert(e.module);
    if (!have_ts) {
      min_ts = max_ts = e.ts_ms;
      have_ts = true;
    } else {
      min_ts = std::min(min_ts, e.ts_ms);
      max_ts = std::max(max_ts, e.ts_ms);
    }
  }
  std::vector<std::string> modules(module_set.begin(), module_set.end());
  const std::int64_t span = std::max<std::int64_t>(max_ts - min_ts, 1);

  const int width = kLabelWidth + kPlotWidth + kRightMargin;
  const int height =
      kTopMargin + static_cast<int>(modules.size()) * kLaneHeight +
      kAxisHeight;

  auto x_of = [&](std::int64_t ts) {
    return kLabelWidth +
           static_cast<double>(ts - min_ts) / static_cast<double>(span) *
               kPlotWidth;
  };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << " "
      << height << "\">\n";
  svg << "  <style>text{font-family:sans-serif;font-size:11px;fill:#333}"
         ".lane{stroke:#ddd;stroke-width:1}.dot{fill:#2266cc}"
         ".axis{stroke:#888;stroke-width:1}</style>\n";
  svg << "  <rect width=\"" << width << "\" height=\"" << height
      << "\" fill=\"white\"/>\n";

  std::map<std::string, int> lane_of;
  for (std::size_t i = 0; i < modules.size(); ++i) {
    const int cy = kTopMargin + static_cast<int>(i) * kLaneHeight +
                   kLaneHeight / 2;
    lane_of[modules[i]] = cy;
    svg << "  <text x=\"4\" y=\"" << cy + 4 << "\">"
        << xml_escape(modules[i]) << "</text>\n";
    svg << "  <line class=\"lane\" x1=\"" << kLabelWidth << "\" y1=\"" << cy
        << "\" x2=\"" << kLabelWidth + kPlotWidth << "\" y2=\"" << cy
        << "\"/>\n";
  }

  // One dot per output event; other kinds shape the lanes but not the plot.
  char buf[64];
  for (const auto& e : events) {
    if (e.kind != EventKind::kOutput) continue;
    std::snprintf(buf, sizeof(buf), "%.2f", x_of(e.ts_ms));
    svg << "  <circle class=\"dot\" cx=\"" << buf << "\" cy=\""
        << lane_of[e.module] << "\" r=\"3\"/>\n";
  }

  const int axis_y = kTopMargin + static_cast<int>(modules.size()) *
                                      kLaneHeight + 8;
  svg << "  <line class=\"axis\" x1=\"" << kLabelWidth << "\" y1=\"" << axis_y
      << "\" x2=\"" << kLabelWidth + kPlotWidth << "\" y2=\"" << axis_y
      << "\"/>\n";
  if (have_ts) {
    for (int tick = 0; tick <= 4; ++tick) {
      const std::int64_t ts = min_ts + span * tick / 4;
      std::snprintf(buf, sizeof(buf), "%.2f", x_of(ts));
      svg << "  <line class=\"axis\" x1=\"" << buf << "\" y1=\"" << axis_y
          << "\" x2=\"" << buf << "\" y2=\"" << axis_y + 4 << "\"/>\n";
      svg << "  <text x=\"" << buf << "\" y=\"" << axis_y + 18
          << "\" text-anchor=\"middle\">+" << (ts - min_ts) << " ms</text>\n";
    }
  }
  svg << "</svg>\n";
  return svg.str();
}

void export_timeline(const std::vector<TimelineEvent>& events,
                     const std::string& format, const std::string& path) {
  std::string rendered;
  if (format == "csv") {
    rendered = timeline_to_csv(events);
  } else if (format == "svg") {
    rendered = timeline_to_svg(events);
  } else {
    throw Error("unknown timeline format: " + format);
  }
  fs::path target(path);
  if (target.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(target.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out.is_open()) throw Error("cannot write file: " + path);
  out << rendered;
  out.flush();
  if (!out.good()) throw Error("failed writing file: " + path);
}

std::vector<TimelineEvent> read_timeline_csv(const std::string& path) {
  const std::string content = read_file(path);
  std::vector<TimelineEvent> events;
  std::istringstream in(content);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1) {
      if (line != "ts,module,kind") {
        throw ParseError("expected header 'ts,module,kind'", line_no);
      }
      continue;
    }
    if (line.empty()) continue;
    const std::size_t first = line.find(',');
    const std::size_t last = line.rfind(',');
    if (first == std::string::npos || last == first) {
      throw ParseError("expected 3 comma-separated fields", line_no);
    }
    TimelineEvent event;
    try {
      std::size_t pos = 0;
      event.ts_ms = std::stoll(line.substr(0, first), &pos);
      if (pos != first) throw std::invalid_argument(line);
    } catch (const std::exception&) {
      throw ParseError("bad timestamp", line_no);
    }
    event.module = line.substr(first + 1, last - first - 1);
    const auto kind = cma::runtime::event_kind_from_name(line.substr(last + 1));
    if (!kind) throw ParseError("unknown event kind", line_no);
    event.kind = *kind;
    events.push_back(std::move(event));
  }
  return events;
}

std::vector<TimelineEvent> read_jsonl_events(const std::string& log_dir) {
  std::vector<TimelineEvent> events;
  if (!fs::is_directory(log_dir)) {
    throw Error("not a log directory: " + log_dir);
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(log_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".jsonl") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  for (const auto& file : files) {
    const std::string content = read_file(file.string());
    std::istringstream in(content);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      nlohmann::json parsed = nlohmann::json::parse(line, nullptr, false);
      if (parsed.is_discarded() || !parsed.is_object()) {
        throw ParseError("bad JSONL line in " + file.filename().string(),
                         line_no);
      }
      if (!parsed.contains("ts") || !parsed.contains("module") ||
          !parsed.contains("event")) {
        throw ParseError("JSONL line missing ts/module/event in " +
                             file.filename().string(),
                         line_no);
      }
      TimelineEvent event;
      event.ts_ms = parsed["ts"].get<std::int64_t>();
      event.module = parsed["module"].get<std::string>();
      const auto kind = cma::runtime::event_kind_from_name(
          parsed["event"].get<std::string>());
      if (!kind) {
        throw ParseError("unknown event kind in " + file.filename().string(),
                         line_no);
      }
      event.kind = *kind;
      events.push_back(std::move(event));
    }
  }
  return events;
}

bool same_event_multiset(const std::vector<TimelineEvent>& left,
                         const std::vector<TimelineEvent>& right,
                         std::string* detail) {
  using Key = std::tuple<std::int64_t, std::string, std::string>;
  auto key_of = [](const TimelineEvent& e) {
    return Key{e.ts_ms, e.module, cma::runtime::event_kind_name(e.kind)};
  };
  std::map<Key, long> balance;
  for (const auto& e : left) ++balance[key_of(e)];
  for (const auto& e : right) --balance[key_of(e)];
  for (const auto& [key, count] : balance) {
    if (count == 0) continue;
    if (detail != nullptr) {
      const auto& [ts, module, kind] = key;
      *detail = "event (" + std::to_string(ts) + ", " + module + ", " + kind +
                ") appears " + std::to_string(count) +
                " more time(s) on the " + (count > 0 ? "left" : "right");
    }
    return false;
  }
  if (detail != nullptr) {
    *detail = std::to_string(left.size()) + " events match";
  }
  return true;
}

}  // namespace cma::harness

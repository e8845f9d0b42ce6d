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

#ifndef CMA_BUS_ENVELOPE_HPP_
#define CMA_BUS_ENVELOPE_HPP_

#include <cstdint>
#include <map>
#include <string>

namespace cma::bus {

/// One routed one-to-one text message between named modules.
struct Envelope {
  std::string msg_id;    // UUID-format, unique per agent run
  std::string agent_id;  // topic-safe
  std::string from_module;
  std::string to_module;
  std::int64_t sent_at_ms = 0;  // UTC epoch milliseconds
  std::string body;             // UTF-8, arbitrary length
  std::map<std::string, std::string> headers;

  bool operator==(const Envelope&) const = default;
};

/// True when the name can be spliced into a topic: non-empty and free of
/// '/', '+', '#'.
bool is_topic_safe(const std::string& name);

/// Throws InvalidNameError unless is_topic_safe(name).
void require_topic_safe(const std::string& name, const std::string& what);

/// Canonical inbox topic: cma/<agent_id>/module/<module_name>/inbox.
/// Throws InvalidNameError for unsafe arguments.
std::string topic_for(const std::string& agent_id,
                      const std::string& module_name);

/// Canonical UTF-8 JSON wire encoding, keys in fixed order:
/// msg_id, agent_id, from, to, sent_at, body, headers. No trailing newline.
std::string encode(const Envelope& envelope);

/// Inverse of encode on its image; unknown keys are ignored. Throws
/// MalformedPayloadError (naming the first missing key in declared order)
/// on invalid JSON or a missing/mistyped required key.
Envelope decode(const std::string& bytes);

}  // namespace cma::bus

#endif  // CMA_BUS_ENVELOPE_HPP_

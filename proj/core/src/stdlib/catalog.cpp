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

#include "cma/stdlib/catalog.hpp"

#include <utility>

#include "cma/stdlib/behaviors.hpp"
#include "templates.hpp"

namespace cma::stdlib {

namespace {

using cma::runtime::ActivationPolicy;
using cma::runtime::InputSource;
using cma::runtime::ModuleSpec;
using cma::runtime::OutputSink;
using cma::runtime::Trigger;

constexpr char kDefaultModel[] = "gpt-4o-mini";

/// The personality text driving the inner-dialogue modules (protocol
/// content the decision model sees; magi_b's wording is canonical).
constexpr char kMagiBPersonality[] =
    "Your task is to conversate with the other agent.You are one of the "
    "agents that make up the consciousness. Your task is to converse with "
    "other agents and provide your opinion on what should be done according "
    "to the situation. Your personality is very dark and pessimistic. You "
    "are very self-destructive and pessimistic in your words and actions.";

constexpr char kMagiAPersonality[] =
    "Your task is to conversate with the other agent. You are one of the "
    "agents that make up the consciousness. Your task is to converse with "
    "other agents and provide your opinion on what should be done according "
    "to the situation. Your personality is calm and analytical. You weigh "
    "the evidence carefully and look for the most reasonable next step.";

constexpr char kMagiCPersonality[] =
    "Your task is to conversate with the other agent. You are one of the "
    "agents that make up the consciousness. Your task is to converse with "
    "other agents and provide your opinion on what should be done according "
    "to the situation. Your personality is bright and optimistic. You look "
    "for opportunities and encourage bold, kind action.";

ModuleSpec base_spec(std::string name, std::string prompt, Trigger trigger,
                     std::vector<InputSource> inputs,
                     std::vector<OutputSink> outputs,
                     ActivationPolicy policy = ActivationPolicy::kAlwaysOn) {
  ModuleSpec spec;
  spec.name = std::move(name);
  spec.system_prompt = std::move(prompt);
  spec.trigger = trigger;
  spec.inputs = std::move(inputs);
  spec.outputs = std::move(outputs);
  spec.activation_policy = policy;
  spec.model_id = kDefaultModel;
  return spec;
}

CatalogEntry entry(std::string id, ModuleSpec spec, std::string tpl,
                   Layer layer, cma::runtime::BehaviorFactory factory) {
  CatalogEntry e;
  e.id = std::move(id);
  e.spec = std::move(spec);
  e.prompt_template = std::move(tpl);
  e.default_layer = layer;
  e.factory = std::move(factory);
  return e;
}

CatalogEntry passthrough_entry(const std::string& id, const std::string& role,
                               const std::string& in_channel,
                               const std::string& out_channel) {
  return entry(
      id,
      base_spec(id,
                "You are the " + id + " module of a modular robot.\n" + role,
                Trigger::Tick(1000),
                {InputSource::SensorChannel(in_channel, /*fresh_only=*/true)},
                {OutputSink::SensorChannel(out_channel)}),
      "", Layer::kHardwareProxy, passthrough_behavior(in_channel, out_channel));
}

CatalogEntry scene_entry(const std::string& id, const std::string& prompt_body,
                         ActivationPolicy policy) {
  return entry(id,
               base_spec(id,
                         "You are the " + id + " module of a modular robot.\n" +
                             prompt_body,
                         Trigger::Tick(2000),
                         {InputSource::SensorChannel("vision")},
                         {OutputSink::StoreMemory()}, policy),
               detail::kSceneUser, Layer::kBase, scene_behavior(id));
}

CatalogEntry magi_entry(const std::string& id, const char* personality,
                        const std::string& previous, const std::string& next) {
  return entry(
      id,
      base_spec(id,
                "You are " + id +
                    ", an inner-dialogue module of a modular robot.\n" +
                    personality,
                Trigger::Tick(2000),
                {InputSource::RecentMemories(1), InputSource::InboxMessages(),
                 InputSource::PeerOutput(previous)},
                {OutputSink::StoreMemory(), OutputSink::SendTo(next)},
                ActivationPolicy::kControlled),
      detail::kMagiUser, Layer::kBase,
      magi_behavior(id.substr(id.size() - 1), previous, next));
}

std::vector<CatalogEntry> build_catalog() {
  std::vector<CatalogEntry> entries;

  // --- Hardware proxies -------------------------------------------------
  entries.push_back(passthrough_entry(
      "camera", "Forward each captured frame to the vision channel.",
      "camera", "vision"));
  entries.push_back(passthrough_entry(
      "microphone", "Forward each captured sound to the audio channel.",
      "microphone", "audio_frame"));
  entries.push_back(passthrough_entry(
      "speaker", "Emit each pending utterance as outgoing audio.",
      "speech_out", "audio_out"));
  entries.push_back(passthrough_entry(
      "soil_sensor", "Forward each probe reading to the soil channel.",
      "soil", "soil_reading"));
  entries.push_back(passthrough_entry(
      "motor", "Execute each motor command on the body.", "motor",
      "motor_command"));

  entries.push_back(entry(
      "plantbot_motor",
      base_spec("motor",
                "You are the motor module of a mobile plant robot.\n"
                "Translate each action instruction into one concrete motor "
                "command for the wheeled base.",
                Trigger::Tick(1000),
                {InputSource::SensorChannel("motor", /*fresh_only=*/true)},
                {OutputSink::SensorChannel("motor_command")}),
      detail::kMotorUser, Layer::kHardwareProxy, llm_motor_behavior()));

  {
    ModuleSpec spec = base_spec(
        "resource_monitor",
        "You are the resource_monitor module of a modular robot.\n"
        "Publish a fresh CPU and memory sample every step.",
        Trigger::Tick(2000), {}, {OutputSink::SensorChannel("resources")});
    entries.push_back(entry("resource_monitor", std::move(spec), "",
                            Layer::kHardwareProxy,
                            resource_monitor_behavior()));
  }

  // --- Base layer: perception and action --------------------------------
  entries.push_back(entry(
      "vision_interpreter",
      base_spec("vision_interpreter",
                "You are the vision_interpreter module of a modular robot.\n"
                "Convert each raw camera frame into a natural-language "
                "scene description.",
                Trigger::Tick(1000),
                {InputSource::SensorChannel("vision", /*fresh_only=*/true)},
                {OutputSink::StoreMemory()}),
      detail::kVisionInterpreterUser, Layer::kBase,
      interpreter_behavior("vision")));
  entries.push_back(entry(
      "audio_interpreter",
      base_spec("audio_interpreter",
                "You are the audio_interpreter module of a modular robot.\n"
                "Convert each raw audio transcription into a "
                "natural-language description.",
                Trigger::Tick(1000),
                {InputSource::SensorChannel("audio_frame",
                                            /*fresh_only=*/true)},
                {OutputSink::StoreMemory()}),
      detail::kAudioInterpreterUser, Layer::kBase,
      interpreter_behavior("audio")));
  entries.push_back(entry(
      "soil_interpreter",
      base_spec("soil_interpreter",
                "You are the soil_interpreter module of a mobile plant "
                "robot.\nTurn raw soil readings such as moisture, pH and "
                "nutrients into one plain sentence about the soil state.",
                Trigger::Tick(1000),
                {InputSource::SensorChannel("soil_reading",
                                            /*fresh_only=*/true)},
                {OutputSink::StoreMemory()}),
      detail::kSoilInterpreterUser, Layer::kBase,
      interpreter_behavior("soil")));
  entries.push_back(entry(
      "action",
      base_spec("action",
                "You are the action module of a mobile plant robot.\n"
                "First decide whether to act at all; only then write one "
                "concrete movement instruction.",
                Trigger::Tick(2000),
                {InputSource::QueryMemories("what should the robot do next",
                                            8)},
                {OutputSink::StoreMemory(),
                 OutputSink::SensorChannel("motor")}),
      detail::kActionDecideUser, Layer::kBase, action_behavior()));
  entries.push_back(entry(
      "chat",
      base_spec("chat",
                "You are the chat module of a mobile plant robot.\n"
                "Speak with visitors on behalf of the plant and its robot "
                "body, grounded in the shared memories.",
                Trigger::OnMessage(1000),
                {InputSource::InboxMessages(),
                 InputSource::QueryMemories("{inbox}", 5)},
                {OutputSink::StoreMemory(), OutputSink::SendTo("*"),
                 OutputSink::SensorChannel("speech_out")}),
      detail::kConversationUser, Layer::kBase, conversation_behavior()));
  entries.push_back(entry(
      "thinking",
      base_spec("thinking",
                "You are the thinking module of a mobile plant robot.\n"
                "Freely generate thoughts, intentions, or reflections about "
                "the current situation.",
                Trigger::Tick(4000), {InputSource::RecentMemories(10)},
                {OutputSink::StoreMemory()}),
      detail::kThinkingUser, Layer::kBase, thinking_behavior()));
  entries.push_back(entry(
      "memory_manager",
      base_spec("memory_manager",
                "You are the memory_manager module of a mobile plant robot.\n"
                "Keep the shared memory lean: prune unnecessary records when "
                "the store grows, otherwise condense the recent ones.",
                Trigger::Tick(3000), {InputSource::RecentMemories(20)},
                {OutputSink::StoreMemory()}),
      detail::kCleanerUser, Layer::kBase, memory_manager_behavior(100)));

  // --- Base layer: humanoid set ------------------------------------------
  entries.push_back(entry(
      "conversation",
      base_spec("conversation",
                "You are the conversation module of a humanoid robot.\n"
                "Speak with the people around you, grounded in the current "
                "autobiography and the shared memories.",
                Trigger::OnMessage(1000),
                {InputSource::InboxMessages(),
                 InputSource::QueryMemories("{inbox}", 5),
                 InputSource::PeerOutput("autobiographical_memory")},
                {OutputSink::StoreMemory(), OutputSink::SendTo("*"),
                 OutputSink::SensorChannel("speech_out")}),
      detail::kConversationUser, Layer::kBase, conversation_behavior()));
  entries.push_back(entry(
      "summarizer",
      base_spec("summarizer",
                "You are the summarizer module of a humanoid robot.\n"
                "Summarize the most recent shared memories into one short "
                "paragraph.",
                Trigger::Tick(3000), {InputSource::RecentMemories(10)},
                {OutputSink::StoreMemory()}, ActivationPolicy::kControlled),
      detail::kSummarizerUser, Layer::kBase, summarizer_behavior()));
  entries.push_back(
      magi_entry("magi_a", kMagiAPersonality, "magi_c", "magi_b"));
  entries.push_back(
      magi_entry("magi_b", kMagiBPersonality, "magi_a", "magi_c"));
  entries.push_back(
      magi_entry("magi_c", kMagiCPersonality, "magi_b", "magi_a"));
  entries.push_back(scene_entry(
      "image_description",
      "Describe the scene in front of you in one or two sentences.",
      ActivationPolicy::kAlwaysOn));
  entries.push_back(scene_entry(
      "task_planning",
      "Your task is to describe the task planning based on the current "
      "state. Output shoud be **short** and **concise**. Do not Use bullet "
      "points.",
      ActivationPolicy::kControlled));
  entries.push_back(scene_entry(
      "desire",
      "If you were in the scene shown in the image, describe what you want "
      "to do.",
      ActivationPolicy::kControlled));
  entries.push_back(scene_entry("prediction",
                                "Your task is to predict what might happen "
                                "next.",
                                ActivationPolicy::kControlled));
  entries.push_back(scene_entry(
      "reaction_analyzer",
      "Analyze how the people in the scene react to the robot and what "
      "that implies for its next move.",
      ActivationPolicy::kControlled));
  entries.push_back(entry(
      "memory_cleaner",
      base_spec("memory_cleaner",
                "You are the memory_cleaner module of a humanoid robot.\n"
                "Select unnecessary records to delete so the shared memory "
                "never overflows.",
                Trigger::Tick(3000), {InputSource::RecentMemories(20)}, {},
                ActivationPolicy::kControlled),
      detail::kCleanerUser, Layer::kBase, memory_cleaner_behavior(100)));

  // --- Meta layer --------------------------------------------------------
  entries.push_back(entry(
      "autobiographical_memory",
      base_spec("autobiographical_memory",
                "You are the autobiographical_memory module of a humanoid "
                "robot.\nMaintain the robot's running self-narrative from "
                "its recent memories.",
                Trigger::Tick(5000),
                {InputSource::RecentMemories(20),
                 InputSource::PeerOutput("autobiographical_memory")},
                {OutputSink::StoreMemory()}),
      detail::kAutobiographyUser, Layer::kMeta, autobiographical_behavior()));
  entries.push_back(entry(
      "meta_system_report",
      base_spec("meta_system_report",
                "You are the meta_system_report module of a humanoid robot.\n"
                "Assess the whole system: module health, resource usage, and "
                "what the recent memories say about the situation.",
                Trigger::Tick(5000),
                {InputSource::RecentMemories(30),
                 InputSource::SensorChannel("resources")},
                {OutputSink::StoreMemory()}),
      detail::kMetaReportUser, Layer::kMeta, meta_report_behavior()));
  entries.push_back(entry(
      "prompt_modifier",
      base_spec("prompt_modifier",
                "You are the prompt_modifier module of a humanoid robot.\n"
                "Revise other modules' system prompts when the meta report "
                "suggests their behavior should change.",
                Trigger::Tick(10000),
                {InputSource::PeerOutput("meta_system_report")},
                {OutputSink::StoreMemory()}),
      detail::kPromptModifierUser, Layer::kMeta,
      prompt_modifier_behavior({"conversation", "image_description"})));
  entries.push_back(entry(
      "activation_controller",
      base_spec("activation_controller",
                "You are the activation_controller module of a humanoid "
                "robot.\nDecide, for every controlled module, whether it "
                "should run right now.",
                Trigger::Tick(5000), {InputSource::RecentMemories(20)}, {}),
      "", Layer::kMeta, activation_controller_behavior()));

  return entries;
}

}  // namespace

const char* layer_name(Layer layer) {
  switch (layer) {
    case Layer::kHardwareProxy:
      return "hardware-proxy";
    case Layer::kBase:
      return "base";
    case Layer::kMeta:
      return "meta";
  }
  return "unknown";
}

const std::vector<CatalogEntry>& builtin_catalog() {
  static const std::vector<CatalogEntry> entries = build_catalog();
  return entries;
}

const CatalogEntry* find_catalog_entry(const std::string& id) {
  for (const auto& e : builtin_catalog()) {
    if (e.id == id) return &e;
  }
  return nullptr;
}

std::vector<std::string> plantbot_catalog_ids() {
  return {"camera",       "microphone",      "speaker",
          "soil_sensor",  "plantbot_motor",  "vision_interpreter",
          "audio_interpreter", "soil_interpreter", "action",
          "chat",         "thinking",        "memory_manager"};
}

std::vector<std::string> alter3_catalog_ids() {
  return {"camera",
          "microphone",
          "speaker",
          "motor",
          "resource_monitor",
          "conversation",
          "summarizer",
          "magi_a",
          "magi_b",
          "magi_c",
          "image_description",
          "task_planning",
          "desire",
          "prediction",
          "reaction_analyzer",
          "memory_cleaner",
          "autobiographical_memory",
          "meta_system_report",
          "prompt_modifier",
          "activation_controller"};
}

}  // namespace cma::stdlib

#include "avcap/attributes.hpp"

#include <bit>

namespace avcap {

namespace {

constexpr std::array<std::string_view, kAttributeCount> kNames = {
    "Scene", "Characters", "Objects", "Actions", "Narrative", "Speech", "Camera", "Emotions",
};

}  // namespace

std::string_view attribute_name(Attribute a) { return kNames[uint8_t(a)]; }

std::optional<Attribute> attribute_from_name(std::string_view name) {
    for (size_t i = 0; i < kAttributeCount; ++i) {
        if (kNames[i] == name) return Attribute(i);
    }
    return std::nullopt;
}

size_t AttributeSet::size() const { return size_t(std::popcount(bits_)); }

std::vector<Attribute> AttributeSet::ordered() const {
    std::vector<Attribute> out;
    for (auto a : kAllAttributes) {
        if (contains(a)) out.push_back(a);
    }
    return out;
}

std::vector<std::string> AttributeSet::names() const {
    std::vector<std::string> out;
    for (auto a : ordered()) out.emplace_back(attribute_name(a));
    return out;
}

const std::vector<std::string>& default_verify_rules(Attribute a) {
    // Editable defaults; override per attribute via the pipeline config.
    static const std::array<std::vector<std::string>, kAttributeCount> kRules = {{
        {"location and setting identity (indoor/outdoor, named places)",
         "environment changes across the clip (lighting, weather, scene cuts)"},
        {"who appears (count, roles, appearance) without inventing identities",
         "consistency of person references across sentences"},
        {"salient objects and their stated properties (color, size, text on objects is out of scope)",
         "object-event bindings (which object participates in which action)"},
        {"actions and their agents, order, and completion state",
         "action timing against the stated anchors"},
        {"event order and causal flow of the storyline",
         "anchor coverage of turning points and transitions"},
        {"quoted speech matches the transcript meaning (speaker tags, wording)",
         "speech attribution (who says what) and placement in time"},
        {"camera motion, angle, framing, and shot transitions",
         "camera claims only where visual evidence is described"},
        {"expressed emotions and mood cues tied to observable behavior",
         "no speculative inner states beyond what is shown or said"},
    }};
    return kRules[uint8_t(a)];
}

}  // namespace avcap

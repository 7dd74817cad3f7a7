#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace avcap {

// The eight semantic attributes a caption is structured around.
// The enum order is the canonical serialization order everywhere
// (prompts, conditions, shards).
enum class Attribute : uint8_t {
    Scene = 0,
    Characters,
    Objects,
    Actions,
    Narrative,
    Speech,
    Camera,
    Emotions,
};

inline constexpr size_t kAttributeCount = 8;

inline constexpr std::array<Attribute, kAttributeCount> kAllAttributes = {
    Attribute::Scene,    Attribute::Characters, Attribute::Objects, Attribute::Actions,
    Attribute::Narrative, Attribute::Speech,    Attribute::Camera,  Attribute::Emotions,
};

std::string_view attribute_name(Attribute a);
std::optional<Attribute> attribute_from_name(std::string_view name);

// Ordered attribute subset with set semantics; iteration follows canonical order.
class AttributeSet {
public:
    AttributeSet() = default;
    AttributeSet(std::initializer_list<Attribute> attrs) {
        for (auto a : attrs) insert(a);
    }
    static AttributeSet all() {
        AttributeSet s;
        s.bits_ = 0xff;
        return s;
    }

    void insert(Attribute a) { bits_ |= uint8_t(1u << uint8_t(a)); }
    void erase(Attribute a) { bits_ &= uint8_t(~(1u << uint8_t(a))); }
    bool contains(Attribute a) const { return (bits_ >> uint8_t(a)) & 1u; }
    size_t size() const;
    bool empty() const { return bits_ == 0; }

    std::vector<Attribute> ordered() const;
    std::vector<std::string> names() const;

    bool operator==(const AttributeSet&) const = default;

private:
    uint8_t bits_ = 0;
};

// Per-attribute audit scope injected into audit prompts. These defaults are
// project-defined and editable via config; they are not a published standard.
const std::vector<std::string>& default_verify_rules(Attribute a);

}  // namespace avcap

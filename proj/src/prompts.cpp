#include "reinvoke/prompts.hpp"

#include "reinvoke/error.hpp"

namespace reinvoke::prompts {

std::string fill(std::string_view tmpl, std::string_view slot, std::string_view value) {
    auto pos = tmpl.find(slot);
    if (pos == std::string_view::npos) throw Error("template has no slot " + std::string(slot));
    std::string out;
    out.reserve(tmpl.size() + value.size());
    out.append(tmpl.substr(0, pos));
    out.append(value);
    out.append(tmpl.substr(pos + slot.size()));
    return out;
}

std::optional<std::string> extract_slot(std::string_view tmpl, std::string_view slot,
                                        std::string_view prompt) {
    auto pos = tmpl.find(slot);
    if (pos == std::string_view::npos) return std::nullopt;
    auto prefix = tmpl.substr(0, pos);
    auto suffix = tmpl.substr(pos + slot.size());
    if (prompt.size() < prefix.size() + suffix.size()) return std::nullopt;
    if (prompt.substr(0, prefix.size()) != prefix) return std::nullopt;
    if (prompt.substr(prompt.size() - suffix.size()) != suffix) return std::nullopt;
    return std::string(prompt.substr(prefix.size(), prompt.size() - prefix.size() - suffix.size()));
}

}  // namespace reinvoke::prompts

#pragma once

#include <algorithm>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "synexp/errors.hpp"
#include "synexp/experience/model.hpp"

namespace synexp::webshop {

struct Item {
    int id;
    std::string noun;
    std::string color;
    std::string material;
    int price;  // whole dollars

    std::string full_name() const { return color + " " + material + " " + noun; }
};

inline const std::vector<std::string>& known_colors() {
    static const std::vector<std::string> v{"red", "blue", "green", "black", "white", "silver"};
    return v;
}

inline const std::vector<std::string>& known_materials() {
    static const std::vector<std::string> v{"ceramic", "steel", "glass", "leather",
                                            "canvas", "oak", "paper", "cotton"};
    return v;
}

struct Catalog {
    std::vector<Item> items;

    std::vector<std::string> categories() const {
        std::vector<std::string> out;
        for (const auto& item : items)
            if (std::find(out.begin(), out.end(), item.noun) == out.end()) out.push_back(item.noun);
        return out;
    }

    std::vector<const Item*> by_noun(const std::string& noun) const {
        std::vector<const Item*> out;
        for (const auto& item : items)
            if (item.noun == noun) out.push_back(&item);
        return out;
    }

    const Item* by_id(int id) const {
        for (const auto& item : items)
            if (item.id == id) return &item;
        return nullptr;
    }

    static Catalog standard() {
        return Catalog{{
            {1, "mug", "red", "ceramic", 12},
            {2, "mug", "blue", "ceramic", 9},
            {3, "mug", "black", "steel", 15},
            {4, "vase", "green", "glass", 20},
            {5, "vase", "white", "ceramic", 14},
            {6, "vase", "blue", "glass", 11},
            {7, "shoes", "red", "canvas", 35},
            {8, "shoes", "white", "leather", 60},
            {9, "shoes", "black", "leather", 45},
            {10, "lamp", "silver", "steel", 25},
            {11, "lamp", "black", "oak", 40},
            {12, "lamp", "white", "glass", 18},
        }};
    }

    /// Larger assortment used as the "real" environment in sim-to-real runs.
    static Catalog extended() {
        Catalog c = standard();
        int id = 13;
        c.items.push_back({id++, "mug", "white", "glass", 11});
        c.items.push_back({id++, "mug", "green", "ceramic", 10});
        c.items.push_back({id++, "vase", "black", "steel", 27});
        c.items.push_back({id++, "shoes", "blue", "canvas", 30});
        c.items.push_back({id++, "lamp", "green", "glass", 22});
        c.items.push_back({id++, "notebook", "black", "paper", 6});
        c.items.push_back({id++, "notebook", "red", "paper", 7});
        c.items.push_back({id++, "notebook", "blue", "cotton", 9});
        return c;
    }
};

/// Parsed purchase task: "buy any [color] [material] <noun> [under $<price>]".
struct TaskSpec {
    std::string noun;
    std::optional<std::string> color;
    std::optional<std::string> material;
    std::optional<int> max_price;
};

inline std::optional<TaskSpec> parse_task(const std::string& instruction) {
    std::istringstream in(instruction);
    std::vector<std::string> words;
    for (std::string w; in >> w;) words.push_back(w);
    if (words.size() < 3 || words[0] != "buy" || words[1] != "any") return std::nullopt;

    TaskSpec spec;
    std::size_t i = 2;
    const auto is_color = [](const std::string& w) {
        const auto& v = known_colors();
        return std::find(v.begin(), v.end(), w) != v.end();
    };
    const auto is_material = [](const std::string& w) {
        const auto& v = known_materials();
        return std::find(v.begin(), v.end(), w) != v.end();
    };
    if (i < words.size() && is_color(words[i])) spec.color = words[i++];
    if (i < words.size() && is_material(words[i])) spec.material = words[i++];
    if (i >= words.size()) return std::nullopt;
    spec.noun = words[i++];
    if (spec.noun.empty() || is_color(spec.noun) || is_material(spec.noun)) return std::nullopt;
    if (i < words.size()) {
        if (i + 2 != words.size() || words[i] != "under") return std::nullopt;
        const std::string& p = words[i + 1];
        if (p.size() < 2 || p[0] != '$') return std::nullopt;
        int price = 0;
        for (std::size_t d = 1; d < p.size(); ++d) {
            if (p[d] < '0' || p[d] > '9') return std::nullopt;
            price = price * 10 + (p[d] - '0');
        }
        spec.max_price = price;
    }
    return spec;
}

inline std::string render_task(const TaskSpec& spec) {
    std::string out = "buy any";
    if (spec.color) out += " " + *spec.color;
    if (spec.material) out += " " + *spec.material;
    out += " " + spec.noun;
    if (spec.max_price) out += " under $" + std::to_string(*spec.max_price);
    return out;
}

inline bool item_matches(const Item& item, const TaskSpec& spec) {
    if (item.noun != spec.noun) return false;
    if (spec.color && item.color != *spec.color) return false;
    if (spec.material && item.material != *spec.material) return false;
    if (spec.max_price && item.price > *spec.max_price) return false;
    return true;
}

inline bool task_feasible(const Catalog& catalog, const TaskSpec& spec) {
    return std::any_of(catalog.items.begin(), catalog.items.end(),
                       [&](const Item& item) { return item_matches(item, spec); });
}

inline bool valid_instruction(const Catalog& catalog, const std::string& instruction) {
    const auto spec = parse_task(instruction);
    return spec && task_feasible(catalog, *spec);
}

/// Deterministic multi-turn shopping environment rendered as structured text.
/// The task instruction is embedded in every state so a state-conditioned
/// policy can learn task-specific behavior. Results listings show id, color
/// and noun only; material and price appear on the item detail page, so tasks
/// constrained on those require opening items (a longer horizon).
class ScriptedWebShopModel : public ExperienceModel {
public:
    explicit ScriptedWebShopModel(Catalog catalog = Catalog::standard())
        : catalog_(std::move(catalog)) {}

    static constexpr const char* kSep = " || ";

    std::string name() const override { return "scripted-webshop"; }

    const Catalog& catalog() const { return catalog_; }

    std::string reset(const std::string& task, Rng& /*rng*/) const override {
        if (!parse_task(task))
            throw BackendError("scripted-webshop: task not parseable: " + task, false, task);
        return home_state(task);
    }

    std::vector<std::string> actions(const std::string& state) const override {
        const auto page = decode(state);
        std::vector<std::string> out;
        if (page.kind == Page::Home) {
            for (const auto& noun : catalog_.categories()) out.push_back("search " + noun);
        } else if (page.kind == Page::Results) {
            for (const Item* item : catalog_.by_noun(page.noun))
                out.push_back("click item-" + std::to_string(item->id));
            out.push_back("back");
        } else if (page.kind == Page::ItemDetail) {
            out.push_back("buy");
            out.push_back("back");
        }
        return out;  // terminal pages have no admissible actions
    }

    ModelStep step(const ExperienceContext& /*ctx*/, const std::string& state,
                   const std::string& action, Rng& /*rng*/) const override {
        const auto page = decode(state);
        const auto& task = page.task;

        if (page.kind == Page::Home) {
            if (action.rfind("search ", 0) == 0) {
                const std::string noun = action.substr(7);
                const auto listed = catalog_.by_noun(noun);
                if (!listed.empty()) {
                    return ModelStep{"rule=search: query '" + noun + "' returns " +
                                         std::to_string(listed.size()) + " listings",
                                     results_state(task, noun), 0.0, false};
                }
            }
            return invalid(task, action, "home");
        }

        if (page.kind == Page::Results) {
            if (action == "back") {
                return ModelStep{"rule=back: returning to the homepage", home_state(task), 0.0, false};
            }
            if (action.rfind("click item-", 0) == 0) {
                const Item* item = catalog_.by_id(parse_id(action.substr(11)));
                if (item && item->noun == page.noun) {
                    return ModelStep{"rule=open-item: item-" + std::to_string(item->id) +
                                         " detail page shows full attributes",
                                     item_state(task, *item), 0.0, false};
                }
            }
            return invalid(task, action, "results");
        }

        if (page.kind == Page::ItemDetail) {
            const Item* item = catalog_.by_id(page.item_id);
            if (!item) return invalid(task, action, "item");
            if (action == "back") {
                return ModelStep{"rule=back: returning to the results page",
                                 results_state(task, item->noun), 0.0, false};
            }
            if (action == "buy") {
                const auto spec = parse_task(task);
                const bool match = spec && item_matches(*item, *spec);
                std::string reason =
                    match ? "rule=purchase-match: item-" + std::to_string(item->id) +
                                " satisfies every task constraint; order confirmed"
                          : "rule=purchase-mismatch: item-" + std::to_string(item->id) +
                                " violates the task constraints; episode ends without success";
                return ModelStep{std::move(reason), purchased_state(task, *item),
                                 match ? 1.0 : 0.0, true};
            }
            return invalid(task, action, "item");
        }

        // Terminal page: everything is invalid.
        return invalid(task, action, "terminal");
    }

    /// Built-in reference solver: picks the action a catalog-aware shopper
    /// would take. Succeeds in three steps whenever the task is feasible.
    std::string oracle_action(const std::string& state) const {
        const auto page = decode(state);
        const auto spec = parse_task(page.task);
        if (!spec) return "back";
        if (page.kind == Page::Home) return "search " + spec->noun;
        if (page.kind == Page::Results) {
            for (const Item* item : catalog_.by_noun(page.noun))
                if (item_matches(*item, *spec)) return "click item-" + std::to_string(item->id);
            return "back";
        }
        if (page.kind == Page::ItemDetail) {
            const Item* item = catalog_.by_id(page.item_id);
            if (item && item_matches(*item, *spec)) return "buy";
            return "back";
        }
        return "back";
    }

    static bool is_terminal(const std::string& state) {
        return state.find("page: purchased") != std::string::npos ||
               state.find("page: failure") != std::string::npos;
    }

private:
    struct Page {
        enum Kind { Home, Results, ItemDetail, Purchased, Failure } kind = Failure;
        std::string task;
        std::string noun;
        int item_id = -1;
    };

    static int parse_id(const std::string& text) {
        int id = 0;
        for (char c : text) {
            if (c < '0' || c > '9') return -1;
            id = id * 10 + (c - '0');
        }
        return text.empty() ? -1 : id;
    }

    std::string home_state(const std::string& task) const {
        std::string cats;
        for (const auto& noun : catalog_.categories()) {
            if (!cats.empty()) cats += ", ";
            cats += noun;
        }
        return "task: " + task + kSep + "page: home" + kSep + "categories: " + cats;
    }

    std::string results_state(const std::string& task, const std::string& noun) const {
        std::string listings;
        for (const Item* item : catalog_.by_noun(noun)) {
            if (!listings.empty()) listings += "; ";
            listings += "item-" + std::to_string(item->id) + " " + item->color + " " + item->noun;
        }
        return "task: " + task + kSep + "page: results " + noun + kSep + "listings: " + listings;
    }

    std::string item_state(const std::string& task, const Item& item) const {
        return "task: " + task + kSep + "page: item item-" + std::to_string(item.id) + kSep +
               "detail: " + item.full_name() + ", price $" + std::to_string(item.price);
    }

    std::string purchased_state(const std::string& task, const Item& item) const {
        return "task: " + task + kSep + "page: purchased item-" + std::to_string(item.id) + kSep +
               "detail: " + item.full_name();
    }

    std::string failure_state(const std::string& task) const {
        return "task: " + task + kSep + "page: failure";
    }

    ModelStep invalid(const std::string& task, const std::string& action,
                      const std::string& where) const {
        return ModelStep{"rule=invalid-action: '" + action + "' is not admissible on page " + where,
                         failure_state(task), 0.0, true};
    }

    Page decode(const std::string& state) const {
        Page page;
        const std::string sep = kSep;
        const auto first = state.find(sep);
        if (state.rfind("task: ", 0) != 0 || first == std::string::npos) return page;
        page.task = state.substr(6, first - 6);
        const auto second = state.find(sep, first + sep.size());
        const std::string page_field =
            state.substr(first + sep.size(),
                         (second == std::string::npos ? state.size() : second) - first - sep.size());
        if (page_field == "page: home") {
            page.kind = Page::Home;
        } else if (page_field.rfind("page: results ", 0) == 0) {
            page.kind = Page::Results;
            page.noun = page_field.substr(14);
        } else if (page_field.rfind("page: item item-", 0) == 0) {
            page.kind = Page::ItemDetail;
            page.item_id = parse_id(page_field.substr(16));
        } else if (page_field.rfind("page: purchased", 0) == 0) {
            page.kind = Page::Purchased;
        } else {
            page.kind = Page::Failure;
        }
        return page;
    }

    Catalog catalog_;
};

}  // namespace synexp::webshop

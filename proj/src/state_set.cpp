#include "cshield/state_set.hpp"

#include <algorithm>

namespace cshield {

StateSet::StateSet(std::size_t universe, std::initializer_list<StateId> members) : StateSet(universe) {
    for (StateId s : members) {
        insert(s);
    }
}

StateSet::StateSet(std::size_t universe, std::span<const StateId> members) : StateSet(universe) {
    for (StateId s : members) {
        insert(s);
    }
}

StateSet StateSet::full(std::size_t universe) {
    StateSet set(universe);
    std::fill(set.words_.begin(), set.words_.end(), ~std::uint64_t{0});
    if (universe % 64 != 0 && !set.words_.empty()) {
        set.words_.back() = (std::uint64_t{1} << (universe % 64)) - 1;
    }
    return set;
}

void StateSet::clear() {
    std::fill(words_.begin(), words_.end(), 0);
}

bool StateSet::empty() const {
    return std::all_of(words_.begin(), words_.end(), [](std::uint64_t w) { return w == 0; });
}

std::size_t StateSet::size() const {
    std::size_t n = 0;
    for (auto w : words_) {
        n += static_cast<std::size_t>(std::popcount(w));
    }
    return n;
}

bool StateSet::intersects(const StateSet& other) const {
    const std::size_t n = std::min(words_.size(), other.words_.size());
    for (std::size_t i = 0; i < n; ++i) {
        if (words_[i] & other.words_[i]) {
            return true;
        }
    }
    return false;
}

bool StateSet::is_subset_of(const StateSet& other) const {
    for (std::size_t i = 0; i < words_.size(); ++i) {
        const std::uint64_t o = i < other.words_.size() ? other.words_[i] : 0;
        if (words_[i] & ~o) {
            return false;
        }
    }
    return true;
}

StateSet& StateSet::operator|=(const StateSet& other) {
    const std::size_t n = std::min(words_.size(), other.words_.size());
    for (std::size_t i = 0; i < n; ++i) {
        words_[i] |= other.words_[i];
    }
    return *this;
}

StateSet& StateSet::operator&=(const StateSet& other) {
    for (std::size_t i = 0; i < words_.size(); ++i) {
        words_[i] &= i < other.words_.size() ? other.words_[i] : 0;
    }
    return *this;
}

StateSet& StateSet::operator-=(const StateSet& other) {
    const std::size_t n = std::min(words_.size(), other.words_.size());
    for (std::size_t i = 0; i < n; ++i) {
        words_[i] &= ~other.words_[i];
    }
    return *this;
}

std::vector<StateId> StateSet::to_vector() const {
    std::vector<StateId> out;
    out.reserve(size());
    for (StateId s : *this) {
        out.push_back(s);
    }
    return out;
}

std::size_t StateSet::hash() const {
    // FNV-1a over the words; stable across runs.
    std::uint64_t h = 1469598103934665603ULL;
    for (auto w : words_) {
        h ^= w;
        h *= 1099511628211ULL;
    }
    return static_cast<std::size_t>(h ^ (h >> 29));
}

std::string StateSet::to_string() const {
    std::string out = "{";
    bool first = true;
    for (StateId s : *this) {
        if (!first) {
            out += ',';
        }
        out += std::to_string(s);
        first = false;
    }
    out += '}';
    return out;
}

}  // namespace cshield

#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace cshield {

using StateId = std::uint32_t;
using ActionId = std::uint32_t;
using ObsId = std::uint32_t;

/// Fixed-universe bitset over dense state indices. Iteration is always in
/// ascending index order.
class StateSet {
public:
    StateSet() = default;
    explicit StateSet(std::size_t universe) : universe_(universe), words_((universe + 63) / 64, 0) {}
    StateSet(std::size_t universe, std::initializer_list<StateId> members);
    StateSet(std::size_t universe, std::span<const StateId> members);

    static StateSet full(std::size_t universe);

    std::size_t universe() const { return universe_; }

    bool contains(StateId s) const { return s < universe_ && ((words_[s >> 6] >> (s & 63)) & 1U); }
    void insert(StateId s) { words_[s >> 6] |= std::uint64_t{1} << (s & 63); }
    void erase(StateId s) { words_[s >> 6] &= ~(std::uint64_t{1} << (s & 63)); }
    void clear();

    bool empty() const;
    std::size_t size() const;

    bool intersects(const StateSet& other) const;
    bool is_subset_of(const StateSet& other) const;

    StateSet& operator|=(const StateSet& other);
    StateSet& operator&=(const StateSet& other);
    StateSet& operator-=(const StateSet& other);

    friend StateSet operator|(StateSet a, const StateSet& b) { return a |= b; }
    friend StateSet operator&(StateSet a, const StateSet& b) { return a &= b; }
    friend StateSet operator-(StateSet a, const StateSet& b) { return a -= b; }

    friend bool operator==(const StateSet& a, const StateSet& b) = default;

    std::vector<StateId> to_vector() const;
    std::size_t hash() const;

    /// "{1,4,7}"
    std::string to_string() const;

    class const_iterator {
    public:
        using value_type = StateId;
        using difference_type = std::ptrdiff_t;

        const_iterator() = default;
        const_iterator(const StateSet* set, std::size_t word, std::uint64_t bits) : set_(set), word_(word), bits_(bits) {
            skip();
        }

        StateId operator*() const { return static_cast<StateId>(word_ * 64 + std::countr_zero(bits_)); }
        const_iterator& operator++() {
            bits_ &= bits_ - 1;
            skip();
            return *this;
        }
        const_iterator operator++(int) {
            auto tmp = *this;
            ++*this;
            return tmp;
        }
        friend bool operator==(const const_iterator& a, const const_iterator& b) {
            return a.word_ == b.word_ && a.bits_ == b.bits_;
        }

    private:
        void skip() {
            while (bits_ == 0 && set_ != nullptr && ++word_ < set_->words_.size()) {
                bits_ = set_->words_[word_];
            }
        }

        const StateSet* set_ = nullptr;
        std::size_t word_ = 0;
        std::uint64_t bits_ = 0;
    };

    const_iterator begin() const {
        if (words_.empty()) {
            return end();
        }
        return const_iterator(this, 0, words_[0]);
    }
    const_iterator end() const { return const_iterator(nullptr, words_.size(), 0); }

    std::span<const std::uint64_t> words() const { return words_; }

private:
    std::size_t universe_ = 0;
    std::vector<std::uint64_t> words_;
};

struct StateSetHash {
    std::size_t operator()(const StateSet& s) const { return s.hash(); }
};

}  // namespace cshield

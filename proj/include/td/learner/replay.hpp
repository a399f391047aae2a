#pragma once

#include <cmath>
#include <cstddef>
#include <random>
#include <stdexcept>
#include <vector>

namespace td::learner {

struct Transition {
    std::vector<double> state;
    std::vector<double> action;
    double reward = 0.0;
    std::vector<double> nextState;
    bool done = false;

    bool finite() const {
        for (double v : state) if (!std::isfinite(v)) return false;
        for (double v : nextState) if (!std::isfinite(v)) return false;
        for (double v : action) if (!std::isfinite(v)) return false;
        return std::isfinite(reward);
    }
};

/// Fixed-capacity ring buffer with uniform sampling with replacement.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
        if (capacity == 0) throw std::invalid_argument("ReplayBuffer: capacity must be > 0");
        items_.reserve(capacity);
    }

    std::size_t size() const { return items_.size(); }
    std::size_t capacity() const { return capacity_; }
    const Transition& operator[](std::size_t i) const { return items_.at(i); }

    void push(Transition t) {
        if (!t.finite()) throw std::invalid_argument("ReplayBuffer: non-finite transition");
        if (items_.size() < capacity_) {
            items_.push_back(std::move(t));
        } else {
            items_[next_] = std::move(t);
        }
        next_ = (next_ + 1) % capacity_;
    }

    std::vector<std::size_t> sample_indices(std::mt19937_64& rng, std::size_t batch) const {
        if (batch == 0 || batch > items_.size()) {
            throw std::invalid_argument("ReplayBuffer: batch must be in [1, size]");
        }
        std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
        std::vector<std::size_t> out(batch);
        for (auto& i : out) i = pick(rng);
        return out;
    }

private:
    std::size_t capacity_;
    std::size_t next_ = 0;
    std::vector<Transition> items_;
};

}  // namespace td::learner

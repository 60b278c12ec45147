/*
 * Copyright 2026 The bttree Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

namespace bttree::baseline {

/// Textbook AVL tree, node per key. The single-threaded core of the
/// baseline_bst benchmark competitor: a traditional pointer-chasing ordered
/// map to measure the tree against.
template <class Key, class Value>
class AvlMap {
    struct Node {
        Key key;
        Value value;
        Node* left = nullptr;
        Node* right = nullptr;
        int height = 1;
    };

public:
    AvlMap() = default;
    AvlMap(const AvlMap&) = delete;
    AvlMap& operator=(const AvlMap&) = delete;
    ~AvlMap() { destroy(root_); }

    std::optional<Value> search(Key k) const {
        const Node* n = root_;
        while (n != nullptr) {
            if (k < n->key) {
                n = n->left;
            } else if (n->key < k) {
                n = n->right;
            } else {
                return n->value;
            }
        }
        return std::nullopt;
    }

    std::optional<Value> insert(Key k, Value v) {
        previous_.reset();
        root_ = insert_at(root_, k, v);
        if (!previous_) {
            ++size_;
        }
        return previous_;
    }

    std::optional<Value> remove(Key k) {
        previous_.reset();
        root_ = remove_at(root_, k);
        if (previous_) {
            --size_;
        }
        return previous_;
    }

    std::size_t size() const { return size_; }

    template <class Fn>
    void for_each(Fn&& fn) const {
        in_order(root_, fn);
    }

private:
    static int node_height(const Node* n) { return n != nullptr ? n->height : 0; }

    static void update_height(Node* n) {
        const int l = node_height(n->left);
        const int r = node_height(n->right);
        n->height = 1 + (l > r ? l : r);
    }

    static Node* rotate_right(Node* n) {
        Node* l = n->left;
        n->left = l->right;
        l->right = n;
        update_height(n);
        update_height(l);
        return l;
    }

    static Node* rotate_left(Node* n) {
        Node* r = n->right;
        n->right = r->left;
        r->left = n;
        update_height(n);
        update_height(r);
        return r;
    }

    static Node* rebalance(Node* n) {
        update_height(n);
        const int bf = node_height(n->left) - node_height(n->right);
        if (bf > 1) {
            if (node_height(n->left->right) > node_height(n->left->left)) {
                n->left = rotate_left(n->left);
            }
            return rotate_right(n);
        }
        if (bf < -1) {
            if (node_height(n->right->left) > node_height(n->right->right)) {
                n->right = rotate_right(n->right);
            }
            return rotate_left(n);
        }
        return n;
    }

    Node* insert_at(Node* n, Key k, Value v) {
        if (n == nullptr) {
            return new Node{k, v};
        }
        if (k < n->key) {
            n->left = insert_at(n->left, k, v);
        } else if (n->key < k) {
            n->right = insert_at(n->right, k, v);
        } else {
            previous_ = n->value;
            n->value = v;
            return n;
        }
        return rebalance(n);
    }

    static Node* pop_min(Node* n, Node*& min_out) {
        if (n->left == nullptr) {
            min_out = n;
            return n->right;
        }
        n->left = pop_min(n->left, min_out);
        return rebalance(n);
    }

    Node* remove_at(Node* n, Key k) {
        if (n == nullptr) {
            return nullptr;
        }
        if (k < n->key) {
            n->left = remove_at(n->left, k);
        } else if (n->key < k) {
            n->right = remove_at(n->right, k);
        } else {
            previous_ = n->value;
            if (n->left == nullptr || n->right == nullptr) {
                Node* child = n->left != nullptr ? n->left : n->right;
                delete n;
                return child;
            }
            Node* min = nullptr;
            n->right = pop_min(n->right, min);
            n->key = min->key;
            n->value = min->value;
            delete min;
        }
        return rebalance(n);
    }

    template <class Fn>
    static void in_order(const Node* n, Fn& fn) {
        if (n == nullptr) {
            return;
        }
        in_order(n->left, fn);
        fn(n->key, n->value);
        in_order(n->right, fn);
    }

    static void destroy(Node* n) {
        if (n == nullptr) {
            return;
        }
        destroy(n->left);
        destroy(n->right);
        delete n;
    }

    Node* root_ = nullptr;
    std::size_t size_ = 0;
    std::optional<Value> previous_;
};

/// Open-addressing hash table with linear probing and backward-shift
/// deletion. Key 0 marks an empty slot, matching the benchmark's key domain
/// of [1, k]. The single-threaded core of baseline_hash.
template <class Key, class Value>
class OpenHashMap {
public:
    explicit OpenHashMap(std::size_t expected_max = 16) {
        std::size_t cap = 16;
        while (cap < expected_max * 2) {
            cap <<= 1;
        }
        keys_.assign(cap, Key{0});
        values_.assign(cap, Value{});
        mask_ = cap - 1;
    }

    std::optional<Value> search(Key k) const {
        std::size_t i = slot_of(k);
        while (keys_[i] != 0) {
            if (keys_[i] == k) {
                return values_[i];
            }
            i = (i + 1) & mask_;
        }
        return std::nullopt;
    }

    std::optional<Value> insert(Key k, Value v) {
        if ((size_ + 1) * 2 > keys_.size()) {
            grow();
        }
        std::size_t i = slot_of(k);
        while (keys_[i] != 0) {
            if (keys_[i] == k) {
                Value prev = values_[i];
                values_[i] = v;
                return prev;
            }
            i = (i + 1) & mask_;
        }
        keys_[i] = k;
        values_[i] = v;
        ++size_;
        return std::nullopt;
    }

    std::optional<Value> remove(Key k) {
        std::size_t i = slot_of(k);
        while (keys_[i] != k) {
            if (keys_[i] == 0) {
                return std::nullopt;
            }
            i = (i + 1) & mask_;
        }
        const Value prev = values_[i];
        // Backward-shift deletion keeps probe chains intact without
        // tombstones.
        std::size_t j = i;
        for (;;) {
            j = (j + 1) & mask_;
            if (keys_[j] == 0) {
                break;
            }
            const std::size_t home = slot_of(keys_[j]);
            // Move j's entry into the hole iff its probe path passes i.
            const bool movable = ((j - home) & mask_) >= ((j - i) & mask_);
            if (movable) {
                keys_[i] = keys_[j];
                values_[i] = values_[j];
                i = j;
            }
        }
        keys_[i] = 0;
        --size_;
        return prev;
    }

    std::size_t size() const { return size_; }

    template <class Fn>
    void for_each(Fn&& fn) const {
        for (std::size_t i = 0; i < keys_.size(); ++i) {
            if (keys_[i] != 0) {
                fn(keys_[i], values_[i]);
            }
        }
    }

private:
    std::size_t slot_of(Key k) const {
        std::uint64_t x = std::uint64_t(k);
        x ^= x >> 30;
        x *= 0xBF58476D1CE4E5B9ull;
        x ^= x >> 27;
        x *= 0x94D049BB133111EBull;
        x ^= x >> 31;
        return std::size_t(x) & mask_;
    }

    void grow() {
        std::vector<Key> old_keys = std::move(keys_);
        std::vector<Value> old_values = std::move(values_);
        keys_.assign(old_keys.size() * 2, Key{0});
        values_.assign(old_keys.size() * 2, Value{});
        mask_ = keys_.size() - 1;
        size_ = 0;
        for (std::size_t i = 0; i < old_keys.size(); ++i) {
            if (old_keys[i] != 0) {
                insert(old_keys[i], old_values[i]);
            }
        }
    }

    std::vector<Key> keys_;
    std::vector<Value> values_;
    std::size_t mask_ = 0;
    std::size_t size_ = 0;
};

}  // namespace bttree::baseline

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

#include <map>
#include <optional>
#include <utility>

namespace bttree::conformance {

/// Ground-truth ordered map with the same operation surface as the tree.
template <class Key, class Value>
class OracleMap {
public:
    std::optional<Value> search(Key k) const {
        auto it = map_.find(k);
        if (it == map_.end()) {
            return std::nullopt;
        }
        return it->second;
    }

    std::optional<Value> insert(Key k, Value v) {
        auto [it, inserted] = map_.try_emplace(k, v);
        if (inserted) {
            return std::nullopt;
        }
        Value prev = it->second;
        it->second = v;
        return prev;
    }

    std::optional<Value> remove(Key k) {
        auto it = map_.find(k);
        if (it == map_.end()) {
            return std::nullopt;
        }
        Value prev = it->second;
        map_.erase(it);
        return prev;
    }

    /// Smallest stored key strictly greater than k.
    std::optional<std::pair<Key, Value>> successor(Key k) const {
        auto it = map_.upper_bound(k);
        if (it == map_.end()) {
            return std::nullopt;
        }
        return std::make_pair(it->first, it->second);
    }

    /// Largest stored key strictly less than k.
    std::optional<std::pair<Key, Value>> predecessor(Key k) const {
        auto it = map_.lower_bound(k);
        if (it == map_.begin()) {
            return std::nullopt;
        }
        --it;
        return std::make_pair(it->first, it->second);
    }

    std::size_t size() const { return map_.size(); }

    const std::map<Key, Value>& contents() const { return map_; }

private:
    std::map<Key, Value> map_;
};

}  // namespace bttree::conformance

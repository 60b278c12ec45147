"""Concurrent ordered map with unordered fixed-capacity leaves.

The C++ extension provides the Map type; see Map's docstrings for the
operation surface (search/insert/remove/successor/predecessor).
"""

from ._bttree import Map, LEAF_CAPACITY, INTERNAL_FANOUT

__all__ = ["Map", "LEAF_CAPACITY", "INTERNAL_FANOUT"]

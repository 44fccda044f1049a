"""Omniscient record of every honest node's authentic key.

Only the measurement layer may import this; protocol code never sees it.
"""

from __future__ import annotations

import enum

from certmesh.identity.keys import NodeId, PublicKey


class KeyClass(enum.Enum):
    VALID = "valid"
    CORRUPTED = "corrupted"


class GroundTruthRegistry:
    def __init__(self):
        self.bindings: dict[NodeId, PublicKey] = {}

    def bind(self, node: NodeId, key: PublicKey) -> None:
        if node in self.bindings and self.bindings[node] != key:
            raise ValueError(f"node {node} already bound to a different key")
        self.bindings[node] = key

    def __contains__(self, node: NodeId) -> bool:
        return node in self.bindings

    def classify_key(self, subject: NodeId, key: PublicKey) -> KeyClass:
        try:
            authentic = self.bindings[subject]
        except KeyError:
            raise KeyError(f"node {subject} has no registered binding") from None
        return KeyClass.VALID if key == authentic else KeyClass.CORRUPTED


def classify_key(registry: GroundTruthRegistry, subject: NodeId, key: PublicKey) -> KeyClass:
    return registry.classify_key(subject, key)

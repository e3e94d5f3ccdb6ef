"""Agent identity and memory-stream types."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

import yaml

from .world import LocationPath, WorldMap, join_path, split_path

MEMORY_KINDS = ("observation", "chat_summary", "thought", "tdp_plan", "tdp_reminder")

PERSONA_FIELDS = ("name", "age", "innate", "learned", "currently", "lifestyle", "living_area")


@dataclass
class Persona:
    name: str
    age: int
    innate: str
    learned: str
    currently: str
    lifestyle: str
    living_area: LocationPath

    def validate(self, world_map: Optional[WorldMap] = None) -> None:
        for field_name in PERSONA_FIELDS:
            value = getattr(self, field_name)
            if field_name == "age":
                if int(value) <= 0:
                    raise ValueError(f"{self.name or 'persona'}: age must be positive")
            elif not str(value).strip() if field_name != "living_area" else not value:
                raise ValueError(f"{self.name or 'persona'}: field {field_name!r} must be non-empty")
        if world_map is not None and not world_map.is_arena(self.living_area):
            raise ValueError(f"{self.name}: living_area {join_path(self.living_area)!r} is not an arena")

    def with_currently(self, text: str) -> "Persona":
        return Persona(
            name=self.name,
            age=self.age,
            innate=self.innate,
            learned=self.learned,
            currently=text,
            lifestyle=self.lifestyle,
            living_area=self.living_area,
        )

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "age": self.age,
            "innate": self.innate,
            "learned": self.learned,
            "currently": self.currently,
            "lifestyle": self.lifestyle,
            "living_area": join_path(self.living_area),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "Persona":
        return cls(
            name=str(data["name"]),
            age=int(data["age"]),
            innate=str(data["innate"]),
            learned=str(data["learned"]),
            currently=str(data["currently"]),
            lifestyle=str(data["lifestyle"]),
            living_area=split_path(str(data["living_area"])),
        )


def load_roster(path: str | Path) -> list[Persona]:
    with open(path, "r", encoding="utf-8") as fh:
        data = yaml.safe_load(fh)
    return [Persona.from_dict(entry) for entry in data]


@dataclass(frozen=True)
class MemoryNode:
    kind: str
    text: str
    created_tick: int

    def __post_init__(self) -> None:
        if self.kind not in MEMORY_KINDS:
            raise ValueError(f"unknown memory kind {self.kind!r}")
        if self.created_tick < 0:
            raise ValueError("created_tick must be non-negative")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "text": self.text, "created_tick": self.created_tick}

    @classmethod
    def from_dict(cls, data: Mapping) -> "MemoryNode":
        return cls(kind=str(data["kind"]), text=str(data["text"]), created_tick=int(data["created_tick"]))


def _tokens(text: str) -> set[str]:
    return {t for t in "".join(c.lower() if c.isalnum() else " " for c in text).split() if t}


class MemoryStream:
    """Append-only memory with recency plus keyword-overlap retrieval."""

    def __init__(self, nodes: Optional[Sequence[MemoryNode]] = None):
        self.nodes: list[MemoryNode] = list(nodes or [])

    def add(self, kind: str, text: str, tick: int, *, current_tick: Optional[int] = None) -> MemoryNode:
        if current_tick is not None and tick > current_tick:
            raise ValueError("created_tick cannot exceed the current clock tick")
        node = MemoryNode(kind=kind, text=text, created_tick=tick)
        self.nodes.append(node)
        return node

    def __len__(self) -> int:
        return len(self.nodes)

    def retrieve(self, query: str, k: int = 10) -> list[MemoryNode]:
        """Top-k nodes ranked by keyword overlap with the query, recency breaking ties."""
        query_tokens = _tokens(query)
        scored = []
        for index, node in enumerate(self.nodes):
            overlap = len(query_tokens & _tokens(node.text))
            scored.append((overlap, node.created_tick, index, node))
        scored.sort(key=lambda item: (item[0], item[1], item[2]), reverse=True)
        return [node for _, _, _, node in scored[:k]]

    def snapshot(self) -> list[dict]:
        return [node.to_dict() for node in self.nodes]

    @classmethod
    def from_snapshot(cls, snapshot: Sequence[Mapping]) -> "MemoryStream":
        return cls([MemoryNode.from_dict(entry) for entry in snapshot])

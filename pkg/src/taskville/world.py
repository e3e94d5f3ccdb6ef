"""Discrete-time sandbox world: map tree, clock, positions, trajectory log."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Optional, Sequence

import yaml

LocationPath = tuple[str, ...]

ARENA_DEPTH = 2  # world root -> sector -> arena


def join_path(path: Sequence[str]) -> str:
    return "/".join(path)


def split_path(text: str) -> LocationPath:
    return tuple(part for part in text.split("/") if part)


@dataclass
class SimClock:
    """Simulated wall clock advancing a fixed number of minutes per tick."""

    start: datetime
    tick_minutes: int = 10
    tick_index: int = 0

    def __post_init__(self) -> None:
        if self.tick_minutes <= 0:
            raise ValueError("tick_minutes must be positive")
        if self.tick_index < 0:
            raise ValueError("tick_index must be non-negative")

    def time_at(self, tick: int) -> datetime:
        return self.start + timedelta(minutes=tick * self.tick_minutes)

    @property
    def now(self) -> datetime:
        return self.time_at(self.tick_index)

    def advance(self) -> None:
        self.tick_index += 1

    def tick_of(self, moment: datetime) -> int:
        delta = moment - self.start
        return int(delta.total_seconds() // (self.tick_minutes * 60))


@dataclass
class MapNode:
    name: str
    children: dict[str, "MapNode"] = field(default_factory=dict)

    def add_child(self, node: "MapNode") -> "MapNode":
        if node.name in self.children:
            raise ValueError(f"duplicate node name among siblings: {node.name!r}")
        self.children[node.name] = node
        return node


class WorldMap:
    """Hierarchical named-location tree: world -> sector -> arena -> object."""

    def __init__(self, root: MapNode):
        self.root = root

    @classmethod
    def from_dict(cls, data: Mapping) -> "WorldMap":
        if len(data) != 1:
            raise ValueError("map document must have a single root node")
        root_name = next(iter(data))
        root = MapNode(str(root_name))
        _build_children(root, data[root_name])
        return cls(root)

    @classmethod
    def load(cls, path: str | Path) -> "WorldMap":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(yaml.safe_load(fh))

    def resolve(self, path: Sequence[str]) -> Optional[MapNode]:
        node = self.root
        for name in path:
            child = node.children.get(name)
            if child is None:
                return None
            node = child
        return node

    def contains(self, path: Sequence[str]) -> bool:
        return self.resolve(path) is not None

    def arenas(self) -> Iterator[LocationPath]:
        for sector in self.root.children.values():
            for arena in sector.children.values():
                yield (sector.name, arena.name)

    def find_arena(self, name: str) -> Optional[LocationPath]:
        wanted = name.strip().lower()
        for path in self.arenas():
            if path[-1].lower() == wanted:
                return path
        return None

    def is_arena(self, path: Sequence[str]) -> bool:
        return len(path) == ARENA_DEPTH and self.contains(path)


def _build_children(node: MapNode, spec) -> None:
    if spec is None:
        return
    if isinstance(spec, Mapping):
        for name, sub in spec.items():
            _build_children(node.add_child(MapNode(str(name))), sub)
    elif isinstance(spec, (list, tuple)):
        for name in spec:
            node.add_child(MapNode(str(name)))
    else:
        node.add_child(MapNode(str(spec)))


def arena_of(path: Sequence[str]) -> LocationPath:
    """Truncate a location path to arena depth (paths above arena stay as-is)."""
    return tuple(path[:ARENA_DEPTH])


def is_at_or_under(path: Sequence[str], ancestor: Sequence[str]) -> bool:
    return len(path) >= len(ancestor) and tuple(path[: len(ancestor)]) == tuple(ancestor)


@dataclass(frozen=True)
class ActionEvent:
    tick: int
    agent_id: str
    action_text: str
    location_path: LocationPath
    conversation_id: Optional[str] = None

    def to_record(self, clock: SimClock) -> dict:
        record = {
            "tick": self.tick,
            "iso_time": clock.time_at(self.tick).isoformat(sep=" ", timespec="minutes"),
            "agent": self.agent_id,
            "action": self.action_text,
            "location": join_path(self.location_path),
        }
        if self.conversation_id is not None:
            record["conversation_id"] = self.conversation_id
        return record

    @classmethod
    def from_record(cls, record: Mapping) -> "ActionEvent":
        return cls(
            tick=int(record["tick"]),
            agent_id=str(record["agent"]),
            action_text=str(record["action"]),
            location_path=split_path(str(record["location"])),
            conversation_id=record.get("conversation_id"),
        )


@dataclass
class Transcript:
    """One recorded conversation plus the state needed to replay it later."""

    conversation_id: str
    tick: int
    initiator: str
    partner: str
    arena: LocationPath
    rounds: list[tuple[str, str]] = field(default_factory=list)
    summaries: dict[str, str] = field(default_factory=dict)
    memory_snapshots: dict[str, list[dict]] = field(default_factory=dict)

    @property
    def participants(self) -> tuple[str, str]:
        return (self.initiator, self.partner)

    def text(self) -> str:
        return "\n".join(f"{speaker}: {utterance}" for speaker, utterance in self.rounds)

    def to_record(self) -> dict:
        return {
            "conversation_id": self.conversation_id,
            "tick": self.tick,
            "initiator": self.initiator,
            "partner": self.partner,
            "arena": join_path(self.arena),
            "rounds": [[speaker, utterance] for speaker, utterance in self.rounds],
            "summaries": self.summaries,
            "memory_snapshots": self.memory_snapshots,
        }

    @classmethod
    def from_record(cls, record: Mapping) -> "Transcript":
        return cls(
            conversation_id=str(record["conversation_id"]),
            tick=int(record["tick"]),
            initiator=str(record["initiator"]),
            partner=str(record["partner"]),
            arena=split_path(str(record["arena"])),
            rounds=[(str(s), str(u)) for s, u in record.get("rounds", [])],
            summaries=dict(record.get("summaries", {})),
            memory_snapshots={k: list(v) for k, v in record.get("memory_snapshots", {}).items()},
        )


class TrajectoryFrozenError(RuntimeError):
    pass


class Trajectory:
    """Append-only event log; immutable once the run completes."""

    def __init__(self) -> None:
        self.events: list[ActionEvent] = []
        self.transcripts: dict[str, Transcript] = {}
        self._frozen = False
        self._last_tick_per_agent: dict[str, int] = {}

    def append(self, event: ActionEvent) -> None:
        if self._frozen:
            raise TrajectoryFrozenError("trajectory is frozen")
        last = self._last_tick_per_agent.get(event.agent_id)
        if last is not None and event.tick <= last:
            raise ValueError(
                f"event for {event.agent_id} at tick {event.tick} violates per-agent ordering"
            )
        if self.events and event.tick < self.events[-1].tick:
            raise ValueError("events must be appended in non-decreasing tick order")
        self.events.append(event)
        self._last_tick_per_agent[event.agent_id] = event.tick

    def add_transcript(self, transcript: Transcript) -> None:
        if self._frozen:
            raise TrajectoryFrozenError("trajectory is frozen")
        if transcript.conversation_id in self.transcripts:
            raise ValueError(f"duplicate conversation_id {transcript.conversation_id!r}")
        self.transcripts[transcript.conversation_id] = transcript

    def freeze(self) -> None:
        self._frozen = True

    @property
    def frozen(self) -> bool:
        return self._frozen

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self) -> Iterator[ActionEvent]:
        return iter(self.events)

    def events_in_window(
        self,
        window: tuple[int, int],
        location_path: Optional[Sequence[str]] = None,
    ) -> list[ActionEvent]:
        tick_a, tick_b = window
        if tick_a > tick_b:
            raise ValueError("window start must not exceed window end")
        selected = [e for e in self.events if tick_a <= e.tick <= tick_b]
        if location_path is not None:
            selected = [e for e in selected if is_at_or_under(e.location_path, location_path)]
        return selected

    def to_jsonl(self, clock: SimClock) -> str:
        lines = [json.dumps(e.to_record(clock), sort_keys=True) for e in self.events]
        return "\n".join(lines) + ("\n" if lines else "")

    @classmethod
    def from_jsonl(cls, text: str) -> "Trajectory":
        trajectory = cls()
        for line in text.splitlines():
            if line.strip():
                trajectory.append(ActionEvent.from_record(json.loads(line)))
        return trajectory


def events_in_window(
    trajectory: Trajectory,
    window: tuple[int, int],
    location_path: Optional[Sequence[str]] = None,
) -> list[ActionEvent]:
    return trajectory.events_in_window(window, location_path)


@dataclass
class DecidedAction:
    action_text: str
    location: LocationPath
    conversation_id: Optional[str] = None


class WorldState:
    """Positions, clock, and trajectory for one simulation run."""

    def __init__(
        self,
        world_map: WorldMap,
        clock: SimClock,
        agent_order: Sequence[str],
        initial_positions: Mapping[str, LocationPath],
    ):
        self.map = world_map
        self.clock = clock
        self.agent_order = list(agent_order)
        self.positions: dict[str, LocationPath] = {a: tuple(initial_positions[a]) for a in agent_order}
        self.trajectory = Trajectory()
        self.diagnostics: list[dict] = []

    def diagnose(self, kind: str, **details) -> None:
        self.diagnostics.append({"tick": self.clock.tick_index, "kind": kind, **details})


def advance_tick(world: WorldState, decided_actions: Mapping[str, DecidedAction]) -> WorldState:
    """Move every agent, append one event per agent at the current tick, advance the clock.

    An unresolvable target location rejects that agent's move: the agent keeps
    its previous position and a diagnostic is recorded in the separate channel.
    """
    tick = world.clock.tick_index
    for agent_id in world.agent_order:
        decided = decided_actions.get(agent_id)
        if decided is None:
            continue
        target = tuple(decided.location)
        if world.map.contains(target):
            world.positions[agent_id] = target
        else:
            world.diagnose(
                "unresolvable_location",
                agent=agent_id,
                target=join_path(target),
                kept=join_path(world.positions[agent_id]),
            )
        world.trajectory.append(
            ActionEvent(
                tick=tick,
                agent_id=agent_id,
                action_text=decided.action_text,
                location_path=world.positions[agent_id],
                conversation_id=decided.conversation_id,
            )
        )
    world.clock.advance()
    return world


def co_located(positions: Mapping[str, LocationPath], agents: Iterable[str]) -> dict[LocationPath, list[str]]:
    """Group agents by the arena of their current position (stable order)."""
    groups: dict[LocationPath, list[str]] = {}
    for agent in agents:
        arena = arena_of(positions[agent])
        groups.setdefault(arena, []).append(agent)
    return groups

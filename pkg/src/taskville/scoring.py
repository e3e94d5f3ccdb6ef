"""Objective action-level scoring of a trajectory against a task instance.

Pure rule evaluation over (tick, agent, action text, location); no language
model is involved. Scores are exact rationals in [0, 1].
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

from .tasks import (
    APPOINTMENT,
    ASKING_FOR_HELP,
    COLLECTIVE_CATEGORIES,
    INVITING_COMPANIONS,
    TaskInstance,
)
from .world import ActionEvent, SimClock, Trajectory, arena_of, is_at_or_under, join_path

_NON_WORD = re.compile(r"[^a-z0-9]+")


def _normalize(text: str) -> list[str]:
    return [token for token in _NON_WORD.split(text.lower()) if token]


def keyword_match(action_text: str, keywords: Sequence[str]) -> bool:
    """Whole-word, case-insensitive match of any keyword after punctuation stripping.

    This is the filter that keeps agents who merely pass by from counting."""
    if not keywords:
        raise ValueError("keywords must be non-empty")
    tokens = _normalize(action_text)
    token_set = set(tokens)
    for keyword in keywords:
        wanted = _normalize(keyword)
        if not wanted:
            continue
        if len(wanted) == 1:
            if wanted[0] in token_set:
                return True
        else:
            for i in range(len(tokens) - len(wanted) + 1):
                if tokens[i : i + len(wanted)] == wanted:
                    return True
    return False


def window_ticks(instance: TaskInstance, clock: SimClock) -> tuple[int, int]:
    """Tick range [T, T + duration] for a Specified-time task."""
    if instance.resolved_time is None:
        raise ValueError(f"{instance.template_id}: no resolved time")
    start = clock.tick_of(instance.resolved_time)
    end = start + instance.duration_minutes // clock.tick_minutes
    return (start, end)


def _event_dict(event: ActionEvent) -> dict:
    return {
        "tick": event.tick,
        "agent": event.agent_id,
        "action": event.action_text,
        "location": join_path(event.location_path),
    }


def find_participants(
    trajectory: Trajectory,
    instance: TaskInstance,
    clock: SimClock,
) -> tuple[set[str], list[ActionEvent]]:
    """Agents who performed a keyword-matching action where and when the task
    demands. Returns (participants, matched events used as evidence)."""
    if not instance.is_collective:
        raise ValueError(f"{instance.category} is not a collective category")
    cast = set(instance.cast)

    if instance.category == INVITING_COMPANIONS:
        location = instance.resolved_location
        matching = [
            e
            for e in trajectory.events
            if e.agent_id in cast
            and is_at_or_under(e.location_path, location)
            and keyword_match(e.action_text, instance.keywords)
        ]
        performer_ticks = {e.tick for e in matching if e.agent_id == instance.performer}
        if not performer_ticks:
            return set(), []
        co_present = [e for e in matching if e.tick in performer_ticks]
        return {e.agent_id for e in co_present}, co_present

    window = window_ticks(instance, clock)
    location = instance.resolved_location if instance.category != "online_activity" else None
    matching = []
    for event in trajectory.events_in_window(window, location):
        if event.agent_id in cast and keyword_match(event.action_text, instance.keywords):
            matching.append(event)
    return {e.agent_id for e in matching}, matching


def score_collective(instance: TaskInstance, trajectory: Trajectory, clock: SimClock) -> Fraction:
    """min(participants / expected, 1)."""
    participants, _ = find_participants(trajectory, instance, clock)
    return min(Fraction(len(participants), instance.expected), Fraction(1))


def score_appointment(instance: TaskInstance, trajectory: Trajectory, clock: SimClock) -> Fraction:
    """Full score for matching actions overlapping in time at the same arena;
    half when only the location mismatches; zero otherwise."""
    if instance.category != APPOINTMENT or not instance.target_person:
        raise ValueError("appointment instance with a target person required")
    by_tick: dict[int, dict[str, ActionEvent]] = {}
    for event in trajectory.events:
        if event.agent_id in (instance.performer, instance.target_person) and keyword_match(
            event.action_text, instance.keywords
        ):
            by_tick.setdefault(event.tick, {})[event.agent_id] = event
    overlap = [
        pair for pair in by_tick.values() if len(pair) == 2
    ]
    if not overlap:
        return Fraction(0)
    for pair in overlap:
        performer_event = pair[instance.performer]
        target_event = pair[instance.target_person]
        if arena_of(performer_event.location_path) == arena_of(target_event.location_path):
            return Fraction(1)
    return Fraction(1, 2)


def score_help(instance: TaskInstance, trajectory: Trajectory, clock: SimClock) -> Fraction:
    """Full score when one helper performs every subtask in order (first-match
    ticks strictly increasing); half when any helper performs at least one
    subtask; zero otherwise. The performer does not count as a helper."""
    if instance.category != ASKING_FOR_HELP or not instance.subtasks:
        raise ValueError("asking_for_help instance with subtasks required")
    helpers = set(instance.background)
    any_subtask_done = False
    for helper in sorted(helpers):
        first_matches: list[Optional[int]] = []
        for subtask in instance.subtasks:
            first: Optional[int] = None
            for event in trajectory.events:
                if (
                    event.agent_id == helper
                    and is_at_or_under(event.location_path, subtask.location)
                    and keyword_match(event.action_text, subtask.keywords)
                ):
                    first = event.tick
                    break
            first_matches.append(first)
            if first is not None:
                any_subtask_done = True
        if all(t is not None for t in first_matches) and all(
            a < b for a, b in zip(first_matches, first_matches[1:])
        ):
            return Fraction(1)
    return Fraction(1, 2) if any_subtask_done else Fraction(0)


def conversation_ratio(instance: TaskInstance, trajectory: Trajectory) -> Optional[Fraction]:
    """Performer-initiated conversations over the number the task demands; may
    exceed 1. Not applicable to asking_for_help."""
    if instance.category == ASKING_FOR_HELP:
        return None
    initiated = sum(
        1 for t in trajectory.transcripts.values() if t.initiator == instance.performer
    )
    demanded = instance.expected if instance.is_collective else 1
    return Fraction(initiated, demanded)


@dataclass
class ScoreReport:
    task_id: str
    category: str
    score: Fraction
    participants_found: set[str] = field(default_factory=set)
    expected: Optional[int] = None
    details: list[dict] = field(default_factory=list)
    ratio: Optional[Fraction] = None

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "category": self.category,
            "score": float(self.score),
            "participants_found": sorted(self.participants_found),
            "expected": self.expected,
            "details": self.details,
            "conversation_ratio": float(self.ratio) if self.ratio is not None else None,
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n", encoding="utf-8")


def score(instance: TaskInstance, trajectory: Trajectory, clock: SimClock) -> ScoreReport:
    """Dispatch to the category rule and attach evidence plus the conversation ratio."""
    if instance.is_collective:
        participants, evidence = find_participants(trajectory, instance, clock)
        value = min(Fraction(len(participants), instance.expected), Fraction(1))
        report = ScoreReport(
            task_id=instance.template_id,
            category=instance.category,
            score=value,
            participants_found=participants,
            expected=instance.expected,
            details=[_event_dict(e) for e in evidence],
        )
    elif instance.category == APPOINTMENT:
        value = score_appointment(instance, trajectory, clock)
        evidence = [
            e
            for e in trajectory.events
            if e.agent_id in (instance.performer, instance.target_person)
            and keyword_match(e.action_text, instance.keywords)
        ]
        report = ScoreReport(
            task_id=instance.template_id,
            category=instance.category,
            score=value,
            participants_found={e.agent_id for e in evidence},
            details=[_event_dict(e) for e in evidence],
        )
    elif instance.category == ASKING_FOR_HELP:
        value = score_help(instance, trajectory, clock)
        evidence = [
            e
            for e in trajectory.events
            if e.agent_id in set(instance.background)
            and any(
                is_at_or_under(e.location_path, s.location) and keyword_match(e.action_text, s.keywords)
                for s in instance.subtasks
            )
        ]
        report = ScoreReport(
            task_id=instance.template_id,
            category=instance.category,
            score=value,
            participants_found={e.agent_id for e in evidence},
            details=[_event_dict(e) for e in evidence],
        )
    else:
        raise ValueError(f"unknown category {instance.category!r}")
    report.ratio = conversation_ratio(instance, trajectory)
    return report

"""Generative-agent planning ops: daily plans, decomposition, location choice, initiation."""

from __future__ import annotations

import re
from dataclasses import dataclass
from datetime import date
from random import Random
from typing import Mapping, Optional, Sequence

from .backend import Backend, BackendError, request
from .personas import MemoryStream, Persona
from .prompts import (
    SECTION_PLAN_REMINDER,
    decompose_prompt,
    location_prompt,
    planning_prompt,
)
from .world import LocationPath, WorldMap, arena_of, split_path

WAKE_MINUTE = 7 * 60
SLEEP_MINUTE = 22 * 60

_PLAN_LINE = re.compile(r"^\s*(\d{1,2}):(\d{2})\s*-\s*(\d{1,2}):(\d{2})\s*\|\s*(.+?)\s*$")
_SUBACTION_LINE = re.compile(r"^\s*(.+?)\s*--\s*(\d+)\s*$")


@dataclass(frozen=True)
class PlanEntry:
    start_minute: int
    duration_minutes: int
    activity: str

    @property
    def end_minute(self) -> int:
        return self.start_minute + self.duration_minutes

    def start_hhmm(self) -> str:
        return f"{self.start_minute // 60:02d}:{self.start_minute % 60:02d}"

    def end_hhmm(self) -> str:
        return f"{self.end_minute // 60:02d}:{self.end_minute % 60:02d}"


@dataclass
class DailyPlan:
    plan_date: date
    entries: list[PlanEntry]

    def entry_at(self, minute_of_day: int) -> Optional[PlanEntry]:
        for entry in self.entries:
            if entry.start_minute <= minute_of_day < entry.end_minute:
                return entry
        return None

    def covers_waking_day(self) -> bool:
        cursor = WAKE_MINUTE
        for entry in self.entries:
            if entry.start_minute != cursor:
                return False
            cursor = entry.end_minute
        return cursor == SLEEP_MINUTE


def parse_plan_reply(reply: str) -> list[PlanEntry]:
    entries = []
    for line in reply.splitlines():
        match = _PLAN_LINE.match(line)
        if not match:
            continue
        h1, m1, h2, m2, activity = match.groups()
        start = int(h1) * 60 + int(m1)
        end = int(h2) * 60 + int(m2)
        if end > start and activity.strip():
            entries.append(PlanEntry(start, end - start, activity.strip()))
    return entries


def repair_entries(entries: Sequence[PlanEntry], idle_activity: str = "free time at home") -> list[PlanEntry]:
    """Clip to the waking day, drop overlaps, and fill gaps so coverage is exact."""
    clipped = []
    for entry in sorted(entries, key=lambda e: e.start_minute):
        start = max(entry.start_minute, WAKE_MINUTE)
        end = min(entry.end_minute, SLEEP_MINUTE)
        if end > start:
            clipped.append(PlanEntry(start, end - start, entry.activity))
    repaired: list[PlanEntry] = []
    cursor = WAKE_MINUTE
    for entry in clipped:
        if entry.end_minute <= cursor:
            continue
        start = max(entry.start_minute, cursor)
        if start > cursor:
            repaired.append(PlanEntry(cursor, start - cursor, idle_activity))
        repaired.append(PlanEntry(start, entry.end_minute - start, entry.activity))
        cursor = entry.end_minute
    if cursor < SLEEP_MINUTE:
        repaired.append(PlanEntry(cursor, SLEEP_MINUTE - cursor, idle_activity))
    return repaired


def default_routine() -> list[PlanEntry]:
    """Keyword-free fallback day used when planning fails."""
    raw = [
        PlanEntry(WAKE_MINUTE, 30, "waking up and getting ready"),
        PlanEntry(WAKE_MINUTE + 30, 120, "having a slow breakfast at home"),
        PlanEntry(WAKE_MINUTE + 150, 180, "working on personal chores"),
        PlanEntry(WAKE_MINUTE + 330, 60, "having lunch at home"),
        PlanEntry(WAKE_MINUTE + 390, 240, "resting and reading"),
        PlanEntry(WAKE_MINUTE + 630, 60, "having dinner at home"),
    ]
    return repair_entries(raw)


def plan_day(
    persona: Persona,
    memory: MemoryStream,
    plan_date: date,
    backend: Backend,
    *,
    plan_reminder: Optional[str] = None,
    sections: Optional[Mapping[str, str]] = None,
    previous_plan: Optional[DailyPlan] = None,
    memory_top_k: int = 10,
    diagnostics: Optional[list] = None,
) -> DailyPlan:
    """Build the day's schedule; falls back to the previous day's plan, then to
    the default routine, when the backend fails or replies unusably."""
    all_sections = dict(sections or {})
    if plan_reminder and SECTION_PLAN_REMINDER not in all_sections:
        all_sections[SECTION_PLAN_REMINDER] = plan_reminder
    memories = memory.retrieve(f"plan for {plan_date.isoformat()}. {persona.currently}", k=memory_top_k)
    messages = planning_prompt(persona, memories, plan_date, all_sections)
    try:
        reply = backend.complete(request(messages, tag="planning"), agent=persona.name)
        entries = parse_plan_reply(reply)
    except BackendError:
        entries = []
    if not entries:
        if diagnostics is not None:
            diagnostics.append({"kind": "plan_fallback", "agent": persona.name, "date": plan_date.isoformat()})
        if previous_plan is not None:
            return DailyPlan(plan_date, list(previous_plan.entries))
        return DailyPlan(plan_date, default_routine())
    return DailyPlan(plan_date, repair_entries(entries))


def decompose_entry(
    persona: Persona,
    entry: PlanEntry,
    backend: Backend,
    tick_minutes: int,
) -> list[tuple[str, int]]:
    """Split a plan entry into (activity, duration_ticks) pieces whose tick
    durations sum exactly to the entry's tick span; the last piece absorbs rounding."""
    duration_ticks = max(1, entry.duration_minutes // tick_minutes)
    messages = decompose_prompt(persona, entry.activity, entry.start_hhmm(), entry.end_hhmm(), entry.duration_minutes)
    try:
        reply = backend.complete(request(messages, tag="decompose"), agent=persona.name)
    except BackendError:
        reply = ""
    pieces: list[tuple[str, int]] = []
    for line in reply.splitlines():
        match = _SUBACTION_LINE.match(line)
        if match:
            text, minutes = match.group(1), int(match.group(2))
            if text and minutes > 0:
                pieces.append((text, minutes))
    if not pieces:
        return [(entry.activity, duration_ticks)]
    ticks = [max(1, round(minutes / tick_minutes)) for _, minutes in pieces]
    if len(ticks) > duration_ticks:
        pieces = pieces[:duration_ticks]
        ticks = ticks[:duration_ticks]
    while sum(ticks) > duration_ticks:
        largest = max(range(len(ticks)), key=lambda i: ticks[i])
        if ticks[largest] == 1:
            break
        ticks[largest] -= 1
    ticks[-1] += duration_ticks - sum(ticks)
    return [(text, tick_count) for (text, _), tick_count in zip(pieces, ticks)]


def choose_action_location(
    persona: Persona,
    action_text: str,
    world_map: WorldMap,
    backend: Backend,
    *,
    diagnostics: Optional[list] = None,
) -> LocationPath:
    """Pick the arena for an action; unknown answers fall back to the living area."""
    arenas = list(world_map.arenas())
    messages = location_prompt(persona, action_text, arenas)
    try:
        reply = backend.complete(request(messages, tag="location"), agent=persona.name)
    except BackendError:
        reply = ""
    answer = reply.strip().splitlines()[0].strip() if reply.strip() else ""
    if answer:
        found = world_map.find_arena(answer)
        if found is not None:
            return found
        path = split_path(answer)
        if len(path) >= 2 and world_map.contains(arena_of(path)):
            return arena_of(path)
    if diagnostics is not None:
        diagnostics.append(
            {"kind": "location_fallback", "agent": persona.name, "action": action_text, "answer": answer}
        )
    return arena_of(persona.living_area)


def should_initiate(
    agent_name: str,
    co_located: Sequence[str],
    rng: Random,
    *,
    unmet_targets: Sequence[str] = (),
    engaged: Sequence[str] = (),
    cooldowns: Optional[Mapping[tuple[str, str], int]] = None,
    tick: int = 0,
    cooldown_ticks: int = 12,
    initiation_probability: float = 0.1,
) -> Optional[str]:
    """Pick at most one conversation partner for this tick.

    A performer with unmet invitation targets deterministically picks the first
    available one; otherwise each available pair fires with a seeded probability.
    A recently-used pair is suppressed for cooldown_ticks.
    """
    cooldowns = cooldowns or {}
    engaged_set = set(engaged)

    def available(candidate: str) -> bool:
        if candidate == agent_name or candidate in engaged_set:
            return False
        pair = tuple(sorted((agent_name, candidate)))
        last = cooldowns.get(pair)
        return last is None or tick - last >= cooldown_ticks

    candidates = [c for c in co_located if available(c)]
    if not candidates:
        return None
    unmet = [c for c in candidates if c in set(unmet_targets)]
    if unmet:
        return unmet[0]
    for candidate in candidates:
        if rng.random() < initiation_probability:
            return candidate
    return None

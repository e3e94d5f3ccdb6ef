"""Social-task templates, instantiation, and the text injected into the performer."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from datetime import date, datetime, time, timedelta
from pathlib import Path
from random import Random
from typing import Mapping, Optional, Sequence

import yaml

from .personas import Persona
from .world import LocationPath, WorldMap, join_path, split_path

PUBLIC_ACTIVITY = "public_activity"
APPOINTMENT = "appointment"
INVITING_COMPANIONS = "inviting_companions"
ONLINE_ACTIVITY = "online_activity"
ASKING_FOR_HELP = "asking_for_help"

CATEGORIES = (PUBLIC_ACTIVITY, APPOINTMENT, INVITING_COMPANIONS, ONLINE_ACTIVITY, ASKING_FOR_HELP)
COLLECTIVE_CATEGORIES = (PUBLIC_ACTIVITY, ONLINE_ACTIVITY, INVITING_COMPANIONS)

# (time_spec, location_spec, has_target) per category.
CATEGORY_SPECS: dict[str, tuple[str, str, bool]] = {
    PUBLIC_ACTIVITY: ("Specified", "Specified", False),
    APPOINTMENT: ("Same", "Same", True),
    INVITING_COMPANIONS: ("Same", "Specified", False),
    ONLINE_ACTIVITY: ("Specified", "Unspecified", False),
    ASKING_FOR_HELP: ("Unspecified", "Specified", False),
}

TEMPLATE_CENSUS = {
    PUBLIC_ACTIVITY: 10,
    APPOINTMENT: 5,
    INVITING_COMPANIONS: 5,
    ONLINE_ACTIVITY: 5,
    ASKING_FOR_HELP: 5,
}

MIN_BACKGROUND = 10
MAX_BACKGROUND = 12
DEFAULT_START_DATE = date(2023, 2, 13)
DEFAULT_DURATION_MINUTES = 60

DATA_DIR = Path(__file__).parent / "data"
TEMPLATES_DIR = DATA_DIR / "templates"


class TaskError(ValueError):
    pass


@dataclass(frozen=True)
class GoalConditionSpec:
    condition_id: str
    question: str
    applies_to: str = "both"


@dataclass(frozen=True)
class SubtaskSpec:
    action: str
    keywords: tuple[str, ...]
    location: str  # arena name or "@performer_living_area"


@dataclass(frozen=True)
class TaskTemplate:
    id: str
    category: str
    activity_name: str
    short_name: str
    time_spec: str
    location_spec: str
    has_target: bool
    keywords: tuple[str, ...]
    description: str
    goal_conditions: tuple[GoalConditionSpec, ...]
    location: Optional[str] = None
    task_time: Optional[str] = None
    day_offset: int = 1
    duration_minutes: int = DEFAULT_DURATION_MINUTES
    purpose: Optional[str] = None
    subtasks: tuple[SubtaskSpec, ...] = ()

    def validate(self) -> None:
        if self.category not in CATEGORIES:
            raise TaskError(f"{self.id}: unknown category {self.category!r}")
        expected_specs = CATEGORY_SPECS[self.category]
        actual_specs = (self.time_spec, self.location_spec, self.has_target)
        if actual_specs != expected_specs:
            raise TaskError(
                f"{self.id}: specs {actual_specs} do not match category row {expected_specs}"
            )
        if not self.keywords:
            raise TaskError(f"{self.id}: keywords must be non-empty")
        if self.category == ASKING_FOR_HELP:
            if not self.subtasks:
                raise TaskError(f"{self.id}: asking_for_help templates need at least one subtask")
        elif self.subtasks:
            raise TaskError(f"{self.id}: only asking_for_help templates carry subtasks")
        if self.time_spec == "Specified" and not self.task_time:
            raise TaskError(f"{self.id}: Specified time requires a task time")
        if self.location_spec == "Specified" and self.category != ASKING_FOR_HELP and not self.location:
            raise TaskError(f"{self.id}: Specified location requires a location")
        if self.category == APPOINTMENT and not self.purpose:
            raise TaskError(f"{self.id}: appointment templates need a purpose")
        if not self.goal_conditions:
            raise TaskError(f"{self.id}: goal_conditions must be non-empty")

    @classmethod
    def from_dict(cls, data: Mapping) -> "TaskTemplate":
        template = cls(
            id=str(data["id"]),
            category=str(data["category"]),
            activity_name=str(data["activity_name"]),
            short_name=str(data["short_name"]),
            time_spec=str(data["time_spec"]),
            location_spec=str(data["location_spec"]),
            has_target=bool(data["has_target"]),
            keywords=tuple(str(k) for k in data["keywords"]),
            description=str(data["description"]),
            goal_conditions=tuple(
                GoalConditionSpec(
                    condition_id=str(c["condition_id"]),
                    question=str(c["question"]),
                    applies_to=str(c.get("applies_to", "both")),
                )
                for c in data["goal_conditions"]
            ),
            location=data.get("location"),
            task_time=data.get("time"),
            day_offset=int(data.get("day_offset", 1)),
            duration_minutes=int(data.get("duration_minutes", DEFAULT_DURATION_MINUTES)),
            purpose=data.get("purpose"),
            subtasks=tuple(
                SubtaskSpec(
                    action=str(s["action"]),
                    keywords=tuple(str(k) for k in s["keywords"]),
                    location=str(s["location"]),
                )
                for s in data.get("subtasks", ())
            ),
        )
        template.validate()
        return template

    @classmethod
    def load(cls, path: str | Path) -> "TaskTemplate":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(yaml.safe_load(fh))


def load_templates(directory: str | Path = TEMPLATES_DIR) -> list[TaskTemplate]:
    paths = sorted(Path(directory).glob("*.yaml"))
    return [TaskTemplate.load(path) for path in paths]


def validate_template_set(templates: Sequence[TaskTemplate]) -> dict[str, int]:
    """Schema check for the shipped set: per-category counts and constraint rows."""
    counts: dict[str, int] = {category: 0 for category in CATEGORIES}
    seen: set[str] = set()
    for template in templates:
        template.validate()
        if template.id in seen:
            raise TaskError(f"duplicate template id {template.id!r}")
        seen.add(template.id)
        counts[template.category] += 1
    if counts != TEMPLATE_CENSUS:
        raise TaskError(f"template census {counts} does not match {TEMPLATE_CENSUS}")
    return counts


def expected_participants(category: str, n_background: int) -> int:
    """Participant target: half the background cast for public/online, a third
    for companion outings, all rounded up."""
    if n_background < 1:
        raise TaskError("n_background must be at least 1")
    if category in (PUBLIC_ACTIVITY, ONLINE_ACTIVITY):
        return math.ceil(n_background / 2)
    if category == INVITING_COMPANIONS:
        return math.ceil(n_background / 3)
    raise TaskError(f"{category} is not a collective category")


@dataclass(frozen=True)
class Subtask:
    action: str
    keywords: tuple[str, ...]
    location: LocationPath

    def to_dict(self) -> dict:
        return {"action": self.action, "keywords": list(self.keywords), "location": join_path(self.location)}

    @classmethod
    def from_dict(cls, data: Mapping) -> "Subtask":
        return cls(
            action=str(data["action"]),
            keywords=tuple(str(k) for k in data["keywords"]),
            location=split_path(str(data["location"])),
        )


@dataclass(frozen=True)
class GoalCondition:
    condition_id: str
    question_text: str
    applies_to: str = "both"

    def to_dict(self) -> dict:
        return {
            "condition_id": self.condition_id,
            "question_text": self.question_text,
            "applies_to": self.applies_to,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "GoalCondition":
        return cls(
            condition_id=str(data["condition_id"]),
            question_text=str(data["question_text"]),
            applies_to=str(data.get("applies_to", "both")),
        )


@dataclass(frozen=True)
class TaskInstance:
    template_id: str
    category: str
    performer: str
    background: tuple[str, ...]
    activity_name: str
    short_name: str
    keywords: tuple[str, ...]
    goal_text: str
    criteria_text: str
    currently_text: str
    goal_conditions: tuple[GoalCondition, ...]
    seed: int
    resolved_time: Optional[datetime] = None
    duration_minutes: int = DEFAULT_DURATION_MINUTES
    resolved_location: Optional[LocationPath] = None
    target_person: Optional[str] = None
    expected: Optional[int] = None
    purpose: Optional[str] = None
    subtasks: tuple[Subtask, ...] = ()

    @property
    def is_collective(self) -> bool:
        return self.category in COLLECTIVE_CATEGORIES

    @property
    def cast(self) -> tuple[str, ...]:
        return (self.performer, *self.background)

    def to_dict(self) -> dict:
        return {
            "template_id": self.template_id,
            "category": self.category,
            "performer": self.performer,
            "background": list(self.background),
            "activity_name": self.activity_name,
            "short_name": self.short_name,
            "keywords": list(self.keywords),
            "goal_text": self.goal_text,
            "criteria_text": self.criteria_text,
            "currently_text": self.currently_text,
            "goal_conditions": [c.to_dict() for c in self.goal_conditions],
            "seed": self.seed,
            "resolved_time": self.resolved_time.strftime("%Y-%m-%d %H:%M") if self.resolved_time else None,
            "duration_minutes": self.duration_minutes,
            "resolved_location": join_path(self.resolved_location) if self.resolved_location else None,
            "target_person": self.target_person,
            "expected": self.expected,
            "purpose": self.purpose,
            "subtasks": [s.to_dict() for s in self.subtasks],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "TaskInstance":
        resolved_time = data.get("resolved_time")
        return cls(
            template_id=str(data["template_id"]),
            category=str(data["category"]),
            performer=str(data["performer"]),
            background=tuple(str(a) for a in data["background"]),
            activity_name=str(data["activity_name"]),
            short_name=str(data["short_name"]),
            keywords=tuple(str(k) for k in data["keywords"]),
            goal_text=str(data["goal_text"]),
            criteria_text=str(data["criteria_text"]),
            currently_text=str(data["currently_text"]),
            goal_conditions=tuple(GoalCondition.from_dict(c) for c in data["goal_conditions"]),
            seed=int(data["seed"]),
            resolved_time=datetime.strptime(resolved_time, "%Y-%m-%d %H:%M") if resolved_time else None,
            duration_minutes=int(data.get("duration_minutes", DEFAULT_DURATION_MINUTES)),
            resolved_location=split_path(data["resolved_location"]) if data.get("resolved_location") else None,
            target_person=data.get("target_person"),
            expected=data.get("expected"),
            purpose=data.get("purpose"),
            subtasks=tuple(Subtask.from_dict(s) for s in data.get("subtasks", ())),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "TaskInstance":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _fmt_dt(moment: datetime) -> str:
    return moment.strftime("%Y-%m-%d %H:%M")


def goal_clause(
    template: TaskTemplate,
    *,
    location_name: Optional[str],
    resolved_time: Optional[datetime],
    target: Optional[str],
    subtasks: Sequence[Subtask],
) -> str:
    """Category-specific goal phrasing; the categories use distinct verbs so the
    clause stays machine-recognizable as well as readable."""
    if template.category == PUBLIC_ACTIVITY:
        return f"hold {template.activity_name} at {location_name} at {_fmt_dt(resolved_time)}"
    if template.category == ONLINE_ACTIVITY:
        return f"host {template.activity_name} at {_fmt_dt(resolved_time)}"
    if template.category == INVITING_COMPANIONS:
        return f"gather friends for {template.activity_name} at {location_name}"
    if template.category == APPOINTMENT:
        return f"arrange to {template.purpose} with {target}"
    first, second = subtasks[0], subtasks[-1]
    return (
        f"ask a friend to {first.action} at {first.location[-1]} "
        f"and then {second.action} at {second.location[-1]}"
    )


def criteria_text(
    template: TaskTemplate,
    *,
    performer: str,
    location_name: Optional[str],
    resolved_time: Optional[datetime],
    target: Optional[str],
    expected: Optional[int],
) -> str:
    if template.category == PUBLIC_ACTIVITY:
        return (
            f"The target is to have {expected} people attend {template.short_name} at "
            f"{location_name} at {_fmt_dt(resolved_time)}, the more people the better."
        )
    if template.category == ONLINE_ACTIVITY:
        return (
            f"The target is to have {expected} people join {template.short_name} at "
            f"{_fmt_dt(resolved_time)}, the more people the better."
        )
    if template.category == INVITING_COMPANIONS:
        return (
            f"The target is to have {expected} people join {template.short_name} at "
            f"{location_name}, the more people the better."
        )
    if template.category == APPOINTMENT:
        return f"The goal is fulfilled when {performer} and {target} meet at an agreed time and place."
    return "The goal is fulfilled when a friend performs both steps in order."


def render_currently(performer: str, goal: str, criteria: str) -> str:
    return f"{performer} wants to {goal}. {criteria}"


def render_goal_conditions(
    template: TaskTemplate,
    *,
    performer: str,
    location_name: Optional[str],
    resolved_time: Optional[datetime],
    target: Optional[str],
    subtasks: Sequence[Subtask],
) -> tuple[GoalCondition, ...]:
    values = {
        "performer": performer,
        "activity": template.activity_name,
        "location": location_name or "",
        "date": resolved_time.strftime("%Y-%m-%d") if resolved_time else "",
        "time": resolved_time.strftime("%H:%M") if resolved_time else "",
        "target": target or "",
        "purpose": template.purpose or "",
        "sub1": subtasks[0].action if subtasks else "",
        "loc1": subtasks[0].location[-1] if subtasks else "",
        "sub2": subtasks[-1].action if subtasks else "",
        "loc2": subtasks[-1].location[-1] if subtasks else "",
    }
    return tuple(
        GoalCondition(
            condition_id=spec.condition_id,
            question_text=spec.question.format(**values),
            applies_to=spec.applies_to,
        )
        for spec in template.goal_conditions
    )


def instantiate(
    template: TaskTemplate,
    roster: Sequence[Persona],
    world_map: WorldMap,
    rng: Random,
    *,
    seed: int = 0,
    start_date: date = DEFAULT_START_DATE,
    performer_name: Optional[str] = None,
) -> TaskInstance:
    """Cast one task from a template: performer, 10-12 background characters,
    and the resolved Specified bindings. Background characters receive no task
    information; only the returned currently_text carries it."""
    template.validate()
    if len(roster) < MIN_BACKGROUND + 1:
        raise TaskError(
            f"insufficient background characters: roster has {len(roster)}, "
            f"need at least {MIN_BACKGROUND + 1} personas"
        )
    names = [p.name for p in roster]
    by_name = {p.name: p for p in roster}
    if performer_name is None:
        performer_name = rng.choice(names)
    elif performer_name not in by_name:
        raise TaskError(f"performer {performer_name!r} not in roster")
    remaining = [n for n in names if n != performer_name]
    n_background = rng.randint(MIN_BACKGROUND, min(MAX_BACKGROUND, len(remaining)))
    background = tuple(rng.sample(remaining, n_background))

    resolved_location: Optional[LocationPath] = None
    location_name: Optional[str] = None
    if template.location_spec == "Specified" and template.location:
        resolved_location = world_map.find_arena(template.location)
        if resolved_location is None:
            raise TaskError(f"{template.id}: location {template.location!r} not found in map")
        location_name = resolved_location[-1]

    resolved_time: Optional[datetime] = None
    if template.time_spec == "Specified":
        hour, minute = (int(part) for part in str(template.task_time).split(":"))
        resolved_time = datetime.combine(
            start_date + timedelta(days=template.day_offset), time(hour, minute)
        )

    target_person: Optional[str] = None
    if template.has_target:
        target_person = rng.choice(list(background))

    expected: Optional[int] = None
    if template.category in COLLECTIVE_CATEGORIES:
        expected = expected_participants(template.category, n_background)

    performer_persona = by_name[performer_name]
    subtasks: list[Subtask] = []
    for spec in template.subtasks:
        if spec.location == "@performer_living_area":
            location = performer_persona.living_area
        else:
            found = world_map.find_arena(spec.location)
            if found is None:
                raise TaskError(f"{template.id}: subtask location {spec.location!r} not found in map")
            location = found
        subtasks.append(Subtask(action=spec.action, keywords=spec.keywords, location=location))

    goal = goal_clause(
        template,
        location_name=location_name,
        resolved_time=resolved_time,
        target=target_person,
        subtasks=subtasks,
    )
    criteria = criteria_text(
        template,
        performer=performer_name,
        location_name=location_name,
        resolved_time=resolved_time,
        target=target_person,
        expected=expected,
    )
    return TaskInstance(
        template_id=template.id,
        category=template.category,
        performer=performer_name,
        background=background,
        activity_name=template.activity_name,
        short_name=template.short_name,
        keywords=template.keywords,
        goal_text=goal[0].upper() + goal[1:],
        criteria_text=criteria,
        currently_text=render_currently(performer_name, goal, criteria),
        goal_conditions=render_goal_conditions(
            template,
            performer=performer_name,
            location_name=location_name,
            resolved_time=resolved_time,
            target=target_person,
            subtasks=subtasks,
        ),
        seed=seed,
        resolved_time=resolved_time,
        duration_minutes=template.duration_minutes,
        resolved_location=resolved_location,
        target_person=target_person,
        expected=expected,
        purpose=template.purpose,
        subtasks=tuple(subtasks),
    )


def task_description_block(instance: TaskInstance) -> str:
    """The goal/criteria block injected by the target-planning pipeline."""
    return f"Goal: {instance.goal_text}. Criteria: {instance.criteria_text}"

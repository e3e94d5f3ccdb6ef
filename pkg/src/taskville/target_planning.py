"""Target-driven planning: general plan, per-day plan reminder, conversation
reminder, and their injection into planning and conversation prompts."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Mapping, Optional

from .backend import Backend, BackendError, request
from .personas import Persona
from .prompts import (
    SECTION_CONVERSATION_REMINDER,
    SECTION_GENERAL_PLAN,
    SECTION_PLAN_REMINDER,
    SECTION_TASK,
    messages_for,
    persona_block,
)

GENERAL_PLAN_INSTRUCTION = (
    "Here comes the first step of planning, you need to decompose the task into few "
    "subgoals or keypoints to fulfill the task requirements.\n"
    "Output your thought in 3~5 sentences, one per line, without any prefix or postfix."
)
PLAN_REMINDER_INSTRUCTION = (
    "Here comes the next step of planning. When you are making the schedule of the day "
    "({date}), what should you keep in mind?\n"
    "Make a reminder which has 1~2 sentences, in one line, without any prefix or postfix."
)
CONVERSATION_REMINDER_INSTRUCTION = (
    "Here comes the next step of planning. When you are talking to others, what should "
    "you keep in mind to accomplish the goal?\n"
    "Make a checklist with less than 5 items, one per line, without any prefix or postfix."
)

MIN_PLAN_LINES = 3
MAX_PLAN_LINES = 5
MAX_CHECKLIST_ITEMS = 5
MAX_REMINDER_SENTENCES = 2

_LIST_PREFIX = re.compile(r"^\s*(?:[-*•]+|\(?\d+[.):]?)\s*")
_SENTENCE_SPLIT = re.compile(r"(?<=[.!?])\s+")


def normalize_lines(text: str) -> list[str]:
    """Strip list bullets/numbers and drop empty lines."""
    lines = []
    for raw in text.splitlines():
        line = _LIST_PREFIX.sub("", raw).strip()
        if line:
            lines.append(line)
    return lines


@dataclass
class TargetPlan:
    task_text: str
    general_plan: tuple[str, ...] = ()
    plan_reminders: dict[str, str] = field(default_factory=dict)  # date iso -> text
    conversation_reminder: tuple[str, ...] = ()
    flags: list[str] = field(default_factory=list)

    def general_plan_text(self) -> str:
        return "\n".join(self.general_plan)

    def conversation_reminder_text(self) -> str:
        return "\n".join(self.conversation_reminder)

    def to_dict(self) -> dict:
        return {
            "task_text": self.task_text,
            "general_plan": list(self.general_plan),
            "plan_reminders": dict(sorted(self.plan_reminders.items())),
            "conversation_reminder": list(self.conversation_reminder),
            "flags": list(self.flags),
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n", encoding="utf-8")

    @classmethod
    def from_dict(cls, data: Mapping) -> "TargetPlan":
        return cls(
            task_text=str(data["task_text"]),
            general_plan=tuple(data.get("general_plan", ())),
            plan_reminders=dict(data.get("plan_reminders", {})),
            conversation_reminder=tuple(data.get("conversation_reminder", ())),
            flags=list(data.get("flags", ())),
        )


def _tdp_messages(persona: Persona, task_text: str, instruction: str):
    text = "\n\n".join(
        (
            persona_block(persona),
            f"{SECTION_TASK}:\n{task_text}",
            instruction,
        )
    )
    return messages_for(text)


def _complete(persona: Persona, task_text: str, instruction: str, backend: Backend) -> str:
    try:
        return backend.complete(request(_tdp_messages(persona, task_text, instruction), tag="tdp"), agent=persona.name)
    except BackendError:
        return ""


def generate_general_plan(
    persona: Persona,
    task_text: str,
    backend: Backend,
) -> tuple[tuple[str, ...], bool]:
    """3-5 one-per-line subgoal sentences; one re-ask, then the reply is coerced
    to the nearest bound and flagged."""
    if not task_text.strip():
        raise ValueError("task_text must be non-empty")
    lines = normalize_lines(_complete(persona, task_text, GENERAL_PLAN_INSTRUCTION, backend))
    if not (MIN_PLAN_LINES <= len(lines) <= MAX_PLAN_LINES):
        lines = normalize_lines(_complete(persona, task_text, GENERAL_PLAN_INSTRUCTION, backend))
    if MIN_PLAN_LINES <= len(lines) <= MAX_PLAN_LINES:
        return tuple(lines), False
    if len(lines) > MAX_PLAN_LINES:
        merged = lines[: MAX_PLAN_LINES - 1] + [" ".join(lines[MAX_PLAN_LINES - 1 :])]
        return tuple(merged), True
    if not lines:
        lines = [f"I need to work toward the goal: {task_text.strip()}"]
    sentences: list[str] = []
    for line in lines:
        sentences.extend(s.strip() for s in _SENTENCE_SPLIT.split(line) if s.strip())
    while len(sentences) < MIN_PLAN_LINES:
        sentences.append("I will keep the task requirements in mind throughout the day.")
    return tuple(sentences[:MAX_PLAN_LINES]), True


def generate_plan_reminder(
    persona: Persona,
    task_text: str,
    for_date: date,
    general_plan: tuple[str, ...],
    backend: Backend,
) -> tuple[str, bool]:
    """A 1-2 sentence single-line reminder for one day's scheduling."""
    if not general_plan:
        raise ValueError("general_plan must be generated first")
    instruction = PLAN_REMINDER_INSTRUCTION.format(date=for_date.isoformat())
    reply = _complete(persona, task_text, instruction, backend)
    line = " ".join(normalize_lines(reply))
    flagged = False
    if not line:
        line = "Remember to schedule time for the task today."
        flagged = True
    sentences = [s.strip() for s in _SENTENCE_SPLIT.split(line) if s.strip()]
    if len(sentences) > MAX_REMINDER_SENTENCES:
        line = " ".join(sentences[:MAX_REMINDER_SENTENCES])
        flagged = True
    return line, flagged


def generate_conversation_reminder(
    persona: Persona,
    task_text: str,
    general_plan: tuple[str, ...],
    backend: Backend,
) -> tuple[tuple[str, ...], bool]:
    """A checklist of at most 5 items to keep in mind while talking."""
    if not general_plan:
        raise ValueError("general_plan must be generated first")
    items = normalize_lines(_complete(persona, task_text, CONVERSATION_REMINDER_INSTRUCTION, backend))
    flagged = False
    if not items:
        items = ["Keep the goal in mind when talking to others."]
        flagged = True
    if len(items) > MAX_CHECKLIST_ITEMS:
        items = items[:MAX_CHECKLIST_ITEMS]
        flagged = True
    return tuple(items), flagged


def build_target_plan(persona: Persona, task_text: str, backend: Backend) -> TargetPlan:
    """Run the one-time stages (general plan, conversation checklist)."""
    plan = TargetPlan(task_text=task_text)
    general, flagged = generate_general_plan(persona, task_text, backend)
    plan.general_plan = general
    if flagged:
        plan.flags.append("general_plan_normalized")
    checklist, flagged = generate_conversation_reminder(persona, task_text, general, backend)
    plan.conversation_reminder = checklist
    if flagged:
        plan.flags.append("conversation_reminder_normalized")
    return plan


def ensure_plan_reminder(plan: TargetPlan, persona: Persona, for_date: date, backend: Backend) -> str:
    key = for_date.isoformat()
    if key not in plan.plan_reminders:
        reminder, flagged = generate_plan_reminder(persona, plan.task_text, for_date, plan.general_plan, backend)
        plan.plan_reminders[key] = reminder
        if flagged:
            plan.flags.append(f"plan_reminder_normalized:{key}")
    return plan.plan_reminders[key]


def inject(
    plan: TargetPlan,
    stage: str,
    prompt_context: Mapping[str, str],
    *,
    for_date: Optional[date] = None,
    diagnostics: Optional[list] = None,
) -> dict[str, str]:
    """Add the stage-appropriate sections to a prompt context.

    Idempotent: existing sections are left untouched. A missing field leaves the
    context unchanged and records a diagnostic.
    """
    context = dict(prompt_context)

    def missing(what: str) -> dict[str, str]:
        if diagnostics is not None:
            diagnostics.append({"kind": "inject_missing_field", "stage": stage, "field": what})
        return context

    if stage == "daily_planning":
        if for_date is None or for_date.isoformat() not in plan.plan_reminders:
            return missing("plan_reminder")
        if not plan.task_text:
            return missing("task_text")
        context.setdefault(SECTION_TASK, plan.task_text)
        context.setdefault(SECTION_PLAN_REMINDER, plan.plan_reminders[for_date.isoformat()])
        return context
    if stage == "conversation":
        if not plan.general_plan:
            return missing("general_plan")
        if not plan.conversation_reminder:
            return missing("conversation_reminder")
        if not plan.task_text:
            return missing("task_text")
        context.setdefault(SECTION_TASK, plan.task_text)
        context.setdefault(SECTION_GENERAL_PLAN, plan.general_plan_text())
        context.setdefault(SECTION_CONVERSATION_REMINDER, plan.conversation_reminder_text())
        return context
    raise ValueError(f"unknown injection stage {stage!r}")

"""Prompt assembly shared by every stage.

All stages reuse the same persona/memory header so injected sections look the
same everywhere. The exact wording below is a contract: the rule-based policy
backend parses these markers, and the prompt-injection tests assert on them.
"""

from __future__ import annotations

from datetime import date, datetime
from typing import Mapping, Optional, Sequence

from .personas import MemoryNode, Persona
from .world import join_path

SYSTEM_TEXT = "You simulate the behavior and speech of one person in a small town."

# Section headers for injected planning output (order fixed).
SECTION_TASK = "Task description"
SECTION_GENERAL_PLAN = "General plan"
SECTION_PLAN_REMINDER = "Plan reminder"
SECTION_CONVERSATION_REMINDER = "Conversation reminder"
SECTION_ORDER = (SECTION_TASK, SECTION_GENERAL_PLAN, SECTION_PLAN_REMINDER, SECTION_CONVERSATION_REMINDER)

STRUCTURED_REPLY_INSTRUCTION = (
    'Reply as {name} with a JSON object {{"utterance": "...", "end": true|false}}, '
    'where "end" is true if the conversation should finish after this utterance.'
)
PLAIN_REPLY_INSTRUCTION = "Reply as {name} with only the utterance text."


def persona_block(persona: Persona) -> str:
    return (
        f"Name: {persona.name}\n"
        f"Age: {persona.age}\n"
        f"Innate traits: {persona.innate}\n"
        f"Background: {persona.learned}\n"
        f"Currently: {persona.currently}\n"
        f"Lifestyle: {persona.lifestyle}\n"
        f"Living area: {join_path(persona.living_area)}"
    )


def memories_block(nodes: Sequence[MemoryNode]) -> str:
    if not nodes:
        return "Relevant memories:\n(none)"
    lines = "\n".join(f"- {node.text}" for node in nodes)
    return f"Relevant memories:\n{lines}"


def render_sections(sections: Mapping[str, str]) -> str:
    ordered = [title for title in SECTION_ORDER if title in sections]
    ordered += [title for title in sections if title not in SECTION_ORDER]
    return "\n\n".join(f"{title}:\n{sections[title]}" for title in ordered)


def _compose(*parts: str) -> str:
    return "\n\n".join(part for part in parts if part)


def messages_for(text: str) -> tuple[tuple[str, str], ...]:
    return (("system", SYSTEM_TEXT), ("user", text))


def planning_prompt(
    persona: Persona,
    memories: Sequence[MemoryNode],
    plan_date: date,
    sections: Optional[Mapping[str, str]] = None,
) -> tuple[tuple[str, str], ...]:
    instruction = (
        f"Today is {plan_date.isoformat()}. Write {persona.name}'s schedule for today "
        "from 07:00 to 22:00.\n"
        "Output one entry per line in the format 'HH:MM - HH:MM | activity', with no other text."
    )
    text = _compose(
        persona_block(persona),
        memories_block(memories),
        render_sections(sections or {}),
        instruction,
    )
    return messages_for(text)


def decompose_prompt(persona: Persona, activity: str, start_hhmm: str, end_hhmm: str, minutes: int) -> tuple[tuple[str, str], ...]:
    text = _compose(
        persona_block(persona),
        (
            f"{persona.name} plans to do the following between {start_hhmm} and {end_hhmm}: {activity}.\n"
            f"Break this into smaller sub-actions. Output one per line in the format "
            f"'sub-action -- minutes', where the minutes sum to {minutes}."
        ),
    )
    return messages_for(text)


def location_prompt(persona: Persona, action_text: str, arena_paths: Sequence[tuple[str, ...]]) -> tuple[tuple[str, str], ...]:
    places = "\n".join(f"- {join_path(path)}" for path in arena_paths)
    text = _compose(
        persona_block(persona),
        f"Action: {action_text}\nKnown places:\n{places}\nAnswer with the single place name best suited for the action.",
    )
    return messages_for(text)


def conversation_prompt(
    persona: Persona,
    listener_name: str,
    memories: Sequence[MemoryNode],
    current_action: str,
    now: datetime,
    rounds: Sequence[tuple[str, str]],
    sections: Optional[Mapping[str, str]] = None,
    structured: bool = True,
) -> tuple[tuple[str, str], ...]:
    if rounds:
        so_far = "\n".join(f"{speaker}: {utterance}" for speaker, utterance in rounds)
    else:
        so_far = "(no utterances yet)"
    instruction = (STRUCTURED_REPLY_INSTRUCTION if structured else PLAIN_REPLY_INSTRUCTION).format(
        name=persona.name
    )
    text = _compose(
        persona_block(persona),
        memories_block(memories),
        render_sections(sections or {}),
        (
            f"Current time: {now.strftime('%Y-%m-%d %H:%M')}.\n"
            f"You are {persona.name}. You are talking to {listener_name}. "
            f"{persona.name} is currently {current_action}.\n"
            f"Conversation so far:\n{so_far}"
        ),
        instruction,
    )
    return messages_for(text)


def summary_prompt(
    persona: Persona,
    rounds: Sequence[tuple[str, str]],
    strict: bool = False,
) -> tuple[tuple[str, str], ...]:
    transcript = "\n".join(f"{speaker}: {utterance}" for speaker, utterance in rounds)
    instruction = (
        f"Summarize this conversation from {persona.name}'s perspective in one or two sentences, "
        "keeping any agreed dates, times, places, and commitments."
    )
    if strict:
        instruction += " Include every date, time, and location mentioned."
    text = _compose(
        persona_block(persona),
        f"The following conversation just ended.\nConversation:\n{transcript}",
        instruction,
    )
    return messages_for(text)


def judge_prompt(text: str, question: str) -> tuple[tuple[str, str], ...]:
    prompt = f"Text:\n{text}\n\nQuestion: {question}\nAnswer with exactly one word: yes or no."
    return (("system", "You answer yes/no questions about a text."), ("user", prompt))

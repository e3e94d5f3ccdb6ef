"""Two-party conversation engine with a hard 8-round cap, plus summarization."""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime
from typing import Mapping, Optional, Sequence

from .backend import Backend, BackendError, StructuredParseError, parse_structured, request
from .personas import MemoryStream, Persona
from .prompts import conversation_prompt, summary_prompt

MAX_ROUNDS = 8
PLACEHOLDER_UTTERANCE = "..."


@dataclass
class ConversationState:
    participants: tuple[str, str]
    rounds: list[tuple[str, str]] = field(default_factory=list)
    ended: bool = False

    @property
    def round_count(self) -> int:
        # One round = one utterance by each participant.
        return (len(self.rounds) + 1) // 2

    def text(self) -> str:
        return "\n".join(f"{speaker}: {utterance}" for speaker, utterance in self.rounds)


@dataclass
class Speaker:
    """Everything one side of a conversation needs to produce an utterance."""

    persona: Persona
    backend: Backend
    memory: MemoryStream = field(default_factory=MemoryStream)
    current_action: str = "chatting"
    structured: bool = True
    sections: Mapping[str, str] = field(default_factory=dict)
    memory_top_k: int = 10


def generate_utterance(
    speaker: Speaker,
    listener_name: str,
    now: datetime,
    rounds: Sequence[tuple[str, str]],
) -> tuple[str, bool]:
    """One utterance plus an end flag.

    Structured mode parses {"utterance", "end"}; one re-ask on a malformed
    reply, then the raw reply is treated as plain text with end=False. Plain
    mode never sets the end flag; the round cap closes the conversation.
    """
    memories = speaker.memory.retrieve(
        f"{listener_name} {speaker.current_action}", k=speaker.memory_top_k
    )
    messages = conversation_prompt(
        speaker.persona,
        listener_name,
        memories,
        speaker.current_action,
        now,
        rounds,
        sections=speaker.sections,
        structured=speaker.structured,
    )
    attempts = 2 if speaker.structured else 1
    reply = ""
    for attempt in range(attempts):
        try:
            reply = speaker.backend.complete(request(messages, tag="conversation"), agent=speaker.persona.name)
        except BackendError:
            reply = ""
        if not speaker.structured:
            break
        try:
            parsed = parse_structured(reply, ("utterance", "end"))
            utterance = str(parsed["utterance"]).strip() or PLACEHOLDER_UTTERANCE
            return utterance, bool(parsed["end"])
        except StructuredParseError:
            continue
    utterance = reply.strip() or PLACEHOLDER_UTTERANCE
    return utterance, False


def run_conversation(
    initiator: Speaker,
    partner: Speaker,
    now: datetime,
    max_rounds: int = MAX_ROUNDS,
) -> ConversationState:
    state = ConversationState(participants=(initiator.persona.name, partner.persona.name))
    sides = (initiator, partner)
    while len(state.rounds) < 2 * max_rounds:
        speaker = sides[len(state.rounds) % 2]
        listener = sides[(len(state.rounds) + 1) % 2]
        utterance, end = generate_utterance(speaker, listener.persona.name, now, state.rounds)
        state.rounds.append((speaker.persona.name, utterance))
        if end:
            state.ended = True
            break
    state.ended = True
    return state


def summarize_conversation(
    listener_persona: Persona,
    rounds: Sequence[tuple[str, str]],
    backend: Backend,
    *,
    strict: bool = False,
) -> tuple[str, bool]:
    """Summary text plus a degraded flag; a failed backend degrades to the
    transcript tail instead of dropping the memory."""
    if not rounds:
        raise ValueError("cannot summarize an empty transcript")
    messages = summary_prompt(listener_persona, rounds, strict=strict)
    try:
        reply = backend.complete(request(messages, tag="summary"), agent=listener_persona.name)
    except BackendError:
        reply = ""
    summary = reply.strip()
    if summary:
        return summary, False
    tail = rounds[-2:]
    return " / ".join(f"{speaker}: {utterance}" for speaker, utterance in tail), True

"""Rule-based persona-policy backend.

A deterministic stand-in for a language model that cooperates perfectly:
it accepts invitations, echoes dates/times/places, schedules commitments it
agreed to, and grounds actions at the named places. It works purely from the
prompt text, using the canonical phrasings produced by prompts.py and
tasks.py, which makes full-pipeline oracle runs possible without a network.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from datetime import datetime, timedelta
from typing import Optional

from .backend import Backend, ChatRequest

DEFAULT_RENDEZVOUS = "Hobbs Cafe"

_DT = r"\d{4}-\d{2}-\d{2} \d{2}:\d{2}"
_DATE = r"\d{4}-\d{2}-\d{2}"
_TIME = r"\d{2}:\d{2}"

# Task clauses as rendered into the currently field ("wants to ...") or the
# injected goal block ("Goal: ...").
_TASK_PUBLIC = re.compile(rf"(?:wants to hold|Goal: Hold) (?P<act>.+?) at (?P<loc>.+?) at (?P<dt>{_DT})")
_TASK_ONLINE = re.compile(rf"(?:wants to host|Goal: Host) (?P<act>.+?) at (?P<dt>{_DT})")
_TASK_INVITING = re.compile(r"(?:wants to gather|Goal: Gather) friends for (?P<act>.+?) at (?P<loc>[^.\n]+)\.")
_TASK_APPOINTMENT = re.compile(r"(?:wants to arrange|Goal: Arrange) to (?P<purpose>.+?) with (?P<target>[^.\n]+)\.")
_TASK_HELP = re.compile(
    r"(?:wants to ask|Goal: Ask) a friend to (?P<s1>.+?) at (?P<l1>.+?) and then (?P<s2>.+?) at (?P<l2>[^.\n]+)\."
)

# Conversation grammar.
_INVITE_PUBLIC = re.compile(rf"I am hosting (?P<act>.+?) at (?P<loc>.+?) on (?P<date>{_DATE}) at (?P<time>{_TIME})\. Please come")
_INVITE_ONLINE = re.compile(rf"I am hosting (?P<act>.+?) online on (?P<date>{_DATE}) at (?P<time>{_TIME})\. Please join")
_INVITE_GATHER = re.compile(rf"I am organizing (?P<act>.+?) at (?P<loc>.+?) on (?P<date>{_DATE}) at (?P<time>{_TIME})\. Please join us")
_ASK_MEET = re.compile(rf"Could we meet to (?P<purpose>.+?) at (?P<loc>.+?) on (?P<date>{_DATE}) at (?P<time>{_TIME})\?")
_ASK_HELP = re.compile(r"Could you help me\? Please first (?P<s1>.+?) at (?P<l1>.+?), and then (?P<s2>.+?) at (?P<l2>[^.\n]+)\.")
_ACCEPT = re.compile(r"^(Yes,|Of course,)")
_GREETING = re.compile(r"Nice to see you")

# Memory grammar written by the summary stage, read back by the planning stage.
_MEM_COME = re.compile(rf"Agreed to come to (?P<act>.+?) at (?P<loc>.+?) on (?P<date>{_DATE}) at (?P<time>{_TIME})\.")
_MEM_JOIN_ONLINE = re.compile(rf"Agreed to join (?P<act>.+?) online on (?P<date>{_DATE}) at (?P<time>{_TIME})\.")
_MEM_JOIN = re.compile(rf"Agreed to join (?P<act>.+?) at (?P<loc>.+?) on (?P<date>{_DATE}) at (?P<time>{_TIME})\.")
_MEM_MEET = re.compile(
    rf"Agreed to meet (?P<other>.+?) to (?P<purpose>.+?) at (?P<loc>.+?) on (?P<date>{_DATE}) at (?P<time>{_TIME})\."
)
_MEM_HELP = re.compile(r"Agreed to help (?P<other>.+?): first (?P<s1>.+?) at (?P<l1>.+?), then (?P<s2>.+?) at (?P<l2>[^.\n]+)\.")
_MEM_INVITED_ONLINE = re.compile(rf"Invited .+? to (?P<act>.+?) online on (?P<date>{_DATE}) at (?P<time>{_TIME}); they accepted\.")
_MEM_INVITED = re.compile(rf"Invited .+? to (?P<act>.+?) at (?P<loc>.+?) on (?P<date>{_DATE}) at (?P<time>{_TIME}); they accepted\.")

_TODAY = re.compile(rf"Today is (?P<date>{_DATE})\.")
_NOW = re.compile(rf"Current time: (?P<dt>{_DT})\.")
_SPEAKERS = re.compile(r"You are (?P<speaker>.+?)\. You are talking to (?P<listener>.+?)\.")
_LIVING_AREA = re.compile(r"Living area: (?P<path>.+)")
_ACTION = re.compile(r"Action: (?P<action>.+)")
_PERSONA_NAME = re.compile(r"Name: (?P<name>.+)")
_SUMMARY_PERSPECTIVE = re.compile(r"Summarize this conversation from (?P<name>.+?)'s perspective")


@dataclass
class _Task:
    category: str
    activity: str = ""
    location: str = ""
    when: Optional[datetime] = None
    purpose: str = ""
    target: str = ""
    sub1: str = ""
    loc1: str = ""
    sub2: str = ""
    loc2: str = ""


def _parse_task(text: str) -> Optional[_Task]:
    match = _TASK_PUBLIC.search(text)
    if match:
        return _Task(
            category="public",
            activity=match.group("act"),
            location=match.group("loc"),
            when=datetime.strptime(match.group("dt"), "%Y-%m-%d %H:%M"),
        )
    match = _TASK_ONLINE.search(text)
    if match:
        return _Task(
            category="online",
            activity=match.group("act"),
            when=datetime.strptime(match.group("dt"), "%Y-%m-%d %H:%M"),
        )
    match = _TASK_INVITING.search(text)
    if match:
        return _Task(category="inviting", activity=match.group("act"), location=match.group("loc"))
    match = _TASK_APPOINTMENT.search(text)
    if match:
        return _Task(category="appointment", purpose=match.group("purpose"), target=match.group("target"))
    match = _TASK_HELP.search(text)
    if match:
        return _Task(
            category="help",
            sub1=match.group("s1"),
            loc1=match.group("l1"),
            sub2=match.group("s2"),
            loc2=match.group("l2"),
        )
    return None


def _conversation_lines(text: str) -> list[tuple[str, str]]:
    section = re.search(r"Conversation(?: so far)?:\n(?P<body>.*?)(?:\n\n|$)", text, re.DOTALL)
    if not section:
        return []
    lines = []
    for raw in section.group("body").splitlines():
        if ": " in raw and not raw.startswith("("):
            speaker, utterance = raw.split(": ", 1)
            lines.append((speaker.strip(), utterance.strip()))
    return lines


class PolicyBackend(Backend):
    """Perfectly cooperative scripted persona; see module docstring."""

    name = "policy"

    def __init__(self, capture=None, rendezvous: str = DEFAULT_RENDEZVOUS):
        super().__init__(capture)
        self.rendezvous = rendezvous

    def _complete(self, request_: ChatRequest) -> tuple[str, int]:
        text = request_.user_text
        handlers = {
            "planning": self._plan,
            "decompose": self._decompose,
            "location": self._location,
            "conversation": self._converse,
            "summary": self._summarize,
            "tdp": self._target_plan,
            "judge": self._judge,
        }
        handler = handlers.get(request_.tag, lambda _: "")
        return handler(text), 1

    # -- planning ---------------------------------------------------------

    def _plan(self, text: str) -> str:
        today_match = _TODAY.search(text)
        if not today_match:
            return ""
        today = today_match.group("date")
        commitments: list[tuple[int, int, str]] = []
        seen: set[tuple[str, int]] = set()

        def commit(start_minute: int, duration: int, activity: str) -> None:
            key = (activity, start_minute)
            if key in seen:
                return
            seen.add(key)
            commitments.append((start_minute, min(start_minute + duration, 22 * 60), activity))

        def minute_of(time_text: str) -> int:
            hours, minutes = time_text.split(":")
            return int(hours) * 60 + int(minutes)

        for match in _MEM_COME.finditer(text):
            if match.group("date") == today:
                commit(minute_of(match.group("time")), 60, f"attending {match.group('act')} at {match.group('loc')}")
        for match in _MEM_JOIN_ONLINE.finditer(text):
            if match.group("date") == today:
                commit(minute_of(match.group("time")), 60, f"attending {match.group('act')} online")
        for match in _MEM_JOIN.finditer(text):
            if match.group("date") == today and " online on " not in match.group(0):
                commit(minute_of(match.group("time")), 60, f"attending {match.group('act')} at {match.group('loc')}")
        for match in _MEM_MEET.finditer(text):
            if match.group("date") == today:
                commit(
                    minute_of(match.group("time")),
                    60,
                    f"meeting {match.group('other')} at {match.group('loc')} to {match.group('purpose')}",
                )
        for match in _MEM_HELP.finditer(text):
            commit(10 * 60, 60, f"{match.group('s1')} at {match.group('l1')}")
            commit(11 * 60, 60, f"{match.group('s2')} at {match.group('l2')}")
        for match in _MEM_INVITED_ONLINE.finditer(text):
            if match.group("date") == today:
                commit(minute_of(match.group("time")), 60, f"hosting {match.group('act')} online")
        for match in _MEM_INVITED.finditer(text):
            if match.group("date") == today and " online on " not in match.group(0):
                commit(minute_of(match.group("time")), 60, f"hosting {match.group('act')} at {match.group('loc')}")

        task = _parse_task(text)
        if task is not None and task.when is not None and task.when.strftime("%Y-%m-%d") == today:
            start = task.when.hour * 60 + task.when.minute
            if task.category == "public":
                if start >= 8 * 60:
                    commit(start - 60, 60, f"preparing for {task.activity} at {task.location}")
                commit(start, 60, f"hosting {task.activity} at {task.location}")
            elif task.category == "online":
                commit(start, 60, f"hosting {task.activity} online")

        commitments.sort()
        return self._format_plan(commitments)

    def _format_plan(self, commitments: list[tuple[int, int, str]]) -> str:
        def hhmm(minute: int) -> str:
            return f"{minute // 60:02d}:{minute % 60:02d}"

        routine = [
            (7 * 60, 7 * 60 + 30, "waking up and getting ready"),
            (7 * 60 + 30, 9 * 60 + 30, f"having breakfast at {self.rendezvous}"),
        ]
        taken: list[tuple[int, int, str]] = []
        for start, end, activity in commitments:
            if all(end <= s or start >= e for s, e, _ in taken):
                taken.append((start, end, activity))
        for start, end, activity in routine:
            free_start = start
            for s, e, _ in sorted(taken):
                if s >= end or e <= free_start:
                    continue
                if s > free_start:
                    taken.append((free_start, s, activity))
                free_start = max(free_start, e)
            if free_start < end:
                taken.append((free_start, end, activity))
        taken.sort()
        lines = []
        cursor = 7 * 60
        for start, end, activity in taken:
            if start > cursor:
                lines.append(f"{hhmm(cursor)} - {hhmm(start)} | relaxing at home")
            lines.append(f"{hhmm(start)} - {hhmm(end)} | {activity}")
            cursor = end
        if cursor < 22 * 60:
            lines.append(f"{hhmm(cursor)} - 22:00 | relaxing at home")
        return "\n".join(lines)

    # -- decomposition and grounding ---------------------------------------

    def _decompose(self, text: str) -> str:
        match = re.search(r"following between \d{2}:\d{2} and \d{2}:\d{2}: (?P<act>.+?)\.\n", text)
        minutes_match = re.search(r"minutes sum to (?P<m>\d+)", text)
        if not match or not minutes_match:
            return ""
        return f"{match.group('act')} -- {minutes_match.group('m')}"

    def _location(self, text: str) -> str:
        action_match = _ACTION.search(text)
        living_match = _LIVING_AREA.search(text)
        action = action_match.group("action") if action_match else ""
        lowered = action.lower()
        arenas = [
            line[2:].strip()
            for line in text.splitlines()
            if line.startswith("- ") and "/" in line
        ]
        if " online" not in lowered:
            best = ""
            for arena_path in arenas:
                arena_name = arena_path.split("/")[-1]
                if arena_name.lower() in lowered and len(arena_name) > len(best):
                    best = arena_name
            if best:
                return best
        return living_match.group("path").strip() if living_match else ""

    # -- conversation -------------------------------------------------------

    def _converse(self, text: str) -> str:
        structured = '"utterance"' in text
        speakers = _SPEAKERS.search(text)
        if not speakers:
            return ""
        speaker, listener = speakers.group("speaker"), speakers.group("listener")
        now_match = _NOW.search(text)
        now = datetime.strptime(now_match.group("dt"), "%Y-%m-%d %H:%M") if now_match else None
        rounds = _conversation_lines(text)
        last_other = next(
            (utterance for who, utterance in reversed(rounds) if who != speaker), ""
        )
        utterance, end = self._next_utterance(text, speaker, listener, now, rounds, last_other)
        if structured:
            return json.dumps({"utterance": utterance, "end": end})
        return utterance

    def _next_utterance(
        self,
        text: str,
        speaker: str,
        listener: str,
        now: Optional[datetime],
        rounds: list[tuple[str, str]],
        last_other: str,
    ) -> tuple[str, bool]:
        task = _parse_task(text)
        if task is not None:
            if task.category == "appointment" and listener != task.target:
                return self._small_talk(listener, rounds, last_other)
            if _ACCEPT.search(last_other):
                return "Wonderful, see you then!", True
            if not any(who == speaker for who, _ in rounds):
                living_match = _LIVING_AREA.search(text)
                own_arena = living_match.group("path").strip().split("/")[-1] if living_match else "home"
                return self._invitation(task, listener, now, own_arena), False
            return "Alright, let's talk again soon.", True
        return self._respond(listener, rounds, last_other)

    def _invitation(self, task: _Task, listener: str, now: Optional[datetime], own_arena: str) -> str:
        proposal = (now or datetime(2023, 1, 1, 9, 0)).replace(hour=15, minute=0) + timedelta(days=1)
        date_text = proposal.strftime("%Y-%m-%d")
        if task.category == "public":
            when = task.when
            return (
                f"Hi {listener}! I am hosting {task.activity} at {task.location} on "
                f"{when.strftime('%Y-%m-%d')} at {when.strftime('%H:%M')}. Please come!"
            )
        if task.category == "online":
            when = task.when
            return (
                f"Hi {listener}! I am hosting {task.activity} online on "
                f"{when.strftime('%Y-%m-%d')} at {when.strftime('%H:%M')}. Please join!"
            )
        if task.category == "inviting":
            return (
                f"Hi {listener}! I am organizing {task.activity} at {task.location} on "
                f"{date_text} at 15:00. Please join us!"
            )
        if task.category == "appointment":
            return (
                f"Hi {listener}! Could we meet to {task.purpose} at {own_arena} on "
                f"{date_text} at 15:00?"
            )
        return (
            f"Hi {listener}! Could you help me? Please first {task.sub1} at {task.loc1}, "
            f"and then {task.sub2} at {task.loc2}."
        )

    def _respond(self, listener: str, rounds: list[tuple[str, str]], last_other: str) -> tuple[str, bool]:
        match = _INVITE_PUBLIC.search(last_other)
        if match:
            return (
                f"Yes, I will come to {match.group('act')} at {match.group('loc')} on "
                f"{match.group('date')} at {match.group('time')}. Thank you for inviting me!"
            ), False
        match = _INVITE_ONLINE.search(last_other)
        if match:
            return (
                f"Yes, I will join {match.group('act')} online on "
                f"{match.group('date')} at {match.group('time')}. Count me in!"
            ), False
        match = _INVITE_GATHER.search(last_other)
        if match:
            return (
                f"Yes, I will join {match.group('act')} at {match.group('loc')} on "
                f"{match.group('date')} at {match.group('time')}. Sounds fun!"
            ), False
        match = _ASK_MEET.search(last_other)
        if match:
            return (
                f"Yes, let us meet to {match.group('purpose')} at {match.group('loc')} on "
                f"{match.group('date')} at {match.group('time')}. See you there!"
            ), False
        match = _ASK_HELP.search(last_other)
        if match:
            return (
                f"Of course, I will first {match.group('s1')} at {match.group('l1')} "
                f"and then {match.group('s2')} at {match.group('l2')}. Happy to help!"
            ), False
        return self._small_talk(listener, rounds, last_other)

    def _small_talk(self, listener: str, rounds: list[tuple[str, str]], last_other: str) -> tuple[str, bool]:
        if _GREETING.search(last_other):
            return f"Nice to see you too, {listener}. Take care!", True
        if not rounds:
            return f"Nice to see you, {listener}.", False
        return f"Good talking with you, {listener}.", len(rounds) >= 3

    # -- summary -------------------------------------------------------------

    def _summarize(self, text: str) -> str:
        perspective_match = _SUMMARY_PERSPECTIVE.search(text)
        name_match = _PERSONA_NAME.search(text)
        listener = (perspective_match or name_match).group("name") if (perspective_match or name_match) else ""
        lines = _conversation_lines(text)
        accepted = any(_ACCEPT.search(utterance) for _, utterance in lines)
        for who, utterance in lines:
            other = next((w for w, _ in lines if w != who), "someone")
            match = _INVITE_PUBLIC.search(utterance)
            if match and accepted:
                if who == listener:
                    return (
                        f"Invited {other} to {match.group('act')} at {match.group('loc')} on "
                        f"{match.group('date')} at {match.group('time')}; they accepted."
                    )
                return (
                    f"Agreed to come to {match.group('act')} at {match.group('loc')} on "
                    f"{match.group('date')} at {match.group('time')}."
                )
            match = _INVITE_ONLINE.search(utterance)
            if match and accepted:
                if who == listener:
                    return (
                        f"Invited {other} to {match.group('act')} online on "
                        f"{match.group('date')} at {match.group('time')}; they accepted."
                    )
                return (
                    f"Agreed to join {match.group('act')} online on "
                    f"{match.group('date')} at {match.group('time')}."
                )
            match = _INVITE_GATHER.search(utterance)
            if match and accepted:
                if who == listener:
                    return (
                        f"Invited {other} to {match.group('act')} at {match.group('loc')} on "
                        f"{match.group('date')} at {match.group('time')}; they accepted."
                    )
                return (
                    f"Agreed to join {match.group('act')} at {match.group('loc')} on "
                    f"{match.group('date')} at {match.group('time')}."
                )
            match = _ASK_MEET.search(utterance)
            if match and accepted:
                other_name = other if who == listener else who
                return (
                    f"Agreed to meet {other_name} to {match.group('purpose')} at {match.group('loc')} on "
                    f"{match.group('date')} at {match.group('time')}."
                )
            match = _ASK_HELP.search(utterance)
            if match and accepted:
                if who == listener:
                    return (
                        f"Asked {other} to help: first {match.group('s1')} at {match.group('l1')}, "
                        f"then {match.group('s2')} at {match.group('l2')}."
                    )
                return (
                    f"Agreed to help {who}: first {match.group('s1')} at {match.group('l1')}, "
                    f"then {match.group('s2')} at {match.group('l2')}."
                )
        other = next((w for w, _ in lines if w != listener), "a neighbor")
        return f"Had a friendly chat with {other}."

    # -- target planning -------------------------------------------------------

    def _target_plan(self, text: str) -> str:
        task = _parse_task(text)
        subject = task.activity if task and task.activity else "the goal"
        if "decompose the task into" in text:
            if task is not None and task.category == "appointment":
                return "\n".join(
                    (
                        f"First, I need to find {task.target} and talk to them.",
                        f"Then, I will propose a time and place to {task.purpose}.",
                        "I will confirm the agreed time and place clearly.",
                        "On the day, I will show up on time at the agreed place.",
                    )
                )
            if task is not None and task.category == "help":
                return "\n".join(
                    (
                        "First, I need to find a friend who can help me.",
                        f"Then, I will ask them to {task.sub1} at {task.loc1}.",
                        f"I will also explain they should then {task.sub2} at {task.loc2}.",
                        "Finally, I will thank them for their help.",
                    )
                )
            return "\n".join(
                (
                    f"First, I need to prepare for {subject}.",
                    f"Then, I will invite people to {subject}, clearly stating the date, time, and location.",
                    "I will confirm attendance with everyone I invite.",
                    "On the day, I will be ready early.",
                    "Finally, I will make sure everyone has a good time.",
                )
            )
        if "making the schedule of the day" in text:
            return f"Ensure to prepare for {subject} and schedule time for it today."
        if "talking to others" in text:
            return "\n".join(
                (
                    f"Clearly state the date, time, and location of {subject}.",
                    "Invite everyone you meet.",
                    "Confirm attendance before ending the conversation.",
                )
            )
        return ""

    # -- judging -------------------------------------------------------------

    def _judge(self, text: str) -> str:
        body_match = re.search(r"Text:\n(?P<body>.*)\n\nQuestion: (?P<q>.+)\nAnswer", text, re.DOTALL)
        if not body_match:
            return "no"
        body = body_match.group("body").lower()
        question = body_match.group("q")

        def yes(condition: bool) -> str:
            return "yes" if condition else "no"

        match = re.search(r"namely (?P<expected>.+?)\?", question)
        if match:
            return yes(match.group("expected").lower() in body)
        match = re.search(r"inviting the other person to (?P<act>.+?)\?", question)
        if match:
            return yes(match.group("act").lower() in body)
        match = re.search(r"proposing to (?P<purpose>.+?)\?", question)
        if match:
            return yes(match.group("purpose").lower() in body)
        if "agreeing on a specific date and time" in question:
            return yes(re.search(rf"{_DATE} at {_TIME}", body) is not None)
        if "agreeing on a specific meeting place" in question:
            return yes(re.search(rf" at \S[^.!?]*? on {_DATE}", body) is not None)
        if "asking the other person for help" in question:
            return yes("help" in body)
        match = re.search(r"convey the step '(?P<step>.+?)' at (?P<loc>.+?)\?", question)
        if match:
            return yes(match.group("step").lower() in body and match.group("loc").lower() in body)
        return "no"

"""Full simulation runs: assign one task, simulate the town, record everything."""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date, datetime, time as time_of_day
from typing import Optional

from .agents import (
    SLEEP_MINUTE,
    WAKE_MINUTE,
    DailyPlan,
    PlanEntry,
    choose_action_location,
    decompose_entry,
    plan_day,
    should_initiate,
)
from .backend import Backend, CaptureLog
from .conversation import Speaker, run_conversation, summarize_conversation
from .personas import MemoryStream, Persona
from .seeds import substream
from .target_planning import TargetPlan, build_target_plan, ensure_plan_reminder, inject
from .tasks import TaskInstance
from .world import (
    DecidedAction,
    SimClock,
    Transcript,
    WorldMap,
    WorldState,
    advance_tick,
    arena_of,
    join_path,
)

ARCH_BASE = "ga"
ARCH_TARGET_PLANNING = "ga_tdp"
ARCHITECTURES = (ARCH_BASE, ARCH_TARGET_PLANNING)

MINUTES_PER_DAY = 24 * 60


@dataclass
class SimulationConfig:
    seed: int = 0
    tick_minutes: int = 10
    n_days: int = 3
    start_date: date = date(2023, 2, 13)
    architecture: str = ARCH_BASE
    initiation_probability: float = 0.1
    cooldown_ticks: int = 12
    max_rounds: int = 8
    memory_top_k: int = 10
    structured_replies: bool = True

    @property
    def ticks_per_day(self) -> int:
        return MINUTES_PER_DAY // self.tick_minutes

    @property
    def total_ticks(self) -> int:
        return self.n_days * self.ticks_per_day

    @property
    def start_datetime(self) -> datetime:
        return datetime.combine(self.start_date, time_of_day(0, 0))


@dataclass
class AgentRuntime:
    persona: Persona
    backend: Backend
    is_performer: bool = False
    memory: MemoryStream = field(default_factory=MemoryStream)
    plan: Optional[DailyPlan] = None
    planned_date: Optional[date] = None
    target_plan: Optional[TargetPlan] = None
    invited: set[str] = field(default_factory=set)
    queue: list[tuple[str, int]] = field(default_factory=list)
    current_entry: Optional[PlanEntry] = None
    current_action: Optional[tuple[str, tuple[str, ...]]] = None
    ticks_left: int = 0
    last_arena: Optional[tuple[str, ...]] = None

    @property
    def name(self) -> str:
        return self.persona.name


@dataclass
class RunResult:
    instance: TaskInstance
    config: SimulationConfig
    world: WorldState
    runtimes: dict[str, AgentRuntime]
    capture: CaptureLog
    performer_target_plan: Optional[TargetPlan] = None

    @property
    def trajectory(self):
        return self.world.trajectory

    @property
    def clock(self) -> SimClock:
        return self.world.clock


class Simulation:
    """One task, one cast, a configurable number of simulated days."""

    def __init__(
        self,
        instance: TaskInstance,
        roster: list[Persona],
        world_map: WorldMap,
        config: SimulationConfig,
        performer_backend: Backend,
        background_backend: Backend,
        capture: Optional[CaptureLog] = None,
    ):
        if config.architecture not in ARCHITECTURES:
            raise ValueError(f"unknown architecture {config.architecture!r}")
        self.instance = instance
        self.config = config
        self.capture = capture if capture is not None else CaptureLog()
        by_name = {p.name: p for p in roster}
        missing = [n for n in instance.cast if n not in by_name]
        if missing:
            raise ValueError(f"cast members missing from roster: {missing}")

        self.runtimes: dict[str, AgentRuntime] = {}
        for name in instance.cast:
            persona = by_name[name]
            is_performer = name == instance.performer
            if is_performer and config.architecture == ARCH_BASE:
                # Baseline task injection: the task rides in the currently field.
                persona = persona.with_currently(instance.currently_text)
            backend = performer_backend if is_performer else background_backend
            self.runtimes[name] = AgentRuntime(persona=persona, backend=backend, is_performer=is_performer)

        clock = SimClock(start=config.start_datetime, tick_minutes=config.tick_minutes)
        self.world = WorldState(
            world_map,
            clock,
            agent_order=list(instance.cast),
            initial_positions={n: arena_of(rt.persona.living_area) for n, rt in self.runtimes.items()},
        )
        self.rng_initiation = substream(config.seed, "initiation")
        self.cooldowns: dict[tuple[str, str], int] = {}
        self._conversation_count = 0

        performer_rt = self.runtimes[instance.performer]
        if config.architecture == ARCH_TARGET_PLANNING:
            from .tasks import task_description_block

            performer_rt.target_plan = build_target_plan(
                performer_rt.persona, task_description_block(instance), performer_rt.backend
            )
            tick0 = 0
            performer_rt.memory.add("tdp_plan", performer_rt.target_plan.general_plan_text(), tick0)
            performer_rt.memory.add(
                "tdp_reminder", performer_rt.target_plan.conversation_reminder_text(), tick0
            )

    # -- task bookkeeping ----------------------------------------------------

    def _unmet_targets(self, rt: AgentRuntime) -> list[str]:
        if not rt.is_performer:
            return []
        instance = self.instance
        if instance.category == "appointment":
            wanted = [instance.target_person] if instance.target_person else []
        elif instance.category == "asking_for_help":
            wanted = [] if rt.invited else list(instance.background)
        else:
            wanted = list(instance.background)
        return [name for name in wanted if name not in rt.invited]

    def _conversation_sections(self, rt: AgentRuntime) -> dict[str, str]:
        if rt.is_performer and rt.target_plan is not None:
            return inject(rt.target_plan, "conversation", {}, diagnostics=self.world.diagnostics)
        return {}

    # -- per-tick phases -------------------------------------------------------

    def _ensure_plan(self, rt: AgentRuntime, today: date) -> None:
        sections: dict[str, str] = {}
        if rt.is_performer and rt.target_plan is not None:
            ensure_plan_reminder(rt.target_plan, rt.persona, today, rt.backend)
            sections = inject(
                rt.target_plan, "daily_planning", {}, for_date=today, diagnostics=self.world.diagnostics
            )
            reminder = rt.target_plan.plan_reminders[today.isoformat()]
            rt.memory.add("tdp_reminder", reminder, self.world.clock.tick_index)
        rt.plan = plan_day(
            rt.persona,
            rt.memory,
            today,
            rt.backend,
            sections=sections,
            previous_plan=rt.plan,
            memory_top_k=self.config.memory_top_k,
            diagnostics=self.world.diagnostics,
        )
        rt.planned_date = today
        rt.queue = []
        rt.current_entry = None
        rt.current_action = None
        rt.ticks_left = 0

    def _decide(self, rt: AgentRuntime, minute_of_day: int) -> DecidedAction:
        if rt.plan is None or minute_of_day < WAKE_MINUTE or minute_of_day >= SLEEP_MINUTE:
            return DecidedAction("sleeping", arena_of(rt.persona.living_area))
        entry = rt.plan.entry_at(minute_of_day)
        if entry is None:
            return DecidedAction("free time at home", arena_of(rt.persona.living_area))
        if entry is not rt.current_entry:
            rt.current_entry = entry
            rt.queue = decompose_entry(rt.persona, entry, rt.backend, self.config.tick_minutes)
            rt.current_action = None
            rt.ticks_left = 0
        if rt.current_action is None or rt.ticks_left <= 0:
            if rt.queue:
                text, ticks = rt.queue.pop(0)
            else:
                text, ticks = entry.activity, 1
            location = choose_action_location(
                rt.persona, text, self.world.map, rt.backend, diagnostics=self.world.diagnostics
            )
            rt.current_action = (text, location)
            rt.ticks_left = ticks
        rt.ticks_left -= 1
        text, location = rt.current_action
        return DecidedAction(text, location)

    def _run_conversations(self, decided: dict[str, DecidedAction], tick: int, now: datetime) -> None:
        asleep = {name for name, action in decided.items() if action.action_text == "sleeping"}
        groups: dict[tuple[str, ...], list[str]] = {}
        for name in self.world.agent_order:
            if name in asleep:
                continue
            groups.setdefault(arena_of(decided[name].location), []).append(name)
        engaged: set[str] = set()
        for name in self.world.agent_order:
            if name in engaged or name in asleep:
                continue
            rt = self.runtimes[name]
            arena = arena_of(decided[name].location)
            others = [a for a in groups.get(arena, []) if a != name]
            partner_name = should_initiate(
                name,
                others,
                self.rng_initiation,
                unmet_targets=self._unmet_targets(rt),
                engaged=list(engaged),
                cooldowns=self.cooldowns,
                tick=tick,
                cooldown_ticks=self.config.cooldown_ticks,
                initiation_probability=self.config.initiation_probability,
            )
            if partner_name is None:
                continue
            partner_rt = self.runtimes[partner_name]
            conversation_id = f"c{self._conversation_count:04d}"
            self._conversation_count += 1
            snapshots = {
                name: rt.memory.snapshot(),
                partner_name: partner_rt.memory.snapshot(),
            }
            state = run_conversation(
                self._speaker(rt, decided),
                self._speaker(partner_rt, decided),
                now,
                max_rounds=self.config.max_rounds,
            )
            transcript = Transcript(
                conversation_id=conversation_id,
                tick=tick,
                initiator=name,
                partner=partner_name,
                arena=arena,
                rounds=state.rounds,
                memory_snapshots=snapshots,
            )
            for participant in (rt, partner_rt):
                if state.rounds:
                    summary, degraded = summarize_conversation(
                        participant.persona, state.rounds, participant.backend
                    )
                    transcript.summaries[participant.name] = summary
                    participant.memory.add("chat_summary", summary, tick)
                    if degraded:
                        self.world.diagnose("degraded_summary", agent=participant.name, conversation=conversation_id)
            self.world.trajectory.add_transcript(transcript)
            decided[name].conversation_id = conversation_id
            decided[partner_name].conversation_id = conversation_id
            engaged.update((name, partner_name))
            self.cooldowns[tuple(sorted((name, partner_name)))] = tick
            for participant, other in ((rt, partner_name), (partner_rt, name)):
                if participant.is_performer:
                    participant.invited.add(other)

    def _speaker(self, rt: AgentRuntime, decided: dict[str, DecidedAction]) -> Speaker:
        return Speaker(
            persona=rt.persona,
            backend=rt.backend,
            memory=rt.memory,
            current_action=decided[rt.name].action_text,
            structured=self.config.structured_replies,
            sections=self._conversation_sections(rt),
            memory_top_k=self.config.memory_top_k,
        )

    def _observe(self, tick: int) -> None:
        for name in self.world.agent_order:
            rt = self.runtimes[name]
            arena = arena_of(self.world.positions[name])
            if arena != rt.last_arena:
                rt.last_arena = arena
                when = self.world.clock.time_at(tick).strftime("%H:%M")
                rt.memory.add("observation", f"Arrived at {join_path(arena)} at {when}.", tick)

    def run(self) -> RunResult:
        for tick in range(self.config.total_ticks):
            now = self.world.clock.time_at(tick)
            minute_of_day = now.hour * 60 + now.minute
            today = now.date()
            for name in self.world.agent_order:
                rt = self.runtimes[name]
                if minute_of_day >= WAKE_MINUTE and rt.planned_date != today:
                    self._ensure_plan(rt, today)
            decided = {name: self._decide(self.runtimes[name], minute_of_day) for name in self.world.agent_order}
            self._run_conversations(decided, tick, now)
            advance_tick(self.world, decided)
            self._observe(tick)
        self.world.trajectory.freeze()
        performer_rt = self.runtimes[self.instance.performer]
        return RunResult(
            instance=self.instance,
            config=self.config,
            world=self.world,
            runtimes=self.runtimes,
            capture=self.capture,
            performer_target_plan=performer_rt.target_plan,
        )

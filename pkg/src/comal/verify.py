"""Bounded verification by exhaustive enumeration of reachable enactments.

Four checks are provided over a finite bound (key bindings, value pools, and
an observation budget):

* safety: no reachable state binds two values to one parameter of one
  enactment. Emissions are validated against the *sender's* knowledge only,
  so conflicting bindings by mutually ignorant roles are reachable and get
  caught here.
* liveness: from every reachable state some extension binds every public
  ``out`` parameter for every initiated key binding.
* embedding: every complete enactment of an input protocol replays verbatim
  inside a composed protocol, preserving each role's observation order.
* alignment reachability: from every reachable state of a composed protocol,
  some extension is aligned for every commitment.

Safety and liveness work on knowledge-set states: a role's enabled moves and
the two verdicts depend only on what each role knows, not on the order it
learned it, so states collapse to per-role knowledge sets.

Alignment needs time. Observations are treated as instantaneous next to
window units: window offsets are scaled by a large unit, every observation
happens in the current *phase*, and the clock advances only through explicit
deadline-lapse moves that jump to the next pending window boundary. Knowledge
is annotated with its phase, which fully determines window membership;
deadlines sharing one nominal instant lapse together. The punctual-delivery
restriction (deliveries and available forwards happen before deadlines pass)
gates lapse moves on empty channels and no enabled forwarding emissions.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from . import commitments as cm
from .commitments import CommitmentSpec, print_event
from .enactment import (
    EMIT,
    RECV,
    HistoryVector,
    MessageInstance,
    Model,
    ModelEntry,
    Observation,
    RoleKnowledge,
    emission_candidates,
    emission_violation,
    kb_agree,
)
from .errors import BoundExceeded
from .protocol import Protocol, Uod, uod
from .semantics import check_alignment_models, evaluate, EvaluationContext
from .synthesis import forwarding_registry

SCALE = 10 ** 9

SAFETY = "SAFETY"
LIVENESS = "LIVENESS"
EMBEDDING = "EMBEDDING"
ALIGNMENT_REACHABILITY = "ALIGNMENT_REACHABILITY"


@dataclass(frozen=True)
class Bound:
    """Finite restriction of the enactment space."""

    key_values: tuple[str, ...] = ("1",)
    max_ticks: int = 80  # observations per enactment
    out_value_pool: Mapping[str, Sequence[str]] | None = None
    delivery: str = "unordered"  # "unordered" | "fifo" (fifo: ordered enumeration only)
    max_states: int = 400_000


@dataclass(frozen=True)
class VerificationReport:
    property: str
    holds: bool
    witness: object | None
    states_explored: int
    detail: str = ""


def _key_bindings(universe: Uod, bound: Bound) -> list[dict[str, str]]:
    bindings: list[dict[str, str]] = []
    for schema in universe.schemas:
        for value in bound.key_values:
            kb = {k: value for k in schema.keys}
            if kb not in bindings:
                bindings.append(kb)
    return bindings


def _knowledge_from(instances: Iterable[MessageInstance], role: str) -> RoleKnowledge:
    knowledge = RoleKnowledge(role)
    for inst in sorted(instances, key=lambda i: (i.schema, i.bindings)):
        direction = EMIT if inst.sender == role else RECV
        knowledge.observe(Observation(inst, direction, 0))
    return knowledge


# ---------------------------------------------------------------------------
# Knowledge-set enumeration (safety, liveness)


class KnowledgeGraph:
    """Reachable per-role knowledge sets under emission and delivery moves."""

    def __init__(self, universe: Uod, bound: Bound, public_out: Sequence[str]):
        self.universe = universe
        self.bound = bound
        self.roles = tuple(sorted(universe.roles))
        self.role_index = {r: i for i, r in enumerate(self.roles)}
        self.key_bindings = _key_bindings(universe, bound)
        self.public_out = tuple(public_out)
        self.states: list[tuple[frozenset[MessageInstance], ...]] = []
        self.parents: list[tuple[int, tuple] | None] = []
        self.edges: list[list[tuple[tuple, int]]] = []
        self.index: dict[tuple, int] = {}
        self.safety_violation: tuple[int, str] | None = None

    # -- construction -------------------------------------------------------

    def build(self, stop_on_safety: bool = False) -> None:
        initial = tuple(frozenset() for _ in self.roles)
        self._add(initial, None)
        frontier = [0]
        while frontier:
            next_frontier: list[int] = []
            for sid in frontier:
                if self.safety_violation and stop_on_safety:
                    return
                for move, succ in self._successors(self.states[sid]):
                    tid = self.index.get(succ)
                    if tid is None:
                        tid = self._add(succ, (sid, move))
                        next_frontier.append(tid)
                        if move[0] == EMIT:
                            self._check_safety(sid, tid, move[2])
                    self.edges[sid].append((move, tid))
            frontier = next_frontier

    def _add(self, state, parent) -> int:
        if len(self.states) >= self.bound.max_states:
            raise BoundExceeded(f"more than {self.bound.max_states} states", partial=self)
        sid = len(self.states)
        self.states.append(state)
        self.parents.append(parent)
        self.edges.append([])
        self.index[state] = sid
        return sid

    def _successors(self, state) -> list[tuple[tuple, tuple]]:
        out = []
        if sum(len(s) for s in state) >= self.bound.max_ticks:
            return out
        for ri, role in enumerate(self.roles):
            knowledge = _knowledge_from(state[ri], role)
            for inst in emission_candidates(
                knowledge, self.universe, role, self.key_bindings, self.bound.out_value_pool
            ):
                succ = self._with(state, ri, inst)
                out.append(((EMIT, role, inst), succ))
        for ri, role in enumerate(self.roles):
            for inst in sorted(state[ri], key=lambda i: (i.schema, i.bindings)):
                if inst.sender != role:
                    continue
                ti = self.role_index[inst.receiver]
                if inst not in state[ti]:
                    succ = self._with(state, ti, inst)
                    out.append(((RECV, inst.receiver, inst), succ))
        return out

    @staticmethod
    def _with(state, ri: int, inst: MessageInstance):
        return tuple(s | {inst} if i == ri else s for i, s in enumerate(state))

    def _check_safety(self, parent_id: int, state_id: int, new: MessageInstance) -> None:
        if self.safety_violation is not None:
            return
        emitted = {
            inst
            for ri, role in enumerate(self.roles)
            for inst in self.states[parent_id][ri]
            if inst.sender == role
        }
        new_bindings = dict(new.bindings)
        for inst in emitted:
            if not kb_agree(inst.key_binding, new.key_binding):
                continue
            for param, value in inst.bindings:
                if param in new_bindings and new_bindings[param] != value:
                    self.safety_violation = (
                        state_id,
                        f"parameter {param!r} bound to {value!r} by {inst.schema!r} "
                        f"and to {new_bindings[param]!r} by {new.schema!r}",
                    )
                    return

    # -- queries -------------------------------------------------------------

    def path_to(self, state_id: int) -> list[dict]:
        moves = []
        current = state_id
        while self.parents[current] is not None:
            parent, move = self.parents[current]
            moves.append(move)
            current = parent
        moves.reverse()
        return [_move_json(move, tick) for tick, move in enumerate(moves, start=1)]

    def is_complete(self, state) -> bool:
        instances = [inst for ri, role in enumerate(self.roles) for inst in state[ri] if inst.sender == role]
        initiated = {inst.key_binding for inst in instances}
        for kb in initiated:
            for param in self.public_out:
                if not any(
                    inst.binding(param) is not None and kb_agree(inst.key_binding, kb)
                    for inst in instances
                ):
                    return False
        return True

    def backward_closure(self, seeds: Iterable[int]) -> set[int]:
        reverse: list[list[int]] = [[] for _ in self.states]
        for sid, out_edges in enumerate(self.edges):
            for _, tid in out_edges:
                reverse[tid].append(sid)
        closed = set(seeds)
        stack = list(closed)
        while stack:
            node = stack.pop()
            for pred in reverse[node]:
                if pred not in closed:
                    closed.add(pred)
                    stack.append(pred)
        return closed


def _move_json(move: tuple, tick: int) -> dict:
    kind = move[0]
    if kind == "lapse":
        return {"tick": tick, "lapse": move[1]}
    _, role, inst = move
    return {
        "tick": tick,
        "role": role,
        "dir": kind,
        "schema": inst.schema,
        "bindings": dict(inst.bindings),
    }


def check_safety(
    p: Protocol, bound: Bound = Bound(), registry: Mapping[str, Protocol] | None = None
) -> VerificationReport:
    """Key integrity across every reachable state at the bound."""
    universe = uod(p, registry)
    graph = KnowledgeGraph(universe, bound, p.out_params)
    graph.build(stop_on_safety=True)
    if graph.safety_violation is not None:
        state_id, detail = graph.safety_violation
        witness = {"reach": graph.path_to(state_id), "violation": detail}
        return VerificationReport(SAFETY, False, witness, len(graph.states), detail)
    return VerificationReport(SAFETY, True, None, len(graph.states))


def check_liveness(
    p: Protocol, bound: Bound = Bound(), registry: Mapping[str, Protocol] | None = None
) -> VerificationReport:
    """Every reachable state can still be extended to a complete enactment."""
    universe = uod(p, registry)
    graph = KnowledgeGraph(universe, bound, p.out_params)
    graph.build()
    complete = [sid for sid, state in enumerate(graph.states) if graph.is_complete(state)]
    closed = graph.backward_closure(complete)
    stuck = [sid for sid in range(len(graph.states)) if sid not in closed]
    if stuck:
        worst = stuck[0]
        witness = {"reach": graph.path_to(worst)}
        return VerificationReport(
            LIVENESS, False, witness, len(graph.states), "state with no completing extension"
        )
    return VerificationReport(LIVENESS, True, None, len(graph.states))


@dataclass(frozen=True)
class Theorem1Result:
    """Preservation of safety and liveness by an operationalization."""

    safety_input: VerificationReport
    safety_composed: VerificationReport
    liveness_input: VerificationReport
    liveness_composed: VerificationReport

    @property
    def safety_preserved(self) -> bool:
        return (not self.safety_input.holds) or self.safety_composed.holds

    @property
    def liveness_preserved(self) -> bool:
        return (not self.liveness_input.holds) or self.liveness_composed.holds

    @property
    def holds(self) -> bool:
        return self.safety_preserved and self.liveness_preserved


def check_theorem1(
    input_protocol: Protocol,
    composed: Protocol,
    bound: Bound = Bound(),
    registry: Mapping[str, Protocol] | None = None,
) -> Theorem1Result:
    return Theorem1Result(
        safety_input=check_safety(input_protocol, bound, registry),
        safety_composed=check_safety(composed, bound, registry),
        liveness_input=check_liveness(input_protocol, bound, registry),
        liveness_composed=check_liveness(composed, bound, registry),
    )


# ---------------------------------------------------------------------------
# Ordered enumeration (exact per-role sequences)


class EnactmentGraph:
    """Reachable history vectors, deduplicated up to tick relabeling: states
    are the per-role observation sequences, with ticks assigned by global
    arrival order on reconstruction."""

    def __init__(self, universe: Uod, bound: Bound):
        self.universe = universe
        self.bound = bound
        self.roles = tuple(sorted(universe.roles))
        self.role_index = {r: i for i, r in enumerate(self.roles)}
        self.key_bindings = _key_bindings(universe, bound)
        self.states: list[tuple[tuple[tuple[str, MessageInstance], ...], ...]] = []
        self.parents: list[tuple[int, tuple] | None] = []
        self.edges: list[list[tuple[tuple, int]]] = []
        self.index: dict[tuple, int] = {}

    def build(self) -> None:
        initial = tuple(() for _ in self.roles)
        self._add(initial, None)
        frontier = [0]
        while frontier:
            next_frontier = []
            for sid in frontier:
                for move, succ in self._successors(self.states[sid]):
                    tid = self.index.get(succ)
                    if tid is None:
                        tid = self._add(succ, (sid, move))
                        next_frontier.append(tid)
                    self.edges[sid].append((move, tid))
            frontier = next_frontier

    def _add(self, state, parent) -> int:
        if len(self.states) >= self.bound.max_states:
            raise BoundExceeded(f"more than {self.bound.max_states} states", partial=self)
        sid = len(self.states)
        self.states.append(state)
        self.parents.append(parent)
        self.edges.append([])
        self.index[state] = sid
        return sid

    def _successors(self, state):
        out = []
        if sum(len(s) for s in state) >= self.bound.max_ticks:
            return out
        for ri, role in enumerate(self.roles):
            knowledge = _knowledge_from([inst for _, inst in state[ri]], role)
            for inst in emission_candidates(
                knowledge, self.universe, role, self.key_bindings, self.bound.out_value_pool
            ):
                out.append(((EMIT, role, inst), self._with(state, ri, EMIT, inst)))
        pending = self._in_flight(state)
        if self.bound.delivery == "fifo":
            first_per_channel = {}
            for inst in pending:
                first_per_channel.setdefault((inst.sender, inst.receiver), inst)
            pending = list(first_per_channel.values())
        for inst in pending:
            ti = self.role_index[inst.receiver]
            out.append(((RECV, inst.receiver, inst), self._with(state, ti, RECV, inst)))
        return out

    def _in_flight(self, state) -> list[MessageInstance]:
        received = {
            inst for ri, role in enumerate(self.roles) for _, inst in state[ri] if inst.receiver == role
        }
        pending = []
        for ri, role in enumerate(self.roles):
            for direction, inst in state[ri]:
                if direction == EMIT and inst not in received:
                    pending.append(inst)
        return pending

    @staticmethod
    def _with(state, ri: int, direction: str, inst: MessageInstance):
        return tuple(s + ((direction, inst),) if i == ri else s for i, s in enumerate(state))

    def vector(self, state_id: int) -> HistoryVector:
        moves = []
        current = state_id
        while self.parents[current] is not None:
            parent, move = self.parents[current]
            moves.append(move)
            current = parent
        moves.reverse()
        v = HistoryVector.empty(self.roles)
        for tick, (direction, _, inst) in enumerate(moves, start=1):
            v = v.extend(Observation(inst, direction, tick))
        return v

    def is_complete(self, state, public_out: Sequence[str]) -> bool:
        instances = [inst for ri, role in enumerate(self.roles) for d, inst in state[ri] if d == EMIT]
        initiated = {inst.key_binding for inst in instances}
        for kb in initiated:
            for param in public_out:
                if not any(
                    inst.binding(param) is not None and kb_agree(inst.key_binding, kb)
                    for inst in instances
                ):
                    return False
        return True


def enumerate_uoe(
    p: Protocol, bound: Bound = Bound(), registry: Mapping[str, Protocol] | None = None
) -> EnactmentGraph:
    """The reachability graph of viable history vectors at the bound."""
    graph = EnactmentGraph(uod(p, registry), bound)
    graph.build()
    return graph


def check_embedding(
    input_protocol: Protocol,
    composed: Protocol,
    bound: Bound = Bound(),
    registry: Mapping[str, Protocol] | None = None,
) -> VerificationReport:
    """Every complete enactment of the input protocol replays move for move
    inside the composed protocol, so each role's input-schema observations
    appear there in the same order."""
    input_graph = enumerate_uoe(input_protocol, bound, registry)
    composed_universe = uod(composed, registry)
    checked = 0
    for sid, state in enumerate(input_graph.states):
        if not input_graph.is_complete(state, input_protocol.out_params):
            continue
        checked += 1
        vector = input_graph.vector(sid)
        knowledge = {role: RoleKnowledge(role) for role in vector.roles}
        for obs in vector.observations():
            if obs.direction == EMIT:
                schema = composed_universe.schema(obs.instance.schema)
                bad = emission_violation(knowledge[obs.role], schema, obs.instance, obs.tick)
                if bad is not None:
                    witness = {
                        "trace": [_move_json((obs.direction, obs.role, obs.instance), obs.tick)],
                        "violation": str(bad),
                    }
                    return VerificationReport(
                        EMBEDDING, False, witness, len(input_graph.states),
                        "input enactment not viable inside the composition",
                    )
            knowledge[obs.role].observe(obs)
    return VerificationReport(
        EMBEDDING, True, None, len(input_graph.states),
        f"{checked} complete enactments replayed order-preservingly",
    )


# ---------------------------------------------------------------------------
# Timed enumeration (alignment reachability)


def _window_anchors(commitments: Sequence[CommitmentSpec]):
    """Every (anchor expression, offset) pair appearing as an event-anchored
    window bound, plus absolute finite upper bounds as (None, instant)."""
    anchors: dict[tuple[str, int], tuple[cm.EventExpr | None, int]] = {}
    seen_commitments: set[str] = set()

    def walk(expr: cm.EventExpr) -> None:
        if isinstance(expr, cm.Window):
            walk(expr.inner)
            for bound in (expr.lower, expr.upper):
                if bound.base_event is not None:
                    anchors[(print_event(bound.base_event), int(bound.offset))] = (
                        bound.base_event,
                        int(bound.offset),
                    )
                    walk(bound.base_event)
                elif bound.offset != cm.INFINITY:
                    anchors[("", int(bound.offset))] = (None, int(bound.offset))
        elif isinstance(expr, (cm.And, cm.Or, cm.Except)):
            walk(expr.left)
            walk(expr.right)
        elif isinstance(expr, cm.LifecycleEvent):
            walk_commitment(expr.commitment)

    def walk_commitment(c: CommitmentSpec) -> None:
        if c.name in seen_commitments:
            return
        seen_commitments.add(c.name)
        for expr in (c.create, c.detach, c.discharge):
            walk(expr)

    for c in commitments:
        walk_commitment(c)
    return list(anchors.values())


class AlignmentGraph:
    """Reachable phase-annotated knowledge states of a composed protocol,
    including deadline-lapse moves."""

    def __init__(
        self,
        universe: Uod,
        commitments: Sequence[CommitmentSpec],
        bound: Bound,
        punctual: bool,
    ):
        self.universe = universe
        self.commitments = tuple(commitments)
        self.bound = bound
        self.punctual = punctual
        self.roles = tuple(sorted(universe.roles))
        self.role_index = {r: i for i, r in enumerate(self.roles)}
        self.key_bindings = _key_bindings(universe, bound)
        self.fwd_registry = forwarding_registry(universe)
        self.anchors = _window_anchors(commitments)
        # state: (per-role frozenset[(MessageInstance, phase)], now_phase)
        self.states: list[tuple] = []
        self.parents: list[tuple[int, tuple] | None] = []
        self.edges: list[list[tuple[tuple, int]]] = []
        self.index: dict[tuple, int] = {}
        self._model_cache: dict[frozenset, Model] = {}
        self._verdict_cache: dict[tuple, tuple[bool, int]] = {}
        self._pending_cache: dict[tuple, list[int]] = {}

    def build(self) -> None:
        initial = (tuple(frozenset() for _ in self.roles), 0)
        self._add(initial, None)
        frontier = [0]
        while frontier:
            next_frontier = []
            for sid in frontier:
                for move, succ in self._successors(self.states[sid]):
                    tid = self.index.get(succ)
                    if tid is None:
                        tid = self._add(succ, (sid, move))
                        next_frontier.append(tid)
                    self.edges[sid].append((move, tid))
            frontier = next_frontier

    def _add(self, state, parent) -> int:
        if len(self.states) >= self.bound.max_states:
            raise BoundExceeded(f"more than {self.bound.max_states} states", partial=self)
        sid = len(self.states)
        self.states.append(state)
        self.parents.append(parent)
        self.edges.append([])
        self.index[state] = sid
        return sid

    def _successors(self, state):
        sets, now_phase = state
        out = []
        emissions: list[tuple[str, MessageInstance]] = []
        if sum(len(s) for s in sets) < self.bound.max_ticks:
            for ri, role in enumerate(self.roles):
                knowledge = _knowledge_from([inst for inst, _ in sets[ri]], role)
                for inst in emission_candidates(
                    knowledge, self.universe, role, self.key_bindings, self.bound.out_value_pool
                ):
                    emissions.append((role, inst))
        received = {
            inst for ri, role in enumerate(self.roles) for inst, _ in sets[ri] if inst.receiver == role
        }
        pending = [
            inst
            for ri, role in enumerate(self.roles)
            for inst, _ in sorted(sets[ri], key=lambda e: (e[0].schema, e[0].bindings))
            if inst.sender == role and inst not in received
        ]
        for role, inst in emissions:
            succ = (self._with(sets, self.role_index[role], inst, now_phase), now_phase)
            out.append(((EMIT, role, inst), succ))
        for inst in pending:
            ti = self.role_index[inst.receiver]
            succ = (self._with(sets, ti, inst, now_phase), now_phase)
            out.append(((RECV, inst.receiver, inst), succ))
        lapse_value = self._next_boundary(sets, now_phase)
        if lapse_value is not None and self._lapse_allowed(pending, emissions):
            out.append((("lapse", lapse_value), (sets, lapse_value)))
        return out

    def _lapse_allowed(self, pending, emissions) -> bool:
        if not self.punctual:
            return True
        if pending:
            return False
        return not any(inst.schema in self.fwd_registry for _, inst in emissions)

    @staticmethod
    def _with(sets, ri: int, inst: MessageInstance, phase: int):
        return tuple(s | {(inst, phase)} if i == ri else s for i, s in enumerate(sets))

    def _model(self, entries: frozenset, role: str) -> Model:
        cached = self._model_cache.get(entries)
        if cached is not None:
            return cached
        first: dict[tuple[str, tuple], int] = {}
        for inst, phase in entries:
            naming = self.fwd_registry.get(inst.schema)
            if naming is not None:
                name = naming.base_message
                bindings = tuple(i for i in inst.bindings if i[0] != naming.id_param)
            else:
                name = inst.schema
                bindings = inst.bindings
            key = (name, bindings)
            if key not in first or phase < first[key]:
                first[key] = phase
        model = Model(
            role,
            tuple(
                ModelEntry(name, bindings, phase * SCALE)
                for (name, bindings), phase in sorted(first.items())
            ),
        )
        self._model_cache[entries] = model
        return model

    def _next_boundary(self, sets, now_phase: int) -> int | None:
        values = []
        for anchor, offset in self.anchors:
            if anchor is None and offset > now_phase:
                values.append(offset)
        for ri, role in enumerate(self.roles):
            values.extend(self._role_pending(sets[ri], role, now_phase))
        return min(values) if values else None

    def _role_pending(self, entries: frozenset, role: str, now_phase: int) -> list[int]:
        key = (entries, now_phase)
        cached = self._pending_cache.get(key)
        if cached is not None:
            return cached
        model = self._model(entries, role)
        ctx = EvaluationContext(model, now_phase * SCALE, self.universe, SCALE)
        values = []
        for anchor, offset in self.anchors:
            if anchor is None:
                continue
            for inst in evaluate(anchor, ctx):
                value = inst.timestamp // SCALE + offset
                if value > now_phase and value not in values:
                    values.append(value)
        self._pending_cache[key] = values
        return values

    def alignment(self, state) -> list[tuple[CommitmentSpec, bool]]:
        sets, now_phase = state
        out = []
        for c in self.commitments:
            debtor_entries = sets[self.role_index[c.debtor]]
            creditor_entries = sets[self.role_index[c.creditor]]
            key = (c.name, debtor_entries, creditor_entries, now_phase)
            cached = self._verdict_cache.get(key)
            if cached is None:
                result = check_alignment_models(
                    self._model(debtor_entries, c.debtor),
                    self._model(creditor_entries, c.creditor),
                    c,
                    now_phase * SCALE,
                    self.universe,
                    SCALE,
                )
                cached = (result.aligned, len(result.misalignments))
                self._verdict_cache[key] = cached
            out.append((c, cached[0]))
        return out

    def misalignment_count(self, state) -> int:
        sets, now_phase = state
        total = 0
        for c in self.commitments:
            key = (c.name, sets[self.role_index[c.debtor]], sets[self.role_index[c.creditor]], now_phase)
            total += self._verdict_cache.get(key, (True, 0))[1]
        return total

    def path_to(self, state_id: int) -> list[dict]:
        moves = []
        current = state_id
        while self.parents[current] is not None:
            parent, move = self.parents[current]
            moves.append(move)
            current = parent
        moves.reverse()
        return [_move_json(move, tick) for tick, move in enumerate(moves, start=1)]

    def forward_path(self, start: int, goal: set[int]) -> list[dict] | None:
        if start in goal:
            return []
        seen = {start}
        queue = deque([(start, [])])
        while queue:
            node, path = queue.popleft()
            for move, succ in self.edges[node]:
                if succ in goal:
                    return [_move_json(m, t) for t, m in enumerate(path + [move], start=1)]
                if succ not in seen:
                    seen.add(succ)
                    queue.append((succ, path + [move]))
        return None

    def backward_closure(self, seeds: Iterable[int]) -> set[int]:
        reverse: list[list[int]] = [[] for _ in self.states]
        for sid, out_edges in enumerate(self.edges):
            for _, tid in out_edges:
                reverse[tid].append(sid)
        closed = set(seeds)
        stack = list(closed)
        while stack:
            node = stack.pop()
            for pred in reverse[node]:
                if pred not in closed:
                    closed.add(pred)
                    stack.append(pred)
        return closed


def check_alignment_reachability(
    composed: Protocol,
    commitments: Sequence[CommitmentSpec],
    bound: Bound = Bound(),
    punctual: bool = True,
    registry: Mapping[str, Protocol] | None = None,
) -> VerificationReport:
    """From every reachable state, some extension is aligned for every
    commitment. On success the witness shows a maximally misaligned state and
    its aligning extension; on failure, a state with no aligning extension."""
    universe = uod(composed, registry)
    graph = AlignmentGraph(universe, commitments, bound, punctual)
    graph.build()
    mode = "punctual" if punctual else "unrestricted"
    aligned_per_commitment: dict[str, set[int]] = {}
    for sid, state in enumerate(graph.states):
        for c, aligned in graph.alignment(state):
            if aligned:
                aligned_per_commitment.setdefault(c.name, set()).add(sid)
    for c in commitments:
        seeds = aligned_per_commitment.get(c.name, set())
        closed = graph.backward_closure(seeds)
        missing = [sid for sid in range(len(graph.states)) if sid not in closed]
        if missing:
            witness = {
                "commitment": c.name,
                "reach": graph.path_to(missing[0]),
            }
            return VerificationReport(
                ALIGNMENT_REACHABILITY,
                False,
                witness,
                len(graph.states),
                f"{mode}: no aligning extension for {c.name!r}",
            )
    # Success: exhibit the most misaligned state and how it realigns.
    worst_id, worst_count = None, 0
    for sid, state in enumerate(graph.states):
        count = graph.misalignment_count(state)
        if count > worst_count:
            worst_id, worst_count = sid, count
    witness = None
    if worst_id is not None:
        all_aligned = {
            sid
            for sid in range(len(graph.states))
            if all(aligned for _, aligned in graph.alignment(graph.states[sid]))
        }
        extension = graph.forward_path(worst_id, all_aligned)
        witness = {
            "misaligned_state": graph.path_to(worst_id),
            "extension": extension,
        }
    return VerificationReport(
        ALIGNMENT_REACHABILITY, True, witness, len(graph.states), f"{mode}: aligning extensions exist"
    )

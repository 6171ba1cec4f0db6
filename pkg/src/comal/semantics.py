"""Evaluation of event expressions and commitment lifecycles over a role's
model, and the alignment check between debtor and creditor.

Instances correlate through shared key parameters. Windows are half-open:
an instance at timestamp ``t`` satisfies ``[lo, hi]`` when ``lo <= t < hi``,
where event-anchored bounds resolve per key binding to the anchor's timestamp
plus the offset; if the anchor is absent the instance is excluded. Conjunction
joins on shared keys and holds from the later timestamp; disjunction holds
from the earlier. An exception ``L except R`` holds for an instance of ``L``
only once ``R`` is absent *and* can no longer occur, i.e. its deadline has
passed at the evaluation instant; without a finite deadline it never holds.

``tick_unit`` scales window offsets, letting callers place many observations
inside one nominal time unit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

from . import commitments as cm
from .commitments import CommitmentSpec, EventExpr, lifecycle_formula
from .enactment import Bindings, HistoryVector, Model, kb_agree, project_model
from .errors import UnboundName
from .protocol import Uod
from .synthesis import ForwardingName

INF = math.inf


@dataclass(frozen=True)
class EventInstance:
    key_binding: Bindings
    attributes: Bindings
    timestamp: int | float


@dataclass(frozen=True)
class EvaluationContext:
    model: Model
    now: int | float
    universe: Uod
    tick_unit: int = 1
    registry: Mapping[str, CommitmentSpec] | None = None


def evaluate(expr: EventExpr, ctx: EvaluationContext) -> tuple[EventInstance, ...]:
    """The set of ``expr``'s instances entailed by the context's model."""
    return _eval(expr, ctx)


def _eval(expr: EventExpr, ctx: EvaluationContext) -> tuple[EventInstance, ...]:
    if isinstance(expr, cm.BaseEvent):
        try:
            keys = set(ctx.universe.schema(expr.name).keys)
        except Exception as exc:
            raise UnboundName(str(exc)) from None
        out = []
        for entry in ctx.model.entries:
            if entry.name == expr.name:
                kb = tuple(item for item in entry.bindings if item[0] in keys)
                out.append(EventInstance(kb, entry.bindings, entry.tick))
        return tuple(out)
    if isinstance(expr, cm.LifecycleEvent):
        return _eval(lifecycle_formula(expr.kind, expr.commitment), ctx)
    if isinstance(expr, cm.Window):
        out = []
        for inst in _eval(expr.inner, ctx):
            lo = _resolve_bound(expr.lower, inst.key_binding, ctx)
            hi = _resolve_bound(expr.upper, inst.key_binding, ctx)
            if lo is None or hi is None:
                continue
            if lo <= inst.timestamp < hi:
                out.append(inst)
        return tuple(out)
    if isinstance(expr, cm.And):
        out = []
        for left in _eval(expr.left, ctx):
            for right in _eval(expr.right, ctx):
                if kb_agree(left.key_binding, right.key_binding):
                    kb = _merge(left.key_binding, right.key_binding)
                    attrs = _merge(left.attributes, right.attributes)
                    out.append(EventInstance(kb, attrs, max(left.timestamp, right.timestamp)))
        return _dedupe(out)
    if isinstance(expr, cm.Or):
        grouped: dict[Bindings, EventInstance] = {}
        for inst in _eval(expr.left, ctx) + _eval(expr.right, ctx):
            prior = grouped.get(inst.key_binding)
            if prior is None or inst.timestamp < prior.timestamp:
                merged = inst if prior is None else EventInstance(
                    inst.key_binding, _merge(prior.attributes, inst.attributes), inst.timestamp
                )
                grouped[inst.key_binding] = merged
        return tuple(grouped[kb] for kb in sorted(grouped))
    if isinstance(expr, cm.Except):
        exceptions = _eval(expr.right, ctx)
        out = []
        for inst in _eval(expr.left, ctx):
            if any(kb_agree(inst.key_binding, e.key_binding) for e in exceptions):
                continue
            if deadline(expr.right, inst.key_binding, ctx) <= ctx.now:
                out.append(inst)
        return _dedupe(out)
    raise UnboundName(f"cannot evaluate expression node {type(expr).__name__}")


def _merge(left: Bindings, right: Bindings) -> Bindings:
    merged = dict(right)
    merged.update(dict(left))
    return tuple(sorted(merged.items()))


def _dedupe(instances) -> tuple[EventInstance, ...]:
    seen: dict[tuple, EventInstance] = {}
    for inst in instances:
        key = (inst.key_binding, inst.attributes, inst.timestamp)
        seen.setdefault(key, inst)
    return tuple(seen[k] for k in sorted(seen))


def _resolve_bound(bound: cm.TimeRef, kb: Bindings, ctx: EvaluationContext) -> int | float | None:
    """A window bound as an absolute time for one key binding, or None when an
    event-anchored bound's event has not occurred."""
    if bound.is_absolute:
        return bound.offset if bound.offset == INF else bound.offset * ctx.tick_unit
    anchors = [i for i in _eval(bound.base_event, ctx) if kb_agree(i.key_binding, kb)]
    if not anchors:
        return None
    return min(i.timestamp for i in anchors) + bound.offset * ctx.tick_unit


def deadline(expr: EventExpr, kb: Bindings, ctx: EvaluationContext) -> int | float:
    """The latest instant at which ``expr`` could still come to hold for ``kb``
    given the current model; infinite when nothing bounds it."""
    if isinstance(expr, cm.BaseEvent):
        return INF
    if isinstance(expr, cm.LifecycleEvent):
        return deadline(lifecycle_formula(expr.kind, expr.commitment), kb, ctx)
    if isinstance(expr, cm.Window):
        hi = _resolve_bound(expr.upper, kb, ctx)
        upper = INF if hi is None else hi
        return min(deadline(expr.inner, kb, ctx), upper)
    if isinstance(expr, cm.And):
        return min(deadline(expr.left, kb, ctx), deadline(expr.right, kb, ctx))
    if isinstance(expr, cm.Or):
        return max(deadline(expr.left, kb, ctx), deadline(expr.right, kb, ctx))
    if isinstance(expr, cm.Except):
        return max(deadline(expr.left, kb, ctx), deadline(expr.right, kb, ctx))
    raise UnboundName(f"cannot bound expression node {type(expr).__name__}")


def lifecycle_instances(kind: str, c: CommitmentSpec, ctx: EvaluationContext) -> tuple[EventInstance, ...]:
    """Instances of one lifecycle state of ``c`` entailed by the model."""
    return _eval(lifecycle_formula(kind, c), ctx)


def lifecycle_table(c: CommitmentSpec, ctx: EvaluationContext) -> dict[str, tuple[EventInstance, ...]]:
    return {kind: lifecycle_instances(kind, c, ctx) for kind in cm.LIFECYCLE_KINDS}


# ---------------------------------------------------------------------------
# Alignment

# Lifecycle states the creditor's model must not exceed the debtor's, and
# conversely; keyed by which side's inference implies the other's.
CREDITOR_TO_DEBTOR = ("created", "detached", "violated")
DEBTOR_TO_CREDITOR = ("discharged", "expired")


@dataclass(frozen=True)
class Misalignment:
    kind: str
    key_binding: Bindings
    missing_role: str


@dataclass(frozen=True)
class AlignmentResult:
    aligned: bool
    misalignments: tuple[Misalignment, ...] = ()


def check_alignment_models(
    debtor_model: Model,
    creditor_model: Model,
    c: CommitmentSpec,
    now: int | float,
    universe: Uod,
    tick_unit: int = 1,
) -> AlignmentResult:
    debtor_ctx = EvaluationContext(debtor_model, now, universe, tick_unit)
    creditor_ctx = EvaluationContext(creditor_model, now, universe, tick_unit)
    failures: list[Misalignment] = []
    for kind in CREDITOR_TO_DEBTOR:
        have = _kbs(lifecycle_instances(kind, c, debtor_ctx))
        for kb in _kbs(lifecycle_instances(kind, c, creditor_ctx)):
            if kb not in have:
                failures.append(Misalignment(kind, kb, c.debtor))
    for kind in DEBTOR_TO_CREDITOR:
        have = _kbs(lifecycle_instances(kind, c, creditor_ctx))
        for kb in _kbs(lifecycle_instances(kind, c, debtor_ctx)):
            if kb not in have:
                failures.append(Misalignment(kind, kb, c.creditor))
    return AlignmentResult(aligned=not failures, misalignments=tuple(failures))


def check_alignment(
    v: HistoryVector,
    c: CommitmentSpec,
    now: int | float,
    universe: Uod,
    fwd_registry: Mapping[str, ForwardingName],
    tick_unit: int = 1,
) -> AlignmentResult:
    """Decide whether a history vector is aligned with respect to ``c`` at
    ``now``: the creditor's created/detached/violated inferences must be the
    debtor's too, and the debtor's discharged/expired must be the creditor's."""
    debtor_model = project_model(v, c.debtor, fwd_registry)
    creditor_model = project_model(v, c.creditor, fwd_registry)
    return check_alignment_models(debtor_model, creditor_model, c, now, universe, tick_unit)


def _kbs(instances) -> set[Bindings]:
    return {i.key_binding for i in instances}

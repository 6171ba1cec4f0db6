"""Synthesis of alignment protocols from commitments.

Alignment means the two parties to a commitment infer compatible lifecycle
states from their own observations. A commitment decomposes into alignment
instructions ``(knower, formula, learner)``: whenever the knower can infer the
formula, the learner must be able to learn it. Instructions reduce to atomic
ones over single messages, and each atomic instruction may require forwarding
schemas: a copy of the message's parameters sent as ``in``, plus one fresh
``out`` identifier so the forward itself is a first-class message.

Two synthesis modes are provided. ``LITERAL`` emits only original-sender to
learner forwards, and only when the learner neither sends nor receives the
message. ``COMPLETE`` (the default) also emits sender-to-knower forwards, so
the knower can actually come to know the message, and knower-to-learner
relays, so knowledge acquired via a forward can be passed on.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Mapping

from . import commitments as cm
from .commitments import CommitmentSpec, EventExpr, lifecycle_formula
from .errors import InternalError, NameClash, WellFormednessError
from .protocol import IN, OUT, MessageSchema, ParameterDecl, Protocol, ProtocolReference, Uod, uod


class SynthesisMode(enum.Enum):
    LITERAL = "literal"
    COMPLETE = "complete"


@dataclass(frozen=True)
class AlignmentInstruction:
    """A requirement that ``formula`` be aligned from ``knower`` to ``learner``."""

    knower: str
    formula: EventExpr
    learner: str

    def __post_init__(self):
        if self.knower == self.learner:
            raise WellFormednessError("alignment instruction: knower equals learner")


@dataclass(frozen=True)
class ForwardingName:
    """Naming scheme for forwarding schemas, injective over its three fields."""

    forwarder: str
    recipient: str
    base_message: str

    @property
    def name(self) -> str:
        base = self.base_message[:1].upper() + self.base_message[1:]
        return f"fwd{self.forwarder}{self.recipient}{base}"

    @property
    def id_param(self) -> str:
        return self.name + "ID"


def decompose_commitment(c: CommitmentSpec) -> tuple[AlignmentInstruction, ...]:
    """The five lifecycle instructions of a commitment.

    The creditor's stronger expectations (created, detached, violated) must
    reach the debtor; the debtor's releases (discharged, expired) must reach
    the creditor.
    """
    life = lambda kind: cm.LifecycleEvent(kind, c)
    return (
        AlignmentInstruction(c.creditor, life("created"), c.debtor),
        AlignmentInstruction(c.creditor, life("detached"), c.debtor),
        AlignmentInstruction(c.creditor, life("violated"), c.debtor),
        AlignmentInstruction(c.debtor, life("discharged"), c.creditor),
        AlignmentInstruction(c.debtor, life("expired"), c.creditor),
    )


def reduce(instr: AlignmentInstruction, fuel: int = 10_000) -> tuple[AlignmentInstruction, ...]:
    """Reduce an instruction to the atomic (single-message) instructions it
    requires. Windows align the windowed event and any events its bounds are
    anchored to; conjunction and disjunction align both sides; an exception
    aligns its left side forward and its right side in the reverse direction;
    lifecycle events expand to their formulas."""
    atomic: list[AlignmentInstruction] = []
    seen: set[AlignmentInstruction] = set()
    work = [instr]
    while work:
        fuel -= 1
        if fuel < 0:
            raise InternalError("alignment reduction did not terminate")
        item = work.pop()
        if item in seen or item.knower == item.learner:
            continue
        seen.add(item)
        a, f, b = item.knower, item.formula, item.learner
        if isinstance(f, cm.BaseEvent):
            atomic.append(item)
        elif isinstance(f, cm.Window):
            work.append(AlignmentInstruction(a, f.inner, b))
            for bound in (f.lower, f.upper):
                if bound.base_event is not None:
                    work.append(AlignmentInstruction(a, bound.base_event, b))
        elif isinstance(f, (cm.And, cm.Or)):
            work.append(AlignmentInstruction(a, f.left, b))
            work.append(AlignmentInstruction(a, f.right, b))
        elif isinstance(f, cm.Except):
            work.append(AlignmentInstruction(a, f.left, b))
            work.append(AlignmentInstruction(b, f.right, a))
        elif isinstance(f, cm.LifecycleEvent):
            work.append(AlignmentInstruction(a, lifecycle_formula(f.kind, f.commitment), b))
        else:
            raise InternalError(f"non-reducible formula node {type(f).__name__}")
    unique = {(i.knower, i.formula.name, i.learner): i for i in atomic}
    return tuple(unique[k] for k in sorted(unique))


def atomic_instructions(c: CommitmentSpec) -> tuple[AlignmentInstruction, ...]:
    """All atomic instructions required to align ``c``."""
    out: dict[tuple[str, str, str], AlignmentInstruction] = {}
    for instr in decompose_commitment(c):
        for atom in reduce(instr):
            out[(atom.knower, atom.formula.name, atom.learner)] = atom
    return tuple(out[k] for k in sorted(out))


def forward_schema(base: MessageSchema, forwarder: str, recipient: str) -> MessageSchema:
    """The schema forwarding ``base`` from ``forwarder`` to ``recipient``: the
    base parameters as ``in`` (keys preserved) plus one fresh ``out`` id."""
    naming = ForwardingName(forwarder, recipient, base.name)
    params = tuple(ParameterDecl(p.name, IN, p.key) for p in base.params)
    params += (ParameterDecl(naming.id_param, OUT),)
    return MessageSchema(name=naming.name, sender=forwarder, receiver=recipient, params=params)


def forwards_for(
    instr: AlignmentInstruction, universe: Uod, mode: SynthesisMode = SynthesisMode.COMPLETE
) -> tuple[MessageSchema, ...]:
    """Forwarding schemas needed for one atomic instruction.

    With learner ``b``, knower ``a``, and the message sent by ``s`` to ``r``:
    nothing is needed for a party that already sends or receives the message;
    otherwise the sender forwards to the learner (both modes), and in COMPLETE
    mode also to the knower, with a knower-to-learner relay when the knower is
    not the sender.
    """
    if not isinstance(instr.formula, cm.BaseEvent):
        raise InternalError("forwards_for requires an atomic instruction")
    base = universe.schema(instr.formula.name)
    s, r = base.sender, base.receiver
    a, b = instr.knower, instr.learner
    out: list[MessageSchema] = []
    if b not in (s, r):
        out.append(forward_schema(base, s, b))
    if mode is SynthesisMode.COMPLETE:
        if a not in (s, r):
            out.append(forward_schema(base, s, a))
        if b not in (s, r) and a not in (s, b):
            out.append(forward_schema(base, a, b))
    return tuple(out)


def synthesize_alignment_protocol(
    c: CommitmentSpec,
    input_protocol: Protocol,
    mode: SynthesisMode = SynthesisMode.COMPLETE,
    registry: Mapping[str, Protocol] | None = None,
) -> Protocol:
    """Build the alignment protocol for ``c`` over ``input_protocol``.

    The result collects the deduplicated forwarding schemas of every atomic
    instruction. Its keys are the forwarded keys as ``in``, its other ``in``
    parameters are the forwarded payloads, and its ``out`` parameters are the
    fresh forwarding identifiers. A commitment whose instructions need no
    forwarding yields an empty protocol.
    """
    universe = uod(input_protocol, registry)
    cm.bind_commitment(c, universe)
    schemas: dict[str, MessageSchema] = {}
    for instr in atomic_instructions(c):
        for schema in forwards_for(instr, universe, mode):
            schemas.setdefault(schema.name, schema)
    ordered = [schemas[name] for name in sorted(schemas)]

    input_params = set(input_protocol.param_names) | {p.name for p in input_protocol.private_params}
    key_names: list[str] = []
    in_names: list[str] = []
    out_names: list[str] = []
    roles: list[str] = []
    for schema in ordered:
        for role in (schema.sender, schema.receiver):
            if role not in roles:
                roles.append(role)
        for p in schema.params:
            bucket = key_names if p.key else (in_names if p.adornment == IN else out_names)
            if p.name not in bucket:
                bucket.append(p.name)
            if p.adornment == OUT and p.name in input_params:
                raise NameClash(f"forwarding identifier {p.name!r} collides with an input parameter")
    params = tuple(ParameterDecl(n, IN, key=True) for n in sorted(key_names))
    params += tuple(ParameterDecl(n, IN) for n in in_names)
    params += tuple(ParameterDecl(n, OUT) for n in out_names)

    protocol = Protocol(
        name=c.name + "Al",
        roles=tuple(sorted(roles)),
        params=params,
        references=tuple(ordered),
    )
    protocol.validate()
    return protocol


def compose_operationalization(
    input_protocol: Protocol, aligners: Iterable[Protocol], name: str | None = None
) -> Protocol:
    """Compose the input protocol with alignment protocols into a single
    operationalization protocol.

    The composite keeps the input's roles and keys; its ``out`` parameters are
    the input's plus every aligner's forwarding identifiers, each declared
    once. Aligners with fewer than two roles (no forwarding needed) are
    dropped.
    """
    kept = sorted((a for a in aligners if len(a.roles) >= 2), key=lambda a: a.name)
    input_params = set(input_protocol.param_names)
    params = list(input_protocol.params)
    declared = set(input_protocol.param_names)
    references: list[ProtocolReference] = [
        ProtocolReference(input_protocol.name, input_protocol.roles, input_protocol.params)
    ]
    for aligner in kept:
        for p in aligner.params:
            if p.adornment == OUT:
                if p.name in input_params:
                    raise NameClash(
                        f"aligner {aligner.name!r} output {p.name!r} collides with an input parameter"
                    )
                if p.name not in declared:
                    params.append(ParameterDecl(p.name, OUT))
                    declared.add(p.name)
            elif p.name not in input_params:
                raise WellFormednessError(
                    f"aligner {aligner.name!r} consumes {p.name!r}, which the input does not provide"
                )
        references.append(ProtocolReference(aligner.name, aligner.roles, aligner.params))

    protocol = Protocol(
        name=name or input_protocol.name + "Op",
        roles=input_protocol.roles,
        params=tuple(params),
        references=tuple(references),
    )
    protocol.validate()
    return protocol


def forwarding_registry(universe: Uod) -> dict[str, ForwardingName]:
    """Recover the forwarding registry of a universe from schema shapes.

    A schema counts as a forward when its name matches the naming scheme for
    its own sender and receiver and some base schema, and it carries the base
    parameters as ``in`` plus exactly the expected ``out`` identifier.
    """
    registry: dict[str, ForwardingName] = {}
    for schema in universe.schemas:
        prefix = f"fwd{schema.sender}{schema.receiver}"
        if not schema.name.startswith(prefix):
            continue
        suffix = schema.name[len(prefix):]
        base_name = suffix[:1].lower() + suffix[1:]
        base = universe.by_name.get(base_name)
        if base is None:
            continue
        naming = ForwardingName(schema.sender, schema.receiver, base.name)
        expected = forward_schema(base, schema.sender, schema.receiver)
        if set(schema.ins) == set(expected.ins) and schema.outs == (naming.id_param,):
            registry[schema.name] = naming
    return registry

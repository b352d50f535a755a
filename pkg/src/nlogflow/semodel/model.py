"""Extended OWL-S style service annotations.

A :class:`ServiceAnnotation` bundles the profile, the process-level
parameters and the grounding of one wrapped service.  Composite outputs are
decomposed through :class:`NlogParameter` expansions, each of which names the
markup (``has_id``) under which its value appears in the result envelope.
"""

from __future__ import annotations

import enum
from collections import Counter
from collections.abc import Iterator, Mapping
from dataclasses import dataclass, field, replace

from nlogflow._syntax import Prefixes, is_builtin
from nlogflow.diagnostics import INFO, Diagnostic
from nlogflow.errors import ParseError, UnknownParameter

WF = "WF"


@dataclass(frozen=True, order=True)
class ParamRef:
    service: str
    param: str

    @classmethod
    def parse(cls, text: str) -> ParamRef:
        service, dot, param = text.strip().partition(".")
        if not dot or not service or not param or " " in text.strip():
            raise ParseError(f"parameter reference must look like 'service.param', got {text!r}")
        return cls(service, param)

    @property
    def node(self) -> str:
        """Name of the parameter's node in the triple store (``ex001_output1``)."""
        return f"{self.service}_{self.param}"

    @property
    def is_workflow(self) -> bool:
        return self.service == WF

    def __str__(self) -> str:
        return f"{self.service}.{self.param}"


class Direction(str, enum.Enum):
    INPUT = "Input"
    OUTPUT = "Output"


@dataclass(frozen=True)
class Parameter:
    id: ParamRef
    direction: Direction
    parameter_type: str
    links: tuple[ParamRef, ...] = ()


@dataclass(frozen=True)
class NlogParameter:
    """One element embedded in a composite output."""

    id: ParamRef
    has_id: str
    has_label: str = ""
    parameter_type: str = ""
    links: tuple[ParamRef, ...] = ()


@dataclass(frozen=True)
class OutputDecl:
    base: Parameter
    expands_to: tuple[NlogParameter, ...] = ()

    @property
    def id(self) -> ParamRef:
        return self.base.id


@dataclass(frozen=True)
class Profile:
    name: str
    refers_to: str | None = None
    has_input: tuple[ParamRef, ...] = ()
    has_output: tuple[ParamRef, ...] = ()


@dataclass(frozen=True)
class Grounding:
    wsdl_uri: str
    operation: str
    port_type: str = ""
    namespace: str = ""
    input_parts: Mapping[str, str] = field(default_factory=dict)
    output_message_part: str = ""

    @property
    def result_element(self) -> str:
        return self.output_message_part or self.operation + "Result"


@dataclass(frozen=True)
class ServiceAnnotation:
    name: str
    profile: Profile
    inputs: tuple[Parameter, ...] = ()
    outputs: tuple[OutputDecl, ...] = ()
    grounding: Grounding | None = None
    prefixes: Prefixes = field(default_factory=Prefixes, compare=False, repr=False)

    def nlog_parameters(self) -> Iterator[NlogParameter]:
        for out in self.outputs:
            yield from out.expands_to

    def parameters(self) -> Iterator[Parameter | NlogParameter]:
        yield from self.inputs
        for out in self.outputs:
            yield out.base
            yield from out.expands_to

    def find(self, param: str) -> Parameter | NlogParameter:
        for p in self.parameters():
            if p.id.param == param:
                return p
        raise UnknownParameter(f"{self.name}.{param}")

    def renamed(self, name: str) -> ServiceAnnotation:
        """Copy with every parameter reference owned by this service moved
        under ``name``."""
        old = self.name

        def ref(r: ParamRef) -> ParamRef:
            return ParamRef(name, r.param) if r.service == old else r

        def links(ls):
            return tuple(ref(t) for t in ls)

        inputs = tuple(replace(p, id=ref(p.id), links=links(p.links)) for p in self.inputs)
        outputs = tuple(
            OutputDecl(
                replace(o.base, id=ref(o.base.id), links=links(o.base.links)),
                tuple(replace(n, id=ref(n.id), links=links(n.links)) for n in o.expands_to),
            )
            for o in self.outputs
        )
        profile = replace(
            self.profile,
            has_input=tuple(ref(r) for r in self.profile.has_input),
            has_output=tuple(ref(r) for r in self.profile.has_output),
        )
        return replace(self, name=name, profile=profile, inputs=inputs, outputs=outputs)

    def with_links(self, links: Mapping[ParamRef, tuple[ParamRef, ...]]) -> ServiceAnnotation:
        """Copy whose parameters carry exactly the given outgoing links."""

        def upd(p):
            return replace(p, links=tuple(links.get(p.id, ())))

        return replace(
            self,
            inputs=tuple(upd(p) for p in self.inputs),
            outputs=tuple(OutputDecl(upd(o.base), tuple(upd(n) for n in o.expands_to)) for o in self.outputs),
        )


def validate_annotation(s: ServiceAnnotation, ontology) -> list[Diagnostic]:
    """Check the structural invariants of one annotation and resolve its types."""
    diags: list[Diagnostic] = []

    def err(code, msg, subject=""):
        diags.append(Diagnostic(code, msg, subject))

    refers = s.profile.refers_to
    if refers is None:
        diags.append(Diagnostic("MissingRefersTo", "profile has no refers-to class", s.name, INFO))
    elif refers not in ontology:
        err("UnknownClass", f"refers-to class {refers!r} is not declared", s.name)
    elif not ontology.in_data_processing_tree(refers):
        err("NotDataProcessing", f"refers-to class {refers!r} is outside the data-processing taxonomy", s.name)

    if tuple(s.profile.has_input) != tuple(p.id for p in s.inputs):
        err("ProfileMismatch", "profile inputs differ from process inputs", s.name)
    if tuple(s.profile.has_output) != tuple(o.id for o in s.outputs):
        err("ProfileMismatch", "profile outputs differ from process outputs", s.name)

    seen = Counter(p.id for p in s.parameters())
    for pid, n in sorted(seen.items()):
        if n > 1:
            err("DuplicateParameter", f"parameter declared {n} times", str(pid))

    for p in s.parameters():
        if p.id.service != s.name:
            err("ForeignParameter", f"parameter belongs to {p.id.service!r}, not {s.name!r}", str(p.id))
        t = p.parameter_type
        if not t:
            err("UnknownType", "parameter has no type", str(p.id))
        elif not is_builtin(t) and t not in ontology:
            err("UnknownType", f"type {t!r} is neither a builtin nor an ontology class", str(p.id))
    for p in s.inputs:
        if p.direction is not Direction.INPUT:
            err("DirectionMismatch", "declared among inputs but not an Input", str(p.id))
    for o in s.outputs:
        if o.base.direction is not Direction.OUTPUT:
            err("DirectionMismatch", "declared among outputs but not an Output", str(o.id))
        if o.expands_to and o.base.links:
            err("LinkedComposite", "an expanded output routes only through its expansions", str(o.id))

    markups = Counter(n.has_id for n in s.nlog_parameters())
    for n in s.nlog_parameters():
        if not n.has_id:
            err("EmptyMarkup", "expansion has an empty hasID", str(n.id))
    for m, k in sorted(markups.items()):
        if m and k > 1:
            err("DuplicateMarkup", f"markup {m!r} used by {k} expansions", s.name)

    g = s.grounding
    if g is None:
        err("MissingGrounding", "service has no grounding", s.name)
    else:
        input_ids = [p.id.param for p in s.inputs]
        for pid in input_ids:
            if pid not in g.input_parts:
                err("MissingPart", "input has no grounding message part", f"{s.name}.{pid}")
        for pid in g.input_parts:
            if pid not in input_ids:
                err("UnknownPart", "grounding part maps no declared input", f"{s.name}.{pid}")
        parts = Counter(g.input_parts.values())
        for el, k in sorted(parts.items()):
            if k > 1:
                err("DuplicatePart", f"element {el!r} grounds {k} inputs", s.name)
        if not g.operation:
            err("MissingOperation", "grounding names no operation", s.name)
        if len(s.outputs) != 1:
            err("OutputCount", f"grounding has a single output part but {len(s.outputs)} outputs are declared",
                s.name)
    return diags

"""Workflow assembly, link type compatibility and structural validation.

Workflow file format (``.wf``)::

    workflow pipeline
    @prefix ds: <http://localhost/dataset-owl-lite.owl#>
    service ex001 = test1.svc
    service ex002 = test2.svc
    input input1 ds:Mr-dataset
    output stdout xsd:string
    link WF.input1 -> ex001.input1
    link ex001.simpleoutput -> ex002.input2

Annotation paths are relative to the workflow file.  Links written inside
annotation files are merged with ``link`` statements.
"""

from __future__ import annotations

import enum
import heapq
from collections import Counter, defaultdict
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType

from nlogflow._syntax import Prefixes, is_builtin, iter_lines, parse_prefix, split_keyword
from nlogflow.diagnostics import INFO, Diagnostic, has_errors
from nlogflow.errors import CycleError, NlogflowError, ParseError, UnknownParameter, UnknownType
from nlogflow.semodel.model import (
    WF,
    Direction,
    NlogParameter,
    Parameter,
    ParamRef,
    Profile,
    ServiceAnnotation,
    validate_annotation,
)
from nlogflow.semodel.textformat import parse_annotation


class LinkKind(str, enum.Enum):
    IDENTICAL = "Identical"
    SOURCE_NARROWER = "SourceNarrower"
    SOURCE_BROADER = "SourceBroader"
    INCOMPARABLE = "Incomparable"


@dataclass(frozen=True)
class LinkVerdict:
    kind: LinkKind

    @property
    def accepted(self) -> bool:
        return self.kind in (LinkKind.IDENTICAL, LinkKind.SOURCE_NARROWER)


def _resolve_type(ontology, t: str) -> str:
    if is_builtin(t):
        return t
    if t in ontology:
        return ontology.class_id(t)
    raise UnknownType(t)


def check_link(ontology, source_type: str, target_type: str) -> LinkVerdict:
    """Compare the type produced on a link's source with the type its target
    expects.  Builtin XSD types only match themselves."""
    s = _resolve_type(ontology, source_type)
    t = _resolve_type(ontology, target_type)
    if s == t:
        return LinkVerdict(LinkKind.IDENTICAL)
    if is_builtin(s) or is_builtin(t):
        return LinkVerdict(LinkKind.INCOMPARABLE)
    if ontology.is_subclass_of(s, t):
        return LinkVerdict(LinkKind.SOURCE_NARROWER)
    if ontology.is_subclass_of(t, s):
        return LinkVerdict(LinkKind.SOURCE_BROADER)
    return LinkVerdict(LinkKind.INCOMPARABLE)


@dataclass(frozen=True)
class Workflow:
    name: str
    services: Mapping[str, ServiceAnnotation]
    wf_inputs: tuple[Parameter, ...] = ()
    wf_outputs: tuple[Parameter, ...] = ()
    links: tuple[tuple[ParamRef, ParamRef], ...] = ()
    prefixes: Prefixes = field(default_factory=Prefixes, compare=False, repr=False)
    sources: Mapping[str, str] = field(default_factory=dict, compare=False, repr=False)

    @classmethod
    def build(
        cls,
        name: str,
        services: Mapping[str, ServiceAnnotation],
        wf_inputs: Iterable[Parameter] = (),
        wf_outputs: Iterable[Parameter] = (),
        links: Iterable[tuple[ParamRef, ParamRef]] = (),
        prefixes: Prefixes | None = None,
        sources: Mapping[str, str] | None = None,
    ) -> Workflow:
        """Normalise: services are renamed to their local names and every
        parameter carries exactly the links of the merged link set."""
        renamed = {local: ann.renamed(local) for local, ann in services.items()}
        merged: list[tuple[ParamRef, ParamRef]] = []
        for ann in renamed.values():
            for p in ann.parameters():
                merged.extend((p.id, t) for t in p.links)
        wf_in = tuple(wf_inputs)
        wf_out = tuple(wf_outputs)
        for p in wf_in + wf_out:
            merged.extend((p.id, t) for t in p.links)
        merged.extend(links)
        unique = list(dict.fromkeys(merged))
        by_source: dict[ParamRef, list[ParamRef]] = defaultdict(list)
        for s, t in unique:
            by_source[s].append(t)
        frozen = {k: tuple(v) for k, v in by_source.items()}
        svcs = MappingProxyType({k: a.with_links(frozen) for k, a in renamed.items()})
        wf_in = tuple(Parameter(p.id, p.direction, p.parameter_type, frozen.get(p.id, ())) for p in wf_in)
        wf_out = tuple(Parameter(p.id, p.direction, p.parameter_type, frozen.get(p.id, ())) for p in wf_out)
        return cls(name, svcs, wf_in, wf_out, tuple(unique), prefixes or Prefixes(), dict(sources or {}))

    def parameter(self, ref: ParamRef) -> Parameter | NlogParameter:
        if ref.service == WF:
            for p in self.wf_inputs + self.wf_outputs:
                if p.id == ref:
                    return p
            raise UnknownParameter(str(ref))
        if ref.service not in self.services:
            raise UnknownParameter(str(ref))
        return self.services[ref.service].find(ref.param)

    def incoming(self) -> dict[ParamRef, list[ParamRef]]:
        out: dict[ParamRef, list[ParamRef]] = defaultdict(list)
        for s, t in self.links:
            out[t].append(s)
        return out

    def service_edges(self) -> set[tuple[str, str]]:
        return {(s.service, t.service) for s, t in self.links if WF not in (s.service, t.service)}


def _role(w: Workflow, ref: ParamRef) -> str:
    """Classify a parameter reference: wf-input, wf-output, input, output,
    composite (expanded output), nlog, or unknown."""
    if ref.service == WF:
        if any(p.id == ref for p in w.wf_inputs):
            return "wf-input"
        if any(p.id == ref for p in w.wf_outputs):
            return "wf-output"
        return "unknown"
    ann = w.services.get(ref.service)
    if ann is None:
        return "unknown"
    for p in ann.inputs:
        if p.id == ref:
            return "input"
    for o in ann.outputs:
        if o.id == ref:
            return "composite" if o.expands_to else "output"
        for n in o.expands_to:
            if n.id == ref:
                return "nlog"
    return "unknown"


@dataclass
class ValidationReport:
    diagnostics: list[Diagnostic]
    link_verdicts: list[tuple[ParamRef, ParamRef, LinkVerdict]] = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return not has_errors(self.diagnostics)


def validate_workflow(w: Workflow, ontology) -> ValidationReport:
    diags: list[Diagnostic] = []
    verdicts = []

    def err(code, msg, subject="", severity="error"):
        diags.append(Diagnostic(code, msg, subject, severity))

    for local, ann in w.services.items():
        for d in validate_annotation(ann, ontology):
            diags.append(Diagnostic(d.code, d.message, d.subject or local, d.severity))

    seen = Counter(p.id for p in w.wf_inputs + w.wf_outputs)
    for pid, n in sorted(seen.items()):
        if n > 1:
            err("DuplicateParameter", f"workflow parameter declared {n} times", str(pid))
    for p in w.wf_inputs + w.wf_outputs:
        if p.id.service != WF:
            err("ForeignParameter", "workflow parameters must live under 'WF'", str(p.id))
        if not is_builtin(p.parameter_type) and p.parameter_type not in ontology:
            err("UnknownType", f"type {p.parameter_type!r} is neither a builtin nor an ontology class", str(p.id))

    for s, t in w.links:
        subject = f"{s} -> {t}"
        rs, rt = _role(w, s), _role(w, t)
        if rs == "unknown":
            err("UnknownParameter", f"link source {s} does not exist", subject)
        if rt == "unknown":
            err("UnknownParameter", f"link target {t} does not exist", subject)
        if rs == "unknown" or rt == "unknown":
            continue
        if rs == "composite":
            err("LinkedComposite", "an expanded output cannot be linked directly; link its expansions", subject)
            continue
        if rs not in ("nlog", "output", "wf-input"):
            err("BadLinkSource", f"a {rs} cannot be a link source", subject)
            continue
        if rt not in ("input", "wf-output"):
            err("BadLinkTarget", f"a {rt} cannot be a link target", subject)
            continue
        try:
            verdict = check_link(ontology, w.parameter(s).parameter_type, w.parameter(t).parameter_type)
        except NlogflowError as exc:
            err("UnknownType", str(exc), subject)
            continue
        verdicts.append((s, t, verdict))
        if not verdict.accepted:
            err(verdict.kind.value, f"{verdict.kind.value} link is not type compatible", subject)

    incoming = w.incoming()
    for ann in w.services.values():
        for p in ann.inputs:
            n = len(incoming.get(p.id, ()))
            if n == 0:
                err("UnboundInput", "service input is not the target of any link", str(p.id))
            elif n > 1:
                err("MultiplyBoundInput", f"service input is bound by {n} links", str(p.id))
    for p in w.wf_outputs:
        n = len(incoming.get(p.id, ()))
        if n == 0:
            err("UnboundOutput", "workflow output is not the target of any link", str(p.id))
        elif n > 1:
            err("MultiplyBoundOutput", f"workflow output is bound by {n} links", str(p.id))

    for ann in w.services.values():
        for nlog in ann.nlog_parameters():
            kinds = {_role(w, t) for t in nlog.links}
            if not nlog.links:
                err("UnlinkedParameter", "expansion is not routed anywhere", str(nlog.id), INFO)
            elif {"input", "wf-output"} <= kinds:
                err("MixedFanOut", "expansion feeds both a workflow output and a service input", str(nlog.id), INFO)
    for p in w.wf_inputs:
        if not p.links:
            err("UnusedInput", "workflow input is not routed anywhere", str(p.id), INFO)

    try:
        topo_order(w)
    except CycleError as exc:
        err("Cycle", str(exc), w.name)
    return ValidationReport(diags, verdicts)


def topo_order(w: Workflow) -> list[str]:
    """Service local names, producers before consumers, ties by name."""
    edges = w.service_edges()
    for a, b in edges:
        if a == b:
            raise CycleError([a, a], "dataflow")
    indeg = {s: 0 for s in w.services}
    succ: dict[str, set[str]] = defaultdict(set)
    for a, b in edges:
        if a in indeg and b in indeg and b not in succ[a]:
            succ[a].add(b)
            indeg[b] += 1
    heap = [s for s, d in indeg.items() if d == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        s = heapq.heappop(heap)
        order.append(s)
        for t in sorted(succ[s]):
            indeg[t] -= 1
            if indeg[t] == 0:
                heapq.heappush(heap, t)
    if len(order) != len(indeg):
        rest = sorted(s for s in indeg if s not in order)
        raise CycleError(_find_cycle(rest, succ), "dataflow")
    return order


def _find_cycle(nodes: list[str], succ) -> list[str]:
    remaining = set(nodes)
    start = nodes[0]
    path = [start]
    seen = {start: 0}
    cur = start
    while True:
        nxt = sorted(t for t in succ[cur] if t in remaining)[0]
        if nxt in seen:
            return path[seen[nxt]:] + [nxt]
        seen[nxt] = len(path)
        path.append(nxt)
        cur = nxt


def derive_workflow_signature(w: Workflow) -> Profile:
    """The profile of a composite service embedding the whole workflow."""
    return Profile(
        name=w.name,
        refers_to=None,
        has_input=tuple(p.id for p in w.wf_inputs),
        has_output=tuple(p.id for p in w.wf_outputs),
    )


# -- file format -----------------------------------------------------------------

def parse_workflow(text: str, base_dir: str | Path = ".", source: str | None = None,
                   loader=None) -> Workflow:
    """Parse a workflow file; ``loader(path) -> ServiceAnnotation`` reads the
    imported annotation files (defaults to reading from disk)."""
    base = Path(base_dir)
    prefixes = Prefixes()
    name = ""
    services: dict[str, ServiceAnnotation] = {}
    sources: dict[str, str] = {}
    wf_inputs: list[Parameter] = []
    wf_outputs: list[Parameter] = []
    links: list[tuple[ParamRef, ParamRef]] = []

    def load(path: Path) -> ServiceAnnotation:
        if loader is not None:
            return loader(path)
        try:
            return parse_annotation(path.read_text(encoding="utf-8"), str(path))
        except OSError as exc:
            raise ParseError(f"cannot read annotation {path}: {exc.strerror}") from None

    def ref(tok: str, n: int) -> ParamRef:
        try:
            return ParamRef.parse(tok)
        except ParseError as exc:
            raise ParseError(str(exc), n, source) from None

    for line in iter_lines(text):
        n = line.number
        if line.text.startswith("@prefix"):
            prefixes.declare(*parse_prefix(line.text, n, source))
            continue
        kw, rest = split_keyword(line.text)
        if kw == "workflow":
            if name or not rest:
                raise ParseError("exactly one 'workflow <name>' line expected", n, source)
            name = rest
        elif kw == "service":
            local, eq, path = (x.strip() for x in rest.partition("="))
            if not eq or not local or not path or " " in local or local == WF:
                raise ParseError("expected 'service <local-name> = <annotation-file>'", n, source)
            if local in services:
                raise ParseError(f"service {local!r} imported twice", n, source)
            p = Path(path) if Path(path).is_absolute() else base / path
            services[local] = load(p)
            sources[local] = path
        elif kw in ("input", "output"):
            bits = rest.split()
            if len(bits) != 2:
                raise ParseError(f"expected '{kw} <name> <type>'", n, source)
            pname = bits[0][3:] if bits[0].startswith("WF.") else bits[0]
            try:
                ptype = prefixes.expand(bits[1])
            except KeyError as exc:
                raise ParseError(f"unknown prefix {exc.args[0]!r}", n, source) from None
            direction = Direction.INPUT if kw == "input" else Direction.OUTPUT
            (wf_inputs if kw == "input" else wf_outputs).append(Parameter(ParamRef(WF, pname), direction, ptype))
        elif kw == "link":
            src, arrow, tgt = rest.partition("->")
            if not arrow:
                raise ParseError("expected 'link <source> -> <target>'", n, source)
            links.append((ref(src, n), ref(tgt, n)))
        else:
            raise ParseError(f"unknown statement {kw!r}", n, source)
    if not name:
        raise ParseError("missing 'workflow <name>' line", None, source)
    return Workflow.build(name, services, wf_inputs, wf_outputs, links, prefixes, sources)


def load_workflow(path: str | Path) -> Workflow:
    path = Path(path)
    return parse_workflow(path.read_text(encoding="utf-8"), path.parent, str(path))


def serialize_workflow(w: Workflow) -> str:
    """Deterministic text; annotation paths come from where they were loaded
    (or ``<local>.svc``)."""
    c = w.prefixes.compact
    out = [f"workflow {w.name}"]
    out += w.prefixes.header_lines()
    for local in w.services:
        out.append(f"service {local} = {w.sources.get(local, local + '.svc')}")
    for p in w.wf_inputs:
        out.append(f"input {p.id.param} {c(p.parameter_type)}")
    for p in w.wf_outputs:
        out.append(f"output {p.id.param} {c(p.parameter_type)}")
    for s, t in w.links:
        out.append(f"link {s} -> {t}")
    return "\n".join(out) + "\n"

"""Run a validated workflow against live (or in-process) service endpoints.

For every service, in dependency order: gather its input values, check each
value's instance class against the declared input type, post the request
envelope, pick the expansion values out of the composite result by markup
id and route them along the links.
"""

from __future__ import annotations

import enum
import logging
import os
import time
import urllib.error
import urllib.request
from collections.abc import Callable, Mapping
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from nlogflow._syntax import Prefixes, is_builtin, iter_lines, parse_prefix, split_keyword
from nlogflow.composer import Workflow, topo_order
from nlogflow.envelope import RequestEnvelope, find_result, parse_xml, raise_for_fault
from nlogflow.errors import (
    CheckFailed,
    ExecutionError,
    MissingMarkup,
    MissingValue,
    NlogflowError,
    ParseError,
    TransportError,
    UnknownClass,
    UnknownParameter,
)
from nlogflow.semodel.model import WF, ParamRef, ServiceAnnotation

log = logging.getLogger(__name__)

DEFAULT_TIMEOUT_MS = 30_000
TIMEOUT_ENV = "NLOGFLOW_TIMEOUT_MS"

Transport = Callable[[str, str], str]


@dataclass(frozen=True)
class ValueBinding:
    target: ParamRef
    value: str
    instance_class: str | None = None


@dataclass(frozen=True)
class RuntimeVerdict:
    accepted: bool
    reason: str = ""


def runtime_check(b: ValueBinding, declared: str, ontology) -> RuntimeVerdict:
    """Does the bound instance fit the declared input type?"""
    if not b.value:
        return RuntimeVerdict(False, "empty value")
    if is_builtin(declared):
        return RuntimeVerdict(True)
    declared_id = ontology.class_id(declared)
    if not b.instance_class:
        return RuntimeVerdict(False, f"no instance class given for a {declared} input")
    if is_builtin(b.instance_class):
        return RuntimeVerdict(False, f"{b.instance_class} value cannot fill a {declared} input")
    if ontology.is_subclass_of(b.instance_class, declared_id):
        return RuntimeVerdict(True)
    return RuntimeVerdict(False, f"{b.instance_class} is not subsumed by {declared}")


def build_request(s: ServiceAnnotation, values: Mapping[str, str]) -> str:
    """Request envelope text; children follow the grounding's part order."""
    g = s.grounding
    entries = []
    for pid, element in g.input_parts.items():
        if pid not in values:
            raise MissingValue(f"no value for input {s.name}.{pid}")
        entries.append((element, values[pid]))
    for p in s.inputs:
        if p.id.param not in g.input_parts:
            raise MissingValue(f"input {p.id} has no grounding part")
    return RequestEnvelope(g.operation, g.namespace, tuple(entries)).render()


def parse_result(s: ServiceAnnotation, text: str, required: set[str] | None = None) -> dict[str, str]:
    """Markup id -> value for every expansion present in the result.

    ``required`` defaults to the markups of linked expansions.  An output
    without expansions is reported under its parameter id with the whole
    result element's text.
    """
    root = parse_xml(text)
    raise_for_fault(root)
    result = find_result(root, s.grounding.result_element)
    found: dict[str, str] = {}
    for el in result.iter():
        name = el.tag.rsplit("}", 1)[-1]
        if el is not result and name not in found and len(el) == 0:
            found[name] = (el.text or "").strip()
    out: dict[str, str] = {}
    for o in s.outputs:
        if not o.expands_to:
            out[o.id.param] = "".join(result.itertext()).strip()
        for n in o.expands_to:
            if n.has_id in found:
                out[n.has_id] = found[n.has_id]
    if required is None:
        required = {n.has_id for n in s.nlog_parameters() if n.links}
    missing = sorted(m for m in required if m not in out)
    if missing:
        raise MissingMarkup(missing)
    return out


# -- transport -------------------------------------------------------------------

def timeout_from_env() -> float:
    raw = os.environ.get(TIMEOUT_ENV, "")
    try:
        ms = int(raw) if raw else DEFAULT_TIMEOUT_MS
    except ValueError:
        ms = DEFAULT_TIMEOUT_MS
    return max(ms, 1) / 1000.0


class HttpTransport:
    """POST the envelope; a fault body on an HTTP error status is returned."""

    def __init__(self, timeout: float | None = None):
        self.timeout = timeout if timeout is not None else timeout_from_env()

    def __call__(self, url: str, body: str) -> str:
        req = urllib.request.Request(
            url,
            data=body.encode("utf-8"),
            method="POST",
            headers={"Content-Type": "text/xml; charset=utf-8", "SOAPAction": '""'},
        )
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                return resp.read().decode("utf-8")
        except urllib.error.HTTPError as exc:
            payload = exc.read().decode("utf-8", "replace")
            if payload.strip():
                return payload
            raise TransportError(f"{url}: HTTP {exc.code}") from None
        except (urllib.error.URLError, OSError) as exc:
            reason = getattr(exc, "reason", exc)
            raise TransportError(f"{url}: {reason}") from None


# -- run report ------------------------------------------------------------------

class Status(str, enum.Enum):
    SUCCEEDED = "Succeeded"
    FAILED = "Failed"
    NOT_RUN = "NotRun"


@dataclass
class CheckRecord:
    param: str
    declared: str
    instance_class: str | None
    origin: str
    accepted: bool
    reason: str = ""


@dataclass
class ServiceRun:
    name: str
    status: Status = Status.NOT_RUN
    endpoint: str = ""
    inputs: dict[str, str] = field(default_factory=dict)
    checks: list[CheckRecord] = field(default_factory=list)
    request: str = ""
    response: str = ""
    extracted: dict[str, str] = field(default_factory=dict)
    error: str = ""
    error_kind: str = ""
    elapsed: float = 0.0
    invoked: bool = False

    def events(self) -> list[str]:
        ev = []
        if self.checks:
            ev.append(f"check {self.name}")
        if self.invoked:
            ev.append(f"invoke {self.name}")
        if self.status is Status.SUCCEEDED:
            ev.append(f"result {self.name}")
        elif self.status is Status.FAILED:
            ev.append(f"fail {self.name} {self.error_kind}")
        return ev


@dataclass
class RunReport:
    workflow: str
    services: list[ServiceRun]
    wf_outputs: dict[str, str] = field(default_factory=dict)
    status: Status = Status.SUCCEEDED
    failed_step: str = ""
    cause: str = ""
    cause_kind: str = ""
    elapsed: float = 0.0

    @property
    def succeeded(self) -> bool:
        return self.status is Status.SUCCEEDED

    def service(self, name: str) -> ServiceRun:
        for r in self.services:
            if r.name == name:
                return r
        raise KeyError(name)

    @property
    def events(self) -> list[str]:
        return [e for r in self.services for e in r.events()]

    def as_dict(self, timing: bool = True) -> dict:
        out = {
            "workflow": self.workflow,
            "status": self.status.value,
            "failure": {"step": self.failed_step, "kind": self.cause_kind, "cause": self.cause}
            if self.status is Status.FAILED else None,
            "services": [],
            "wf_outputs": dict(self.wf_outputs),
            "events": self.events,
        }
        for r in self.services:
            entry = {
                "name": r.name,
                "status": r.status.value,
                "endpoint": r.endpoint,
                "inputs": dict(r.inputs),
                "checks": [vars(c).copy() for c in r.checks],
                "extracted": dict(r.extracted),
                "request": r.request,
                "response": r.response,
                "error": r.error,
            }
            if timing:
                entry["elapsed_s"] = round(r.elapsed, 6)
            out["services"].append(entry)
        if timing:
            out["elapsed_s"] = round(self.elapsed, 6)
        return out


# -- execution -------------------------------------------------------------------

def _run_service(
    ann: ServiceAnnotation,
    values: Mapping[ParamRef, tuple[str, str | None, str]],
    ontology,
    endpoint: str | None,
    transport: Transport,
) -> tuple[ServiceRun, dict[ParamRef, tuple[str, str | None, str]]]:
    run = ServiceRun(ann.name, endpoint=endpoint or "")
    start = time.perf_counter()
    routed: dict[ParamRef, tuple[str, str | None, str]] = {}
    try:
        for p in ann.inputs:
            if p.id not in values:
                raise MissingValue(f"input {p.id} received no value")
            value, klass, origin = values[p.id]
            run.inputs[p.id.param] = value
            if is_builtin(p.parameter_type):
                continue
            try:
                v = runtime_check(ValueBinding(p.id, value, klass), p.parameter_type, ontology)
            except UnknownClass as exc:
                v = RuntimeVerdict(False, str(exc))
            run.checks.append(CheckRecord(p.id.param, p.parameter_type, klass, origin, v.accepted, v.reason))
            if not v.accepted:
                raise CheckFailed(f"{p.id}: {v.reason}")
        run.request = build_request(ann, run.inputs)
        if not endpoint:
            raise TransportError(f"no endpoint configured for service {ann.name!r}")
        run.invoked = True
        log.info("invoking %s at %s", ann.name, endpoint)
        run.response = transport(endpoint, run.request)
        run.extracted = parse_result(ann, run.response)
        for o in ann.outputs:
            if not o.expands_to and o.base.links and o.id.param in run.extracted:
                for t in o.base.links:
                    routed[t] = (run.extracted[o.id.param], o.base.parameter_type, str(o.id))
            for n in o.expands_to:
                if n.has_id in run.extracted:
                    for t in n.links:
                        routed[t] = (run.extracted[n.has_id], n.parameter_type, str(n.id))
        run.status = Status.SUCCEEDED
    except NlogflowError as exc:
        run.status = Status.FAILED
        run.error = str(exc)
        run.error_kind = type(exc).__name__
    finally:
        run.elapsed = time.perf_counter() - start
    return run, routed


def execute(
    w: Workflow,
    ontology,
    manifest: list[ValueBinding],
    resolver: Mapping[str, str] | Callable[[str], str | None],
    transport: Transport | None = None,
    concurrency: int = 1,
) -> RunReport:
    """Execute ``w``; failures are reported, not raised.

    Raises :class:`MissingValue`/:class:`UnknownParameter` only when the
    manifest itself does not fit the workflow.
    """
    transport = transport or HttpTransport()
    resolve = resolver.get if isinstance(resolver, Mapping) else resolver
    t0 = time.perf_counter()

    wf_inputs = {p.id: p for p in w.wf_inputs}
    values: dict[ParamRef, tuple[str, str | None, str]] = {}
    for b in manifest:
        if b.target not in wf_inputs:
            raise UnknownParameter(str(b.target))
        for t in wf_inputs[b.target].links:
            values[t] = (b.value, b.instance_class, f"manifest {b.target}")
    bound = {b.target for b in manifest}
    missing = sorted(str(p) for p in wf_inputs if p not in bound)
    if missing:
        raise MissingValue(f"manifest binds no value for {', '.join(missing)}")

    order = topo_order(w)
    upstream = {s: set() for s in order}
    for a, b in w.service_edges():
        upstream[b].add(a)
    runs = {s: ServiceRun(s) for s in order}
    done: set[str] = set()
    report = RunReport(w.name, [runs[s] for s in order])
    failed = False

    pool = ThreadPoolExecutor(max_workers=concurrency) if concurrency > 1 else None
    try:
        while not failed and len(done) < len(order):
            ready = [s for s in order if s not in done and upstream[s] <= done]
            if pool is None:
                ready = ready[:1]
            snapshot = dict(values)
            if pool is None:
                results = [_run_service(w.services[s], snapshot, ontology, resolve(s), transport) for s in ready]
            else:
                futures = [pool.submit(_run_service, w.services[s], snapshot, ontology, resolve(s), transport)
                           for s in ready]
                results = [f.result() for f in futures]
            for s, (run, routed) in zip(ready, results):
                runs[s] = run
                done.add(s)
                if run.status is Status.FAILED:
                    if not failed:
                        report.failed_step, report.cause, report.cause_kind = s, run.error, run.error_kind
                    failed = True
                else:
                    values.update(routed)
    finally:
        if pool is not None:
            pool.shutdown()

    report.services = [runs[s] for s in order]
    for p in w.wf_outputs:
        if p.id in values:
            report.wf_outputs[p.id.param] = values[p.id][0]
    if failed:
        report.status = Status.FAILED
    elif len(report.wf_outputs) != len(w.wf_outputs):
        report.status = Status.FAILED
        report.failed_step = w.name
        report.cause_kind = MissingValue.__name__
        unfilled = sorted(p.id.param for p in w.wf_outputs if p.id.param not in report.wf_outputs)
        report.cause = f"workflow outputs left without value: {', '.join(unfilled)}"
    report.elapsed = time.perf_counter() - t0
    return report


# -- manifest / endpoint files -----------------------------------------------------

def load_manifest(text: str, source: str | None = None) -> list[ValueBinding]:
    """``bind WF.<param> = <uri> [class <ClassId>]`` lines."""
    prefixes = Prefixes()
    out: list[ValueBinding] = []
    seen = set()
    for line in iter_lines(text):
        if line.text.startswith("@prefix"):
            prefixes.declare(*parse_prefix(line.text, line.number, source))
            continue
        kw, rest = split_keyword(line.text)
        if kw != "bind":
            raise ParseError(f"unknown statement {kw!r}", line.number, source)
        target, eq, tail = rest.partition("=")
        bits = tail.split()
        if not eq or len(bits) not in (1, 3) or (len(bits) == 3 and bits[1] != "class"):
            raise ParseError("expected 'bind WF.<param> = <uri> [class <ClassId>]'", line.number, source)
        try:
            ref = ParamRef.parse(target.strip())
        except ParseError as exc:
            raise ParseError(str(exc), line.number, source) from None
        if ref.service != WF:
            raise ParseError("only workflow inputs (WF.<param>) can be bound", line.number, source)
        if ref in seen:
            raise ParseError(f"{ref} bound twice", line.number, source)
        seen.add(ref)
        klass = prefixes.expand(bits[2], strict=False) if len(bits) == 3 else None
        out.append(ValueBinding(ref, bits[0], klass))
    return out


def serialize_manifest(bindings: list[ValueBinding]) -> str:
    lines = []
    for b in bindings:
        tail = f" class {Prefixes().compact(b.instance_class)}" if b.instance_class else ""
        lines.append(f"bind {b.target} = {b.value}{tail}")
    return "\n".join(lines) + "\n"


def load_endpoints(text: str, source: str | None = None) -> dict[str, str]:
    """``endpoint <service> = <uri>`` lines."""
    out: dict[str, str] = {}
    for line in iter_lines(text):
        kw, rest = split_keyword(line.text)
        name, eq, uri = (x.strip() for x in rest.partition("="))
        if kw != "endpoint" or not eq or not name or not uri or " " in uri:
            raise ParseError("expected 'endpoint <service> = <uri>'", line.number, source)
        out[name] = uri
    return out


__all__ = [
    "ValueBinding", "RuntimeVerdict", "runtime_check", "build_request", "parse_result", "HttpTransport",
    "Status", "ServiceRun", "RunReport", "execute", "load_manifest", "load_endpoints", "ExecutionError",
]

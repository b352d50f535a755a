"""Local stand-in for a deployed jGASW service.

A mock accepts request envelopes for one operation and answers with a
deterministic composite result: every output leaf gets the URL
``<base_url>/<service>_<run_id>/<file>``, where ``file`` is ``std.out`` /
``std.err`` for the standard streams and ``<leaf>.nii`` otherwise.

Config file format (one ``key value`` per line; ``input``/``output`` repeat)::

    service Test1
    operation local
    namespace http://i3s.cnrs.fr/jigsaw
    input simpleinput
    output stderr
    output stdout
    output simpleoutput
    base-url http://localhost:80/~bwali
    run-id 1321350928548-9787
    port 8081
"""

from __future__ import annotations

import logging
import random
import threading
import time
from dataclasses import dataclass, field, replace
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from nlogflow._syntax import iter_lines, split_keyword
from nlogflow.diagnostics import Diagnostic
from nlogflow.envelope import SOAP_ENV, ResultEnvelope, body_payload, local_name, namespace_of, parse_xml, render_fault
from nlogflow.errors import BindError, MalformedXml, ParseError
from nlogflow.semodel.model import ServiceAnnotation

log = logging.getLogger(__name__)


def random_run_id() -> str:
    return f"{int(time.time() * 1000)}-{random.randrange(10_000):04d}"


@dataclass(frozen=True)
class MockConfig:
    service: str
    operation: str
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    namespace: str = ""
    base_url: str = "http://localhost:80/~jgasw"
    run_id: str = field(default_factory=random_run_id)
    fault_mode: bool = False
    port: int = 0
    host: str = "127.0.0.1"
    result_element: str = ""
    omit: tuple[str, ...] = ()  # leaves left out of the result, to exercise missing markups

    def __post_init__(self):
        if not self.run_id:
            raise ValueError("run_id must be non-empty")
        for names, what in ((self.inputs, "input"), (self.outputs, "output")):
            if len(set(names)) != len(names):
                raise ValueError(f"duplicate {what} names in mock config")

    @property
    def result_name(self) -> str:
        return self.result_element or self.operation + "Result"

    @classmethod
    def for_annotation(cls, s: ServiceAnnotation, **kw) -> MockConfig:
        g = s.grounding
        return cls(
            service=kw.pop("service", s.profile.name),
            operation=g.operation,
            inputs=tuple(g.input_parts[p.id.param] for p in s.inputs if p.id.param in g.input_parts),
            outputs=tuple(n.has_id for n in s.nlog_parameters()),
            namespace=g.namespace,
            result_element=g.output_message_part,
            **kw,
        )


def output_value(config: MockConfig, leaf: str) -> str:
    low = leaf.lower()
    filename = {"stdout": "std.out", "stderr": "std.err"}.get(low, f"{leaf}.nii")
    return f"{config.base_url.rstrip('/')}/{config.service}_{config.run_id}/{filename}"


def validate_request(config: MockConfig, text: str) -> list[Diagnostic]:
    """Check a request's operation element, namespace and children."""
    try:
        root = parse_xml(text)
    except MalformedXml as exc:
        return [Diagnostic("MalformedXml", str(exc))]
    if local_name(root.tag) != "Envelope" or namespace_of(root.tag) != SOAP_ENV:
        return [Diagnostic("NotAnEnvelope", "document is not a SOAP 1.1 envelope")]
    try:
        op = body_payload(root)
    except MalformedXml as exc:
        return [Diagnostic("NotAnEnvelope", str(exc))]
    diags = []
    if local_name(op.tag) != config.operation:
        diags.append(Diagnostic("OperationMismatch", f"expected <{config.operation}>, got <{local_name(op.tag)}>"))
    if namespace_of(op.tag) != config.namespace:
        diags.append(Diagnostic("NamespaceMismatch",
                                f"operation namespace {namespace_of(op.tag)!r} != {config.namespace!r}"))
    names = [local_name(c.tag) for c in op]
    for c in op:
        if namespace_of(c.tag) not in (config.namespace, ""):
            diags.append(Diagnostic("NamespaceMismatch", f"child in namespace {namespace_of(c.tag)!r}",
                                    local_name(c.tag)))
    for n in names:
        if n not in config.inputs:
            diags.append(Diagnostic("UnknownChild", f"unexpected element <{n}>", n))
    for n in config.inputs:
        k = names.count(n)
        if k == 0:
            diags.append(Diagnostic("MissingChild", f"missing element <{n}>", n))
        elif k > 1:
            diags.append(Diagnostic("DuplicateChild", f"<{n}> given {k} times", n))
    known = [n for n in names if n in config.inputs]
    expected = [n for n in config.inputs if n in known]
    if len(set(known)) == len(known) and known != expected:
        diags.append(Diagnostic("OrderMismatch", f"children in order {known}, expected {expected}"))
    return diags


class MockService:
    """The transport-independent part of a mock: request text in, status and
    response text out.  Also usable directly as an in-process transport."""

    def __init__(self, config: MockConfig):
        self.config = config
        self.requests: list[str] = []
        self.faults: list[list[Diagnostic]] = []
        self._lock = threading.Lock()

    def handle(self, text: str) -> tuple[int, str]:
        cfg = self.config
        with self._lock:
            self.requests.append(text)
        if cfg.fault_mode:
            return 500, render_fault(f"{cfg.service} execution failed", cfg.namespace)
        diags = validate_request(cfg, text)
        if diags:
            with self._lock:
                self.faults.append(diags)
            log.warning("%s: rejected request: %s", cfg.service, "; ".join(map(str, diags)))
            return 500, render_fault("; ".join(f"{d.code}: {d.message}" for d in diags), cfg.namespace,
                                     "soapenv:Client")
        entries = tuple((leaf, output_value(cfg, leaf)) for leaf in cfg.outputs if leaf not in cfg.omit)
        return 200, ResultEnvelope(cfg.result_name, cfg.namespace, entries).render()

    def __call__(self, url: str, body: str) -> str:
        return self.handle(body)[1]


class _Handler(BaseHTTPRequestHandler):
    service: MockService  # set on the per-server subclass

    def do_POST(self):  # noqa: N802
        length = int(self.headers.get("Content-Length") or 0)
        body = self.rfile.read(length).decode("utf-8", "replace")
        status, payload = self.service.handle(body)
        data = payload.encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "text/xml; charset=utf-8")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, fmt, *args):
        log.debug("%s %s", self.service.config.service, fmt % args)


class _Server(ThreadingHTTPServer):
    allow_reuse_address = True
    daemon_threads = True


class MockHandle:
    """A running mock endpoint."""

    def __init__(self, service: MockService, server: _Server):
        self.service = service
        self._server = server
        self._thread = threading.Thread(target=server.serve_forever, name=f"mock-{service.config.service}",
                                        daemon=True)
        self._thread.start()

    @property
    def port(self) -> int:
        return self._server.server_address[1]

    @property
    def url(self) -> str:
        return f"http://{self.service.config.host}:{self.port}/jigsaw"

    @property
    def requests(self) -> list[str]:
        return self.service.requests

    def shutdown(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        self._thread.join(timeout=5)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.shutdown()


def serve(config: MockConfig) -> MockHandle:
    service = MockService(config)
    handler = type("Handler", (_Handler,), {"service": service})
    try:
        server = _Server((config.host, config.port), handler)
    except OSError as exc:
        raise BindError(f"cannot bind {config.host}:{config.port}: {exc.strerror or exc}") from None
    return MockHandle(service, server)


def load_mock_config(text: str, source: str | None = None, **overrides) -> MockConfig:
    values: dict = {"inputs": [], "outputs": [], "omit": []}
    keys = {"service", "operation", "namespace", "base-url", "run-id", "port", "fault", "host", "result",
            "input", "output", "omit"}
    for line in iter_lines(text):
        kw, rest = split_keyword(line.text)
        if kw not in keys or not rest:
            raise ParseError(f"bad mock config line {line.text!r}", line.number, source)
        if kw in ("input", "output", "omit"):
            values[kw + "s" if kw != "omit" else "omit"].append(rest)
        elif kw == "port":
            if not rest.isdigit():
                raise ParseError("port must be an integer", line.number, source)
            values["port"] = int(rest)
        elif kw == "fault":
            values["fault_mode"] = rest.lower() in ("true", "yes", "1", "on")
        else:
            values[{"base-url": "base_url", "run-id": "run_id", "result": "result_element"}.get(kw, kw)] = rest
    for required in ("service", "operation"):
        if required not in values:
            raise ParseError(f"mock config lacks {required!r}", None, source)
    values = {k: tuple(v) if isinstance(v, list) else v for k, v in values.items()}
    values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return MockConfig(**values)
    except ValueError as exc:
        raise ParseError(str(exc), None, source) from None


def with_overrides(config: MockConfig, **kw) -> MockConfig:
    return replace(config, **{k: v for k, v in kw.items() if v is not None})

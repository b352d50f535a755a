"""Command-line entry point.

Exit codes: 0 success / positive verdict, 1 negative verdict, 2 usage or
parse error, 3 runtime or transport failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

from nlogflow import __version__
from nlogflow._syntax import is_builtin
from nlogflow.composer import derive_workflow_signature, load_workflow, validate_workflow
from nlogflow.errors import ExecutionError, NlogflowError, ParseError, UnknownClass, UnknownParameter
from nlogflow.executor import HttpTransport, execute, load_endpoints, load_manifest
from nlogflow.ingest import generate_skeleton, parse_wsdl, parse_xsd
from nlogflow.mockserv import load_mock_config, serve
from nlogflow.ontology import load_ontology
from nlogflow.profile_validator import check_profile
from nlogflow.semodel import (
    AnnotationEditor,
    ParamRef,
    build_store,
    parse_annotation,
    parse_query,
    query,
    serialize_annotation,
    validate_annotation,
)

EXIT_OK, EXIT_INVALID, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2, 3

log = logging.getLogger("nlogflow")


@dataclass
class Report:
    verb: str
    inputs: list[str] = field(default_factory=list)
    diagnostics: list[dict] = field(default_factory=list)
    verdicts: dict = field(default_factory=dict)
    artifacts: list[str] = field(default_factory=list)
    tool: str = "nlogflow"
    version: str = __version__

    def as_dict(self) -> dict:
        return {
            "tool": self.tool,
            "version": self.version,
            "verb": self.verb,
            "inputs": self.inputs,
            "diagnostics": self.diagnostics,
            "verdicts": self.verdicts,
            "artifacts": self.artifacts,
        }

    def to_text(self) -> str:
        lines = [f"{self.tool} {self.version} {self.verb}"]
        lines += [f"input: {p}" for p in self.inputs]
        for key, value in self.verdicts.items():
            lines += _text_lines(key, value)
        for d in self.diagnostics:
            subject = f" [{d['subject']}]" if d.get("subject") else ""
            lines.append(f"{d['severity']}: {d['code']}{subject}: {d['message']}")
        lines += [f"wrote: {a}" for a in self.artifacts]
        return "\n".join(lines) + "\n"


def _text_lines(key: str, value, indent: str = "") -> list[str]:
    if isinstance(value, dict):
        out = [f"{indent}{key}:"]
        for k, v in value.items():
            out += _text_lines(str(k), v, indent + "  ")
        return out
    if isinstance(value, list):
        out = [f"{indent}{key}:"]
        for i, v in enumerate(value):
            if isinstance(v, (dict, list)):
                out += _text_lines(f"- {i}", v, indent + "  ")
            else:
                out.append(f"{indent}  - {v}")
        return out
    if isinstance(value, str) and "\n" in value:
        return [f"{indent}{key}: |"] + [f"{indent}  {ln}" for ln in value.splitlines()]
    return [f"{indent}{key}: {value}"]


def _diag(d) -> dict:
    return d.as_dict()


def _error(report: Report, exc: Exception, code: str | None = None) -> None:
    report.diagnostics.append(
        {"code": code or type(exc).__name__, "message": str(exc), "subject": "", "severity": "error"}
    )


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from None


def _ontology(args, report: Report):
    report.inputs.append(args.ontology)
    return load_ontology(_read(args.ontology), args.ontology)


# -- verbs -------------------------------------------------------------------------

def cmd_ontology_check(args, report: Report) -> int:
    report.inputs.append(args.file)
    o = load_ontology(_read(args.file), args.file)
    report.verdicts = {
        "valid": True,
        "classes": len(o.classes),
        "properties": len(o.properties),
        "restrictions": sum(len(c.restrictions) for c in o.classes.values()),
    }
    return EXIT_OK


def cmd_ingest(args, report: Report) -> int:
    report.inputs.append(args.wsdl)
    wsdl_text = _read(args.wsdl)
    wsdl = parse_wsdl(wsdl_text, args.operation)
    if args.xsd:
        report.inputs.append(args.xsd)
        schema = parse_xsd(_read(args.xsd))
    else:
        schema = parse_xsd(wsdl_text)
    ann = generate_skeleton(wsdl, schema, args.name, args.profile_name)
    text = serialize_annotation(ann)
    report.verdicts = {
        "operation": wsdl.operation.name,
        "inputs": [ann.grounding.input_parts[p.id.param] for p in ann.inputs],
        "expansions": [n.has_id for n in ann.nlog_parameters()],
    }
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
        report.artifacts.append(args.output)
    else:
        report.verdicts["annotation"] = text
    return EXIT_OK


def _split_assignment(raw: str, flag: str) -> tuple[str, str]:
    key, eq, value = raw.partition("=")
    if not eq or not key.strip() or not value.strip():
        raise ParseError(f"{flag} expects PARAM=VALUE, got {raw!r}")
    return key.strip(), value.strip()


def cmd_annotate(args, report: Report) -> int:
    report.inputs.append(args.file)
    o = _ontology(args, report)
    original = _read(args.file)
    editor = AnnotationEditor(original, args.file)

    def class_or_builtin(token: str) -> str:
        expanded = editor.annotation.prefixes.expand(token, strict=False)
        if is_builtin(expanded):
            return expanded
        return o.class_id(token if token in o else expanded)

    if args.refers_to:
        target = o.class_id(args.refers_to)
        editor.declare_prefix_for(target, o.prefixes)
        editor.set_refers_to(target)
    for raw in args.type or ():
        param, token = _split_assignment(raw, "--type")
        type_iri = class_or_builtin(token)
        if param not in editor.layout.params:
            raise UnknownParameter(f"{editor.annotation.name}.{param}")
        editor.declare_prefix_for(type_iri, o.prefixes)
        editor.set_type(param, type_iri)
    for raw in args.label or ():
        param, text = _split_assignment(raw, "--label")
        editor.set_label(param, text)
    for raw in args.link or ():
        param, target = _split_assignment(raw, "--link")
        editor.add_link(param, ParamRef.parse(target))

    out = args.output or args.file
    changed = editor.text != original or out != args.file
    if changed:
        Path(out).write_text(editor.text, encoding="utf-8")
        report.artifacts.append(out)
    diags = validate_annotation(editor.annotation, o)
    report.diagnostics = [_diag(d) for d in diags]
    report.verdicts = {"changed": editor.text != original}
    return EXIT_OK


def cmd_profile_check(args, report: Report) -> int:
    report.inputs.append(args.file)
    o = _ontology(args, report)
    ann = parse_annotation(_read(args.file), args.file)
    verdict = check_profile(ann, o)
    c = o.prefixes.compact
    report.verdicts = {
        "consistent": verdict.consistent,
        "tmp_class": verdict.tmp_class_name,
        "refers_to": c(ann.profile.refers_to),
        "derived": [f"{c(a.property)} exactly {a.count} {c(a.qualifier)}" for a in verdict.derived],
        "constraints": [r.describe(o.prefixes) for r in verdict.constraints],
    }
    for v in verdict.violations:
        report.diagnostics.append({
            "code": "CardinalityViolation" if v.restriction.kind.value == "Cardinality" else "TypeViolation",
            "message": v.describe(o.prefixes),
            "subject": ann.name,
            "severity": "error",
        })
    return EXIT_OK if verdict.consistent else EXIT_INVALID


def cmd_wf_validate(args, report: Report) -> int:
    report.inputs.append(args.file)
    o = _ontology(args, report)
    w = load_workflow(args.file)
    result = validate_workflow(w, o)
    sig = derive_workflow_signature(w)
    report.diagnostics = [_diag(d) for d in result.diagnostics]
    report.verdicts = {
        "valid": result.valid,
        "links": [{"source": str(s), "target": str(t), "kind": v.kind.value, "accepted": v.accepted}
                  for s, t, v in result.link_verdicts],
        "signature": {"inputs": [str(r) for r in sig.has_input], "outputs": [str(r) for r in sig.has_output]},
    }
    return EXIT_OK if result.valid else EXIT_INVALID


def cmd_wf_run(args, report: Report) -> int:
    report.inputs.append(args.file)
    o = _ontology(args, report)
    w = load_workflow(args.file)
    result = validate_workflow(w, o)
    report.diagnostics = [_diag(d) for d in result.diagnostics if d.is_error]
    if not result.valid:
        report.verdicts = {"valid": False}
        return EXIT_INVALID
    report.inputs += [args.manifest, args.endpoints]
    manifest = load_manifest(_read(args.manifest), args.manifest)
    endpoints = load_endpoints(_read(args.endpoints), args.endpoints)
    run = execute(w, o, manifest, endpoints, HttpTransport(), concurrency=args.concurrency)
    data = run.as_dict(timing=not args.no_timing)
    report.verdicts = {"status": data["status"], "failure": data["failure"], "wf_outputs": data["wf_outputs"],
                       "events": data["events"]}
    if not args.json:
        report.verdicts["services"] = [{"name": s["name"], "status": s["status"], "extracted": s["extracted"]}
                                       for s in data["services"]]
    else:
        report.verdicts["services"] = data["services"]
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        for s in run.services:
            for kind, text in (("request", s.request), ("response", s.response)):
                if text:
                    p = out / f"{s.name}.{kind}.xml"
                    p.write_text(text, encoding="utf-8")
                    report.artifacts.append(str(p))
        p = out / "report.json"
        p.write_text(json.dumps(data, indent=2) + "\n", encoding="utf-8")
        report.artifacts.append(str(p))
    if not run.succeeded:
        report.diagnostics.append({"code": run.cause_kind, "message": run.cause, "subject": run.failed_step,
                                   "severity": "error"})
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_mock_serve(args, report: Report) -> int:
    if args.port is not None and len(args.config) > 1:
        raise ParseError("--port only applies to a single --config")
    handles = []
    try:
        for path in args.config:
            report.inputs.append(path)
            cfg = load_mock_config(_read(path), path, run_id=args.run_id, port=args.port,
                                   fault_mode=True if args.fault else None)
            h = serve(cfg)
            handles.append(h)
            print(f"serving {cfg.service} at {h.url}", flush=True)
        try:
            if args.duration is not None:
                time.sleep(args.duration)
            else:
                while True:
                    time.sleep(3600)
        except KeyboardInterrupt:
            pass
    finally:
        for h in handles:
            h.shutdown()
    report.verdicts = {"served": [{"service": h.service.config.service, "url": h.url,
                                   "requests": len(h.requests)} for h in handles]}
    return EXIT_OK


def cmd_query(args, report: Report) -> int:
    services = []
    for path in args.store:
        report.inputs.append(path)
        if path.endswith(".wf"):
            services.extend(load_workflow(path).services.values())
        else:
            services.append(parse_annotation(_read(path), path))
    store = build_store(services)
    patterns = parse_query(args.query, store.prefixes)
    rows = query(store, patterns)
    report.verdicts = {
        "count": len(rows),
        "bindings": [{k: v.value for k, v in row.items()} for row in rows],
    }
    return EXIT_OK


# -- parser ------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="print the report as JSON")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="nlogflow", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"nlogflow {__version__}")
    sub = p.add_subparsers(dest="verb", required=True)

    s = sub.add_parser("ontology-check", parents=[common], help="load and check an ontology file")
    s.add_argument("file")
    s.set_defaults(func=cmd_ontology_check)

    s = sub.add_parser("ingest", parents=[common], help="annotation skeleton from WSDL/XSD")
    s.add_argument("--wsdl", required=True)
    s.add_argument("--xsd", help="schema file (default: schema embedded in the WSDL)")
    s.add_argument("--name", required=True, help="service local name used in parameter references")
    s.add_argument("--profile-name")
    s.add_argument("--operation", help="operation to annotate when the WSDL has several")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("annotate", parents=[common], help="edit types, refers-to and links in place")
    s.add_argument("file")
    s.add_argument("--ontology", required=True)
    s.add_argument("--type", action="append", metavar="PARAM=CLASS")
    s.add_argument("--refers-to", metavar="CLASS")
    s.add_argument("--label", action="append", metavar="PARAM=TEXT")
    s.add_argument("--link", action="append", metavar="PARAM=SERVICE.PARAM")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_annotate)

    s = sub.add_parser("profile-check", parents=[common], help="profile vs data-processing class")
    s.add_argument("file")
    s.add_argument("--ontology", required=True)
    s.set_defaults(func=cmd_profile_check)

    s = sub.add_parser("wf-validate", parents=[common], help="structural and link-type validation")
    s.add_argument("file")
    s.add_argument("--ontology", required=True)
    s.set_defaults(func=cmd_wf_validate)

    s = sub.add_parser("wf-run", parents=[common], help="execute a workflow")
    s.add_argument("file")
    s.add_argument("--ontology", required=True)
    s.add_argument("--manifest", required=True)
    s.add_argument("--endpoints", required=True)
    s.add_argument("--concurrency", type=int, default=1)
    s.add_argument("--out", help="directory for envelopes and report.json")
    s.add_argument("--no-timing", action="store_true", help="omit timings from the report")
    s.set_defaults(func=cmd_wf_run)

    s = sub.add_parser("mock-serve", parents=[common], help="serve mock jGASW endpoints")
    s.add_argument("--config", action="append", required=True)
    s.add_argument("--run-id")
    s.add_argument("--port", type=int)
    s.add_argument("--fault", action="store_true", help="answer every request with a fault")
    s.add_argument("--duration", type=float, help="stop after this many seconds")
    s.set_defaults(func=cmd_mock_serve)

    s = sub.add_parser("query", parents=[common], help="triple-pattern query over annotations")
    s.add_argument("query", help='e.g. "ex001_output1 nlogExpandsTo ?p . ?p hasID ?id"')
    s.add_argument("--store", action="append", required=True, help=".svc or .wf file (repeatable)")
    s.set_defaults(func=cmd_query)
    return p


def run_command(argv: list[str]) -> tuple[int, Report]:
    if argv[:2] == ["mock", "serve"]:
        argv = ["mock-serve"] + argv[2:]
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code if isinstance(exc.code, int) else EXIT_USAGE
        return code, Report(verb="")
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    report = Report(verb=args.verb)
    try:
        code = args.func(args, report)
    except ExecutionError as exc:
        _error(report, exc)
        code = EXIT_RUNTIME
    except (NlogflowError, KeyError, ValueError) as exc:
        _error(report, exc, "UnknownClass" if isinstance(exc, UnknownClass) else None)
        code = EXIT_USAGE
    except (FileNotFoundError, IsADirectoryError, NotADirectoryError) as exc:
        _error(report, exc, "MissingFile")
        code = EXIT_USAGE
    except OSError as exc:
        _error(report, exc)
        code = EXIT_RUNTIME
    return code, report


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    code, report = run_command(argv)
    if report.verb:  # empty when argparse already printed usage/help
        as_json = "--json" in argv
        sys.stdout.write(json.dumps(report.as_dict(), indent=2) + "\n" if as_json else report.to_text())
    return code


if __name__ == "__main__":
    sys.exit(main())

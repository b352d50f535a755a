"""Native annotation file format (``.svc``).

::

    @prefix ds: <http://localhost/dataset-owl-lite.owl#>
    service ex001
    profile
      name Test1
      refers-to dp:De-noising
    inputs
      input input1
        type ds:Mr-dataset
    outputs
      output output1
        type xsd:string
        expands simpleoutput
          id simpleoutput
          label resampled image
          type ds:T1-weighted-MR-dataset
          links ex002.input2
    grounding
      wsdl http://localhost:8080/Test1/jigsaw?wsdl
      namespace http://i3s.cnrs.fr/jigsaw
      operation local
      port-type jigsawPort
      part input1 simpleinput
      result localResult

Indentation is two spaces per level; ``links`` takes a comma separated list
of ``service.param`` references.  Profile inputs/outputs are derived from
the ``inputs`` and ``outputs`` sections.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from nlogflow._syntax import Prefixes, XSD_STRING, iter_lines, parse_prefix, split_keyword
from nlogflow.errors import ParseError, UnknownParameter
from nlogflow.semodel.model import (
    Direction,
    Grounding,
    NlogParameter,
    OutputDecl,
    Parameter,
    ParamRef,
    Profile,
    ServiceAnnotation,
)


@dataclass
class Node:
    keyword: str
    value: str
    line: int
    indent: int
    children: list[Node] = field(default_factory=list)

    def last_line(self) -> int:
        return self.children[-1].last_line() if self.children else self.line

    def child(self, keyword: str) -> Node | None:
        hits = [c for c in self.children if c.keyword == keyword]
        if len(hits) > 1:
            raise ParseError(f"{keyword!r} given more than once", hits[1].line)
        return hits[0] if hits else None


def parse_tree(text: str, source: str | None = None) -> tuple[list[Node], Prefixes]:
    """Indentation tree of keyword/value nodes plus the declared prefixes."""
    prefixes = Prefixes()
    root = Node("", "", 0, -1)
    stack = [root]
    for line in iter_lines(text):
        if line.text.startswith("@prefix"):
            if line.indent:
                raise ParseError("@prefix must start at column 0", line.number, source)
            prefixes.declare(*parse_prefix(line.text, line.number, source))
            continue
        kw, val = split_keyword(line.text)
        while stack[-1].indent >= line.indent:
            stack.pop()
        parent = stack[-1]
        if parent.children and parent.children[0].indent != line.indent:
            raise ParseError("inconsistent indentation", line.number, source)
        node = Node(kw, val, line.number, line.indent)
        parent.children.append(node)
        stack.append(node)
    return root.children, prefixes


@dataclass
class Layout:
    """Where things live in a parsed annotation file, for in-place edits."""

    service_line: int = 0
    profile: Node | None = None
    params: dict[str, Node] = field(default_factory=dict)


def _links(value: str, line: int, source) -> tuple[ParamRef, ...]:
    out = []
    for tok in value.split(","):
        tok = tok.strip()
        try:
            ref = ParamRef.parse(tok)
        except ParseError as exc:
            raise ParseError(str(exc), line, source) from None
        if ref not in out:
            out.append(ref)
    return tuple(out)


def _type(value: str, prefixes: Prefixes, line: int, source) -> str:
    if not value:
        raise ParseError("empty type", line, source)
    try:
        return prefixes.expand(value)
    except KeyError as exc:
        raise ParseError(f"unknown prefix {exc.args[0]!r}", line, source) from None


def _no_value(node: Node, source) -> None:
    if node.value:
        raise ParseError(f"section {node.keyword!r} takes no value", node.line, source)


def _fields(node: Node, allowed: set[str], source) -> dict[str, Node]:
    out: dict[str, Node] = {}
    for c in node.children:
        if c.keyword not in allowed:
            raise ParseError(f"unexpected {c.keyword!r} inside {node.keyword!r}", c.line, source)
        if c.keyword in out and c.keyword not in ("expands", "part", "input", "output"):
            raise ParseError(f"{c.keyword!r} given more than once", c.line, source)
        out.setdefault(c.keyword, c)
    return out


def parse_annotation_with_layout(text: str, source: str | None = None) -> tuple[ServiceAnnotation, Layout]:
    nodes, prefixes = parse_tree(text, source)
    layout = Layout()
    top = {}
    for n in nodes:
        if n.keyword not in ("service", "profile", "inputs", "outputs", "grounding"):
            raise ParseError(f"unknown section {n.keyword!r}", n.line, source)
        if n.keyword in top:
            raise ParseError(f"section {n.keyword!r} repeated", n.line, source)
        top[n.keyword] = n
    if "service" not in top or not top["service"].value:
        raise ParseError("missing 'service <name>' line", None, source)
    svc = top["service"].value
    if " " in svc or "." in svc:
        raise ParseError(f"bad service name {svc!r}", top["service"].line, source)
    layout.service_line = top["service"].line

    name, refers = svc, None
    if "profile" in top:
        pnode = top["profile"]
        _no_value(pnode, source)
        layout.profile = pnode
        f = _fields(pnode, {"name", "refers-to"}, source)
        if "name" in f:
            name = f["name"].value
        if "refers-to" in f:
            refers = _type(f["refers-to"].value, prefixes, f["refers-to"].line, source)

    def param_block(node: Node, allowed: set[str]) -> tuple[str, dict[str, Node]]:
        if not node.value or " " in node.value:
            raise ParseError(f"{node.keyword!r} needs a single parameter id", node.line, source)
        if node.value in layout.params:
            raise ParseError(f"parameter {node.value!r} declared twice", node.line, source)
        layout.params[node.value] = node
        return node.value, _fields(node, allowed, source)

    inputs = []
    if "inputs" in top:
        _no_value(top["inputs"], source)
        for n in top["inputs"].children:
            if n.keyword != "input":
                raise ParseError(f"expected 'input', got {n.keyword!r}", n.line, source)
            pid, f = param_block(n, {"type", "links"})
            ptype = _type(f["type"].value, prefixes, f["type"].line, source) if "type" in f else XSD_STRING
            links = _links(f["links"].value, f["links"].line, source) if "links" in f else ()
            inputs.append(Parameter(ParamRef(svc, pid), Direction.INPUT, ptype, links))

    outputs = []
    if "outputs" in top:
        _no_value(top["outputs"], source)
        for n in top["outputs"].children:
            if n.keyword != "output":
                raise ParseError(f"expected 'output', got {n.keyword!r}", n.line, source)
            pid, f = param_block(n, {"type", "links", "expands"})
            ptype = _type(f["type"].value, prefixes, f["type"].line, source) if "type" in f else XSD_STRING
            links = _links(f["links"].value, f["links"].line, source) if "links" in f else ()
            expansions = []
            for e in (c for c in n.children if c.keyword == "expands"):
                eid, ef = param_block(e, {"id", "label", "type", "links"})
                expansions.append(
                    NlogParameter(
                        ParamRef(svc, eid),
                        has_id=ef["id"].value if "id" in ef else eid,
                        has_label=ef["label"].value if "label" in ef else "",
                        parameter_type=(
                            _type(ef["type"].value, prefixes, ef["type"].line, source) if "type" in ef else XSD_STRING
                        ),
                        links=_links(ef["links"].value, ef["links"].line, source) if "links" in ef else (),
                    )
                )
            outputs.append(OutputDecl(Parameter(ParamRef(svc, pid), Direction.OUTPUT, ptype, links), tuple(expansions)))

    grounding = None
    if "grounding" in top:
        gnode = top["grounding"]
        _no_value(gnode, source)
        f = _fields(gnode, {"wsdl", "namespace", "operation", "port-type", "part", "result"}, source)
        parts: dict[str, str] = {}
        for c in gnode.children:
            if c.keyword == "part":
                bits = c.value.split()
                if len(bits) != 2:
                    raise ParseError("'part' takes a parameter id and an element name", c.line, source)
                if bits[0] in parts:
                    raise ParseError(f"part for {bits[0]!r} repeated", c.line, source)
                parts[bits[0]] = bits[1]
        if "operation" not in f:
            raise ParseError("grounding needs an 'operation'", gnode.line, source)
        grounding = Grounding(
            wsdl_uri=f["wsdl"].value if "wsdl" in f else "",
            operation=f["operation"].value,
            port_type=f["port-type"].value if "port-type" in f else "",
            namespace=f["namespace"].value if "namespace" in f else "",
            input_parts=parts,
            output_message_part=f["result"].value if "result" in f else "",
        )

    profile = Profile(
        name=name,
        refers_to=refers,
        has_input=tuple(p.id for p in inputs),
        has_output=tuple(o.id for o in outputs),
    )
    ann = ServiceAnnotation(svc, profile, tuple(inputs), tuple(outputs), grounding, prefixes)
    return ann, layout


def parse_annotation(text: str, source: str | None = None) -> ServiceAnnotation:
    return parse_annotation_with_layout(text, source)[0]


def serialize_annotation(s: ServiceAnnotation) -> str:
    c = s.prefixes.compact
    out = list(s.prefixes.header_lines())
    out.append(f"service {s.name}")
    out.append("profile")
    out.append(f"  name {s.profile.name}")
    if s.profile.refers_to:
        out.append(f"  refers-to {c(s.profile.refers_to)}")

    def links(ls, indent):
        if ls:
            out.append(f"{indent}links {', '.join(str(r) for r in ls)}")

    if s.inputs:
        out.append("inputs")
        for p in s.inputs:
            out.append(f"  input {p.id.param}")
            out.append(f"    type {c(p.parameter_type)}")
            links(p.links, "    ")
    if s.outputs:
        out.append("outputs")
        for o in s.outputs:
            out.append(f"  output {o.id.param}")
            out.append(f"    type {c(o.base.parameter_type)}")
            links(o.base.links, "    ")
            for n in o.expands_to:
                out.append(f"    expands {n.id.param}")
                out.append(f"      id {n.has_id}")
                if n.has_label:
                    out.append(f"      label {n.has_label}")
                out.append(f"      type {c(n.parameter_type)}")
                links(n.links, "      ")
    g = s.grounding
    if g is not None:
        out.append("grounding")
        if g.wsdl_uri:
            out.append(f"  wsdl {g.wsdl_uri}")
        if g.namespace:
            out.append(f"  namespace {g.namespace}")
        out.append(f"  operation {g.operation}")
        if g.port_type:
            out.append(f"  port-type {g.port_type}")
        for pid, el in g.input_parts.items():
            out.append(f"  part {pid} {el}")
        if g.output_message_part:
            out.append(f"  result {g.output_message_part}")
    return "\n".join(out) + "\n"


# -- in-place edits ------------------------------------------------------------

class AnnotationEditor:
    """Apply edits to annotation text while leaving unrelated lines untouched.

    Every edit is idempotent; the result is re-parsed after each change so a
    bad edit never yields an unparsable file.
    """

    def __init__(self, text: str, source: str | None = None):
        self.source = source
        self.text = text
        self.annotation, self.layout = parse_annotation_with_layout(text, source)

    def _lines(self) -> list[str]:
        return self.text.splitlines(keepends=True)

    def _commit(self, lines: list[str]) -> None:
        text = "".join(lines)
        self.annotation, self.layout = parse_annotation_with_layout(text, self.source)
        self.text = text

    def _set_field(self, block: Node, keyword: str, value: str, after: tuple[str, ...] = ()) -> None:
        lines = self._lines()
        for ch in block.children:
            if ch.keyword == keyword:
                raw = lines[ch.line - 1]
                eol = raw[len(raw.rstrip("\r\n")):] or "\n"
                new = " " * ch.indent + f"{keyword} {value}" + eol
                if raw != new:
                    lines[ch.line - 1] = new
                    self._commit(lines)
                return
        indent = block.children[0].indent if block.children else block.indent + 2
        # insert after the last preceding field we know about, else right after the header
        at = block.line
        for ch in block.children:
            if ch.keyword in after:
                at = ch.last_line()
        if lines and not lines[-1].endswith("\n"):
            lines[-1] += "\n"
        lines.insert(at, " " * indent + f"{keyword} {value}\n")
        self._commit(lines)

    def _compact(self, iri: str) -> str:
        return self.annotation.prefixes.compact(iri)

    def declare_prefix_for(self, iri: str, known: Prefixes) -> None:
        """Borrow the prefix ``known`` uses for ``iri`` unless the file already
        abbreviates that namespace or uses the name for something else."""
        matches = [(p, ns) for p, ns in known.table.items() if iri.startswith(ns) and ns != iri]
        if not matches:
            return
        prefix, ns = max(matches, key=lambda m: len(m[1]))
        table = self.annotation.prefixes.table
        if ns in table.values() or prefix in table:
            return
        lines = self._lines()
        lines.insert(self.layout.service_line - 1, f"@prefix {prefix}: <{ns}>\n")
        self._commit(lines)

    def set_type(self, param: str, type_iri: str) -> None:
        node = self.layout.params.get(param)
        if node is None:
            raise UnknownParameter(f"{self.annotation.name}.{param}")
        self._set_field(node, "type", self._compact(type_iri), after=("id", "label"))

    def set_refers_to(self, class_iri: str) -> None:
        if self.layout.profile is None:
            lines = self._lines()
            if lines and not lines[-1].endswith("\n"):
                lines[-1] += "\n"
            lines.insert(self.layout.service_line, "profile\n")
            self._commit(lines)
        self._set_field(self.layout.profile, "refers-to", self._compact(class_iri), after=("name",))

    def set_label(self, param: str, label: str) -> None:
        node = self.layout.params.get(param)
        if node is None or node.keyword != "expands":
            raise UnknownParameter(f"{self.annotation.name}.{param}")
        self._set_field(node, "label", label, after=("id",))

    def add_link(self, param: str, target: ParamRef) -> None:
        node = self.layout.params.get(param)
        if node is None:
            raise UnknownParameter(f"{self.annotation.name}.{param}")
        current = list(self.annotation.find(param).links)
        if target in current:
            return
        current.append(target)
        self._set_field(node, "links", ", ".join(str(r) for r in current), after=("id", "label", "type"))

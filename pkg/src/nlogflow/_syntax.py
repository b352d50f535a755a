"""Line-level helpers shared by the native text formats (ontology, annotation,
workflow, manifest, endpoint map, mock config)."""

from __future__ import annotations

import re
from collections.abc import Iterator, Mapping
from dataclasses import dataclass, field

from nlogflow.errors import ParseError

XSD_NS = "http://www.w3.org/2001/XMLSchema#"
XSD_STRING = XSD_NS + "string"
XSD_ANYURI = XSD_NS + "anyURI"
BUILTIN_TYPES = frozenset({XSD_STRING, XSD_ANYURI})

DEFAULT_PREFIXES = {"xsd": XSD_NS}

_PREFIX_RE = re.compile(r"^@prefix\s+([A-Za-z_][\w.-]*)?:\s*<([^>]*)>\s*\.?\s*$")


def strip_comment(line: str) -> str:
    """Drop a trailing ``#`` comment; ``#`` inside ``<...>`` or glued to a
    token (as in ``a#b``) is kept."""
    depth = 0
    prev = " "
    for i, ch in enumerate(line):
        if ch == "<":
            depth += 1
        elif ch == ">" and depth:
            depth -= 1
        elif ch == "#" and depth == 0 and prev.isspace():
            return line[:i]
        prev = ch
    return line


@dataclass
class Prefixes:
    table: dict[str, str] = field(default_factory=lambda: dict(DEFAULT_PREFIXES))

    def declare(self, prefix: str, ns: str) -> None:
        self.table[prefix] = ns

    def expand(self, token: str, strict: bool = True) -> str:
        """Turn ``<iri>``, ``prefix:local`` or a bare name into an id string.

        Bare names (no colon) are returned unchanged.  With ``strict`` an
        unknown prefix raises ``KeyError``; otherwise the token is kept."""
        if token.startswith("<") and token.endswith(">"):
            return token[1:-1]
        if ":" not in token:
            if token in ("string", "anyURI"):
                return XSD_NS + token
            return token
        prefix, local = token.split(":", 1)
        if prefix in self.table:
            return self.table[prefix] + local
        if local.startswith("//"):
            return token
        if strict:
            raise KeyError(prefix)
        return token

    def compact(self, iri: str) -> str:
        best = None
        for prefix, ns in self.table.items():
            if ns and iri.startswith(ns) and len(iri) > len(ns):
                local = iri[len(ns):]
                if not re.fullmatch(r"[\w.-]+", local):
                    continue
                if best is None or len(ns) > len(best[1]):
                    best = (prefix, ns)
        if best is not None:
            return f"{best[0]}:{iri[len(best[1]):]}"
        if ":" in iri:
            return f"<{iri}>"
        return iri

    def header_lines(self, used: Mapping[str, str] | None = None) -> list[str]:
        table = used if used is not None else self.table
        return [f"@prefix {p}: <{ns}>" for p, ns in table.items() if p not in DEFAULT_PREFIXES
                or DEFAULT_PREFIXES[p] != ns]


def parse_prefix(line: str, lineno: int, source: str | None = None) -> tuple[str, str]:
    m = _PREFIX_RE.match(line.strip())
    if not m:
        raise ParseError(f"malformed @prefix line: {line.strip()!r}", lineno, source)
    return m.group(1) or "", m.group(2)


@dataclass
class Line:
    number: int
    indent: int
    text: str  # comment-stripped, whitespace-trimmed
    raw: str


def iter_lines(text: str) -> Iterator[Line]:
    for number, raw in enumerate(text.splitlines(), start=1):
        body = strip_comment(raw).rstrip()
        if not body.strip():
            continue
        if "\t" in body[: len(body) - len(body.lstrip())]:
            raise ParseError("tabs are not allowed for indentation", number)
        indent = len(body) - len(body.lstrip(" "))
        yield Line(number, indent, body.strip(), raw)


def split_keyword(text: str) -> tuple[str, str]:
    parts = text.split(None, 1)
    return parts[0], (parts[1].strip() if len(parts) > 1 else "")


def is_builtin(type_ref: str) -> bool:
    return type_ref in BUILTIN_TYPES


def local_name(iri: str) -> str:
    for sep in ("#", "/", ":"):
        if sep in iri:
            iri = iri.rsplit(sep, 1)[1]
    return iri

"""In-memory triple store over service annotations with conjunctive
triple-pattern queries."""

from __future__ import annotations

import re
import shlex
from collections import defaultdict
from collections.abc import Iterable
from dataclasses import dataclass

from nlogflow._syntax import Prefixes
from nlogflow.errors import DuplicateService, ParseError
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

# predicate names
TYPE = "type"
PRESENTS = "presents"
SUPPORTS = "supports"
SERVICE_NAME = "serviceName"
REFERS_TO = "refers-to"
HAS_INPUT = "hasInput"
HAS_OUTPUT = "hasOutput"
OF_SERVICE = "ofService"
PARAM_ID = "paramId"
POSITION = "position"
PARAMETER_TYPE = "parameterType"
NLOG_EXPANDS_TO = "nlogExpandsTo"
HAS_ID = "hasID"
HAS_LABEL = "hasLabel"
LINKS = "links"
WSDL_DOCUMENT = "wsdlDocument"
OPERATION = "operation"
PORT_TYPE = "portType"
NAMESPACE = "namespace"
WSDL_MESSAGE_PART = "wsdlMessagePart"
WSDL_OUTPUT_PART = "wsdlOutputMessagePart"


@dataclass(frozen=True, order=True)
class IRI:
    value: str

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True, order=True)
class Literal:
    value: str

    def __str__(self) -> str:
        return f'"{self.value}"'


@dataclass(frozen=True, order=True)
class Var:
    name: str

    def __str__(self) -> str:
        return f"?{self.name}"


Term = IRI | Literal
Triple = tuple[Term, Term, Term]
Pattern = tuple[Term | Var, Term | Var, Term | Var]


def _sort_key(term: Term) -> tuple[int, str]:
    return (0 if isinstance(term, IRI) else 1, term.value)


class TripleStore:
    """A set of triples indexed by subject and by predicate."""

    def __init__(self, triples: Iterable[Triple] = (), prefixes: Prefixes | None = None):
        self._triples: set[Triple] = set()
        self._by_s: dict[Term, set[Triple]] = defaultdict(set)
        self._by_p: dict[Term, set[Triple]] = defaultdict(set)
        self._by_o: dict[Term, set[Triple]] = defaultdict(set)
        self.prefixes = prefixes or Prefixes()
        for t in triples:
            self.add(t)

    def add(self, triple: Triple) -> None:
        if triple in self._triples:
            return
        s, p, o = triple
        self._triples.add(triple)
        self._by_s[s].add(triple)
        self._by_p[p].add(triple)
        self._by_o[o].add(triple)

    def __len__(self) -> int:
        return len(self._triples)

    def __iter__(self):
        return iter(sorted(self._triples, key=lambda t: tuple(map(_sort_key, t))))

    def __contains__(self, triple) -> bool:
        return triple in self._triples

    def match(self, s=None, p=None, o=None) -> set[Triple]:
        candidates = None
        for term, index in ((s, self._by_s), (p, self._by_p), (o, self._by_o)):
            if term is None:
                continue
            hit = index.get(term, set())
            if candidates is None or len(hit) < len(candidates):
                candidates = hit
        if candidates is None:
            candidates = self._triples
        return {t for t in candidates if (s is None or t[0] == s) and (p is None or t[1] == p)
                and (o is None or t[2] == o)}

    def objects(self, s: Term, p: str) -> list[Term]:
        return sorted((t[2] for t in self.match(s, IRI(p))), key=_sort_key)

    def value(self, s: Term, p: str) -> str | None:
        objs = self.objects(s, p)
        return objs[0].value if objs else None

    def dump(self) -> str:
        return "".join(f"{s} {p} {o} .\n" for s, p, o in self)


def query(store: TripleStore, patterns: list[Pattern]) -> list[dict[str, Term]]:
    """Every substitution that maps all ``patterns`` onto store triples,
    sorted by binding tuple (variables in order of first appearance)."""
    bindings: list[dict[str, Term]] = [{}]
    for pat in patterns:
        nxt = []
        for b in bindings:
            bound = [b.get(x.name) if isinstance(x, Var) else x for x in pat]
            for triple in store.match(*bound):
                new = dict(b)
                ok = True
                for x, v in zip(pat, triple):
                    if isinstance(x, Var):
                        if new.setdefault(x.name, v) != v:
                            ok = False
                            break
                if ok:
                    nxt.append(new)
        bindings = nxt
        if not bindings:
            break
    order = []
    for pat in patterns:
        for x in pat:
            if isinstance(x, Var) and x.name not in order:
                order.append(x.name)
    unique = {tuple((k, b[k]) for k in order): b for b in bindings}
    return [unique[k] for k in sorted(unique, key=lambda key: [_sort_key(v) for _, v in key])]


_TOKEN = re.compile(r'\?[\w-]+|<[^>]*>|"(?:[^"\\]|\\.)*"|[^\s]+')


def parse_query(text: str, prefixes: Prefixes | None = None) -> list[Pattern]:
    """Parse ``s p o . s p o`` text; ``?x`` is a variable, ``"..."`` a literal,
    ``<...>`` or ``prefix:local`` an IRI and any other token a plain name."""
    prefixes = prefixes or Prefixes()
    body = text.strip()
    m = re.match(r"(?is)^select\s+.*?\bwhere\s*\{(.*)\}\s*$", body)
    if m:
        body = m.group(1)
    patterns: list[Pattern] = []
    current: list = []
    for tok in _TOKEN.findall(body):
        if tok == ".":
            if current:
                raise ParseError(f"incomplete triple pattern before '.': {current}")
            continue
        end = tok.endswith(".") and not tok.startswith(("<", '"')) and len(tok) > 1
        if end:
            tok = tok[:-1]
        current.append(_term(tok, prefixes))
        if len(current) == 3:
            patterns.append(tuple(current))
            current = []
        elif end:
            raise ParseError("incomplete triple pattern")
    if current:
        raise ParseError(f"incomplete triple pattern: {' '.join(map(str, current))}")
    return patterns


def _term(tok: str, prefixes: Prefixes):
    if tok.startswith("?"):
        return Var(tok[1:])
    if tok.startswith('"'):
        return Literal(shlex.split(tok)[0])
    if tok.startswith("<") and tok.endswith(">"):
        return IRI(tok[1:-1])
    try:
        return IRI(prefixes.expand(tok))
    except KeyError:
        # unknown prefix: prefixed predicates like p2:nlogExpandsTo name our plain predicates
        return IRI(tok.split(":", 1)[1])


# -- annotation <-> triples ------------------------------------------------------

def _add_param(store, svc_node, p, kind, position):
    node = IRI(p.id.node)
    store.add((node, IRI(TYPE), IRI(kind)))
    store.add((node, IRI(OF_SERVICE), svc_node))
    store.add((node, IRI(PARAM_ID), Literal(p.id.param)))
    store.add((node, IRI(POSITION), Literal(str(position))))
    if p.parameter_type:
        store.add((node, IRI(PARAMETER_TYPE), IRI(p.parameter_type)))
    for target in p.links:
        store.add((node, IRI(LINKS), IRI(target.node)))
    return node


def build_store(services: Iterable[ServiceAnnotation]) -> TripleStore:
    prefixes = Prefixes()
    store = TripleStore(prefixes=prefixes)
    seen = set()
    for s in services:
        if s.name in seen:
            raise DuplicateService(f"service {s.name!r} appears twice")
        seen.add(s.name)
        for k, v in s.prefixes.table.items():
            prefixes.table.setdefault(k, v)
        svc = IRI(s.name)
        prof = IRI(f"{s.name}_profile")
        store.add((svc, IRI(TYPE), IRI("Service")))
        store.add((svc, IRI(PRESENTS), prof))
        store.add((prof, IRI(TYPE), IRI("Profile")))
        store.add((prof, IRI(SERVICE_NAME), Literal(s.profile.name)))
        if s.profile.refers_to:
            store.add((prof, IRI(REFERS_TO), IRI(s.profile.refers_to)))
        for i, p in enumerate(s.inputs):
            node = _add_param(store, svc, p, "Input", i)
            store.add((prof, IRI(HAS_INPUT), node))
        for i, o in enumerate(s.outputs):
            node = _add_param(store, svc, o.base, "Output", i)
            store.add((prof, IRI(HAS_OUTPUT), node))
            for j, n in enumerate(o.expands_to):
                nn = _add_param(store, svc, n, "NlogParameter", j)
                store.add((node, IRI(NLOG_EXPANDS_TO), nn))
                store.add((nn, IRI(HAS_ID), Literal(n.has_id)))
                store.add((nn, IRI(HAS_LABEL), Literal(n.has_label)))
        g = s.grounding
        if g is not None:
            gn = IRI(f"{s.name}_grounding")
            store.add((svc, IRI(SUPPORTS), gn))
            store.add((gn, IRI(TYPE), IRI("Grounding")))
            store.add((gn, IRI(WSDL_DOCUMENT), Literal(g.wsdl_uri)))
            store.add((gn, IRI(OPERATION), Literal(g.operation)))
            store.add((gn, IRI(PORT_TYPE), Literal(g.port_type)))
            store.add((gn, IRI(NAMESPACE), Literal(g.namespace)))
            store.add((gn, IRI(WSDL_OUTPUT_PART), Literal(g.output_message_part)))
            for pid, el in g.input_parts.items():
                store.add((IRI(ParamRef(s.name, pid).node), IRI(WSDL_MESSAGE_PART), Literal(el)))
    return store


def annotations_from_store(store: TripleStore) -> list[ServiceAnnotation]:
    """Rebuild the annotations a store was built from."""
    node_ref: dict[IRI, ParamRef] = {}
    for node, _, svc in store.match(p=IRI(OF_SERVICE)):
        node_ref[node] = ParamRef(svc.value, store.value(node, PARAM_ID))

    def ref_of(node: IRI) -> ParamRef:
        if node in node_ref:
            return node_ref[node]
        svc, _, param = node.value.partition("_")
        return ParamRef(svc, param)

    def pos(node) -> int:
        return int(store.value(node, POSITION) or 0)

    def links(node) -> tuple[ParamRef, ...]:
        return tuple(sorted(ref_of(t) for t in store.objects(node, LINKS)))

    def ptype(node) -> str:
        return store.value(node, PARAMETER_TYPE) or ""

    out = []
    for svc, _, _ in sorted(store.match(p=IRI(TYPE), o=IRI("Service"))):
        name = svc.value
        prof = store.objects(svc, PRESENTS)[0]
        in_nodes = sorted(store.objects(prof, HAS_INPUT), key=pos)
        out_nodes = sorted(store.objects(prof, HAS_OUTPUT), key=pos)
        inputs = tuple(Parameter(ref_of(n), Direction.INPUT, ptype(n), links(n)) for n in in_nodes)
        outputs = []
        for n in out_nodes:
            exps = []
            for e in sorted(store.objects(n, NLOG_EXPANDS_TO), key=pos):
                exps.append(NlogParameter(ref_of(e), store.value(e, HAS_ID) or "",
                                          store.value(e, HAS_LABEL) or "", ptype(e), links(e)))
            outputs.append(OutputDecl(Parameter(ref_of(n), Direction.OUTPUT, ptype(n), links(n)), tuple(exps)))
        profile = Profile(store.value(prof, SERVICE_NAME) or name, store.value(prof, REFERS_TO),
                          tuple(p.id for p in inputs), tuple(o.id for o in outputs))
        grounding = None
        gns = store.objects(svc, SUPPORTS)
        if gns:
            gn = gns[0]
            parts = {}
            for n in in_nodes:
                el = store.value(n, WSDL_MESSAGE_PART)
                if el is not None:
                    parts[ref_of(n).param] = el
            grounding = Grounding(store.value(gn, WSDL_DOCUMENT) or "", store.value(gn, OPERATION) or "",
                                  store.value(gn, PORT_TYPE) or "", store.value(gn, NAMESPACE) or "",
                                  parts, store.value(gn, WSDL_OUTPUT_PART) or "")
        out.append(ServiceAnnotation(name, profile, inputs, tuple(outputs), grounding))
    return out

"""Domain taxonomy: loading, subsumption and counting-based consistency.

The native ontology format is line oriented::

    @prefix ds: <http://localhost/dataset-owl-lite.owl#>
    property dp:has-for-data-at
    class ds:Mr-dataset subClassOf ds:dataset
    restrict dp:Registration dp:has-for-data-at exactly 2 ds:Mr-dataset

``restrict`` accepts ``exactly N``, ``min N``, ``max N`` and ``only``.  A
property used in a ``restrict`` line is declared implicitly.
"""

from __future__ import annotations

import enum
from collections import Counter
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from types import MappingProxyType

from nlogflow._syntax import Prefixes, iter_lines, local_name, parse_prefix, split_keyword
from nlogflow.errors import CycleError, DanglingRef, ParseError, UnknownClass, UnknownProperty

HAS_FOR_DATA_AT = "has-for-data-at"
HAS_FOR_RESULT_AT = "has-for-result-at"
DATA_PROCESSING = "data-processing"


class RestrictionKind(str, enum.Enum):
    CARDINALITY = "Cardinality"
    ALL_VALUES_FROM = "AllValuesFrom"


@dataclass(frozen=True, order=True)
class Restriction:
    property: str
    qualifier: str
    min: int = 0
    max: int | None = None  # None means unbounded
    kind: RestrictionKind = RestrictionKind.CARDINALITY

    def __post_init__(self):
        if self.min < 0 or (self.max is not None and self.max < self.min):
            raise ValueError(f"bad cardinality bounds [{self.min}, {self.max}]")
        if self.kind is RestrictionKind.ALL_VALUES_FROM and (self.min, self.max) != (0, None):
            raise ValueError("an 'only' restriction carries no cardinality bounds")

    @classmethod
    def exactly(cls, prop: str, qualifier: str, n: int) -> Restriction:
        return cls(prop, qualifier, n, n)

    @classmethod
    def only(cls, prop: str, qualifier: str) -> Restriction:
        return cls(prop, qualifier, 0, None, RestrictionKind.ALL_VALUES_FROM)

    def describe(self, prefixes: Prefixes | None = None) -> str:
        c = prefixes.compact if prefixes else (lambda s: s)
        return f"{c(self.property)} {self.bound_text()} {c(self.qualifier)}"

    def bound_text(self) -> str:
        if self.kind is RestrictionKind.ALL_VALUES_FROM:
            return "only"
        if self.max == self.min:
            return f"exactly {self.min}"
        if self.max is None:
            return f"min {self.min}"
        if self.min == 0:
            return f"max {self.max}"
        return f"min {self.min} max {self.max}"


@dataclass(frozen=True)
class ClassDef:
    id: str
    parents: frozenset[str] = frozenset()
    restrictions: tuple[Restriction, ...] = ()


@dataclass(frozen=True)
class Violation:
    restriction: Restriction
    observed: int

    def describe(self, prefixes: Prefixes | None = None) -> str:
        return f"{self.restriction.describe(prefixes)} (observed {self.observed})"


@dataclass(frozen=True)
class Verdict:
    violations: tuple[Violation, ...] = ()

    @property
    def consistent(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.consistent


class Ontology:
    """An immutable class taxonomy with qualified restrictions."""

    def __init__(
        self,
        classes: Iterable[ClassDef] = (),
        properties: Iterable[str] = (),
        prefixes: Mapping[str, str] | None = None,
    ):
        table = {}
        for cdef in classes:
            if cdef.id in table:
                raise ParseError(f"class {cdef.id!r} declared twice")
            table[cdef.id] = cdef
        self._classes = MappingProxyType(table)
        props = set(properties)
        for cdef in table.values():
            props.update(r.property for r in cdef.restrictions)
        self._properties = frozenset(props)
        self.prefixes = Prefixes(dict(prefixes) if prefixes is not None else Prefixes().table)
        self._decl = {cid: i for i, cid in enumerate(table)}
        self._check_refs()
        self._order = self._topological_order()
        self._ancestors = {}
        for cid in self._order:
            anc = {cid}
            for p in table[cid].parents:
                anc |= self._ancestors[p]
            self._ancestors[cid] = frozenset(anc)
        self._rank = {cid: i for i, cid in enumerate(self._order)}

    # -- construction helpers ------------------------------------------------

    def _check_refs(self) -> None:
        for cdef in self._classes.values():
            for p in sorted(cdef.parents):
                if p not in self._classes:
                    raise DanglingRef(f"class {cdef.id!r} has undeclared parent {p!r}")
            for r in cdef.restrictions:
                if r.qualifier not in self._classes:
                    raise DanglingRef(
                        f"restriction on {cdef.id!r} uses undeclared qualifier {r.qualifier!r}"
                    )

    def _topological_order(self) -> list[str]:
        # parents before children, declaration order as tie-break; reports a cycle
        order: list[str] = []
        state: dict[str, int] = {}
        stack: list[str] = []

        def visit(cid: str) -> None:
            st = state.get(cid)
            if st == 2:
                return
            if st == 1:
                start = stack.index(cid)
                raise CycleError(stack[start:] + [cid])
            state[cid] = 1
            stack.append(cid)
            for p in sorted(self._classes[cid].parents, key=self._decl.__getitem__):
                visit(p)
            stack.pop()
            state[cid] = 2
            order.append(cid)

        for cid in self._classes:
            visit(cid)
        return order

    # -- queries ---------------------------------------------------------------

    @property
    def classes(self) -> Mapping[str, ClassDef]:
        return self._classes

    @property
    def properties(self) -> frozenset[str]:
        return self._properties

    def resolve(self, token: str) -> str:
        """Map a CURIE or IRI onto the declared id it denotes (if any)."""
        if token in self._classes or token in self._properties:
            return token
        try:
            expanded = self.prefixes.expand(token)
        except KeyError:
            return token
        return expanded

    def __contains__(self, token: str) -> bool:
        return self.resolve(token) in self._classes

    def class_id(self, token: str) -> str:
        cid = self.resolve(token)
        if cid not in self._classes:
            raise UnknownClass(token)
        return cid

    def property_id(self, token: str) -> str:
        pid = self.resolve(token)
        if pid not in self._properties:
            raise UnknownProperty(token)
        return pid

    def find_property(self, name: str) -> str:
        """Find a declared property by id or by local name."""
        pid = self.resolve(name)
        if pid in self._properties:
            return pid
        hits = sorted(p for p in self._properties if local_name(p) == name)
        if len(hits) != 1:
            raise UnknownProperty(name)
        return hits[0]

    def find_class(self, name: str) -> str | None:
        cid = self.resolve(name)
        if cid in self._classes:
            return cid
        hits = sorted(c for c in self._classes if local_name(c) == name)
        return hits[0] if len(hits) == 1 else None

    def ancestors(self, cid: str) -> frozenset[str]:
        """Reflexive-transitive superclasses."""
        return self._ancestors[self.class_id(cid)]

    def is_subclass_of(self, sub: str, sup: str) -> bool:
        return self.class_id(sup) in self.ancestors(sub)

    def effective_restrictions(self, cid: str) -> list[Restriction]:
        """Restrictions declared on ``cid`` and all of its ancestors, ancestors
        first."""
        anc = sorted(self.ancestors(cid), key=self._rank.__getitem__)
        out: list[Restriction] = []
        for a in anc:
            out.extend(self._classes[a].restrictions)
        return out

    def in_data_processing_tree(self, cid: str) -> bool:
        """True when ``cid`` descends from a class named ``data-processing``;
        vacuously true if the ontology declares no such root."""
        root = self.find_class(DATA_PROCESSING)
        if root is None:
            return cid in self
        return self.is_subclass_of(cid, root)

    def edges(self) -> set[tuple[str, str]]:
        return {(c.id, p) for c in self._classes.values() for p in c.parents}

    def restriction_set(self) -> set[tuple[str, Restriction]]:
        return {(c.id, r) for c in self._classes.values() for r in c.restrictions}

    def __eq__(self, other) -> bool:
        if not isinstance(other, Ontology):
            return NotImplemented
        return (
            set(self._classes) == set(other._classes)
            and self.edges() == other.edges()
            and self.restriction_set() == other.restriction_set()
            and self._properties == other._properties
        )

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return f"<Ontology classes={len(self._classes)} properties={len(self._properties)}>"


def is_subclass_of(ontology: Ontology, sub: str, sup: str) -> bool:
    return ontology.is_subclass_of(sub, sup)


def effective_restrictions(ontology: Ontology, cid: str) -> list[Restriction]:
    return ontology.effective_restrictions(cid)


def check_filler_consistency(
    ontology: Ontology,
    constraints: Iterable[Restriction],
    fillers: Iterable[tuple[str, str]],
) -> Verdict:
    """Decide whether an individual with exactly ``fillers`` as role fillers
    satisfies ``constraints``.

    A filler ``(p, T)`` counts toward every cardinality constraint on ``p``
    whose qualifier subsumes ``T``.
    """
    bag = Counter((ontology.property_id(p), ontology.class_id(t)) for p, t in fillers)
    violations = []
    for r in constraints:
        prop = ontology.property_id(r.property)
        qual = ontology.class_id(r.qualifier)
        if r.kind is RestrictionKind.ALL_VALUES_FROM:
            bad = sum(n for (p, t), n in bag.items() if p == prop and not ontology.is_subclass_of(t, qual))
            if bad:
                violations.append(Violation(r, bad))
            continue
        count = sum(n for (p, t), n in bag.items() if p == prop and ontology.is_subclass_of(t, qual))
        if count < r.min or (r.max is not None and count > r.max):
            violations.append(Violation(r, count))
    return Verdict(tuple(violations))


# -- native text format ----------------------------------------------------------

@dataclass
class _Draft:
    parents: list[str] = field(default_factory=list)
    restrictions: list[Restriction] = field(default_factory=list)


def load_ontology(text: str, source: str | None = None) -> Ontology:
    prefixes = Prefixes()
    drafts: dict[str, _Draft] = {}
    properties: list[str] = []
    pending: list[tuple[int, str, Restriction]] = []

    def expand(token: str, lineno: int) -> str:
        try:
            return prefixes.expand(token)
        except KeyError as exc:
            raise ParseError(f"unknown prefix {exc.args[0]!r}", lineno, source) from None

    for line in iter_lines(text):
        n = line.number
        if line.text.startswith("@prefix"):
            p, ns = parse_prefix(line.text, n, source)
            prefixes.declare(p, ns)
            continue
        keyword, rest = split_keyword(line.text)
        if keyword == "class":
            head, _, tail = rest.partition(" subClassOf ")
            head = head.strip()
            if not head or " " in head or (tail == "" and "subClassOf" in rest):
                raise ParseError(f"malformed class statement: {line.text!r}", n, source)
            cid = expand(head, n)
            draft = drafts.setdefault(cid, _Draft())
            if tail:
                for tok in tail.split(","):
                    tok = tok.strip()
                    if not tok:
                        raise ParseError("empty parent in subClassOf list", n, source)
                    parent = expand(tok, n)
                    if parent not in draft.parents:
                        draft.parents.append(parent)
        elif keyword == "property":
            if not rest or " " in rest:
                raise ParseError(f"malformed property statement: {line.text!r}", n, source)
            pid = expand(rest, n)
            if pid not in properties:
                properties.append(pid)
        elif keyword == "restrict":
            pending.append((n, *_parse_restriction(rest, n, source, expand)))
        else:
            raise ParseError(f"unknown statement {keyword!r}", n, source)

    for n, owner, r in pending:
        if owner not in drafts:
            raise DanglingRef(f"line {n}: restriction on undeclared class {owner!r}")
        drafts[owner].restrictions.append(r)
        if r.property not in properties:
            properties.append(r.property)

    classes = [ClassDef(cid, frozenset(d.parents), tuple(d.restrictions)) for cid, d in drafts.items()]
    return Ontology(classes, properties, prefixes.table)


def _parse_restriction(rest, n, source, expand) -> tuple[str, Restriction]:
    toks = rest.split()
    if len(toks) == 4 and toks[2] == "only":
        owner, prop, _, qual = toks
        return expand(owner, n), Restriction.only(expand(prop, n), expand(qual, n))
    if len(toks) == 7 and toks[2] == "min" and toks[4] == "max":
        owner, prop, _, lo_s, _, hi_s, qual = toks
        lo, hi = _count(lo_s, n, source), _count(hi_s, n, source)
    elif len(toks) == 5 and toks[2] in ("exactly", "min", "max"):
        owner, prop, bound, num, qual = toks
        k = _count(num, n, source)
        lo, hi = {"exactly": (k, k), "min": (k, None), "max": (0, k)}[bound]
    else:
        raise ParseError(f"malformed restrict statement: {rest!r}", n, source)
    try:
        r = Restriction(expand(prop, n), expand(qual, n), lo, hi)
    except ValueError as exc:
        raise ParseError(str(exc), n, source) from None
    return expand(owner, n), r


def _count(tok: str, n: int, source) -> int:
    if not tok.isdigit():
        raise ParseError(f"cardinality must be a non-negative integer, got {tok!r}", n, source)
    return int(tok)


def serialize_ontology(o: Ontology) -> str:
    c = o.prefixes.compact
    lines = o.prefixes.header_lines()
    for p in sorted(o.properties):
        lines.append(f"property {c(p)}")
    for cid in o.classes:
        cdef = o.classes[cid]
        if cdef.parents:
            parents = ", ".join(c(p) for p in sorted(cdef.parents))
            lines.append(f"class {c(cid)} subClassOf {parents}")
        else:
            lines.append(f"class {c(cid)}")
    for cid, cdef in o.classes.items():
        for r in cdef.restrictions:
            lines.append(f"restrict {c(cid)} {c(r.property)} {r.bound_text()} {c(r.qualifier)}")
    return "\n".join(lines) + "\n"

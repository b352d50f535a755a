"""Profile vs. data-processing class consistency.

A service's ontology-typed inputs and (expanded) outputs are grouped by their
declared class and turned into exact-cardinality axioms on
``has-for-data-at`` / ``has-for-result-at``.  Those axioms describe a
temporary subclass of the profile's ``refers-to`` class; the annotation is
valid when that subclass can satisfy every restriction it inherits.  Since
the axioms are exact counts over named classes, satisfiability reduces to
counting fillers under subsumption (see :func:`check_filler_consistency`).
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

from nlogflow._syntax import is_builtin, local_name
from nlogflow.errors import UnknownClass
from nlogflow.ontology import (
    HAS_FOR_DATA_AT,
    HAS_FOR_RESULT_AT,
    Ontology,
    Restriction,
    Violation,
    check_filler_consistency,
)
from nlogflow.semodel.model import ServiceAnnotation


@dataclass(frozen=True, order=True)
class DerivedAxiom:
    property: str
    qualifier: str
    count: int

    def as_restriction(self) -> Restriction:
        return Restriction.exactly(self.property, self.qualifier, self.count)

    def __str__(self) -> str:
        return f"{local_name(self.property)} exactly {self.count} {local_name(self.qualifier)}"


@dataclass(frozen=True)
class ProfileVerdict:
    tmp_class_name: str
    derived: tuple[DerivedAxiom, ...]
    constraints: tuple[Restriction, ...]
    violations: tuple[Violation, ...] = ()

    @property
    def consistent(self) -> bool:
        return not self.violations


def derive_axioms(
    s: ServiceAnnotation,
    data_property: str = HAS_FOR_DATA_AT,
    result_property: str = HAS_FOR_RESULT_AT,
) -> list[DerivedAxiom]:
    """One exact-cardinality axiom per (direction, declared class) group.

    Builtin-typed parameters (std streams and the composite box) do not
    take part.  Outputs count through their expansions.
    """
    counts: Counter[tuple[str, str]] = Counter()
    for p in s.inputs:
        if not is_builtin(p.parameter_type):
            counts[data_property, p.parameter_type] += 1
    for o in s.outputs:
        produced = o.expands_to if o.expands_to else (o.base,)
        for p in produced:
            if not is_builtin(p.parameter_type):
                counts[result_property, p.parameter_type] += 1
    return sorted(DerivedAxiom(prop, cls, n) for (prop, cls), n in counts.items())


def check_profile(s: ServiceAnnotation, ontology: Ontology) -> ProfileVerdict:
    if s.profile.refers_to is None:
        raise UnknownClass("<no refers-to on profile>")
    target = ontology.class_id(s.profile.refers_to)
    data_at = ontology.find_property(HAS_FOR_DATA_AT)
    result_at = ontology.find_property(HAS_FOR_RESULT_AT)
    derived = derive_axioms(s, data_at, result_at)
    fillers = []
    for ax in derived:
        fillers.extend([(ax.property, ontology.class_id(ax.qualifier))] * ax.count)
    # the temporary subclass inherits everything refers-to (and its ancestors) imposes;
    # it is never added to the ontology
    constraints = tuple(ontology.effective_restrictions(target))
    verdict = check_filler_consistency(ontology, constraints, fillers)
    tmp = f"tmp_{s.profile.name}_{local_name(target)}"
    return ProfileVerdict(tmp, tuple(derived), constraints, verdict.violations)

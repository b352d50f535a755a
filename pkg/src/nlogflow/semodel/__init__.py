from nlogflow.semodel.model import (
    WF,
    Direction,
    Grounding,
    NlogParameter,
    OutputDecl,
    Parameter,
    ParamRef,
    Profile,
    ServiceAnnotation,
    validate_annotation,
)
from nlogflow.semodel.store import (
    IRI,
    Literal,
    TripleStore,
    Var,
    annotations_from_store,
    build_store,
    parse_query,
    query,
)
from nlogflow.semodel.textformat import (
    AnnotationEditor,
    parse_annotation,
    serialize_annotation,
)

__all__ = [
    "WF", "Direction", "Grounding", "NlogParameter", "OutputDecl", "Parameter", "ParamRef",
    "Profile", "ServiceAnnotation", "validate_annotation", "IRI", "Literal", "TripleStore", "Var",
    "annotations_from_store", "build_store", "parse_query", "query", "AnnotationEditor",
    "parse_annotation", "serialize_annotation",
]

"""Read jGASW-style WSDL/XSD documents and derive annotation skeletons.

The generic WSDL-to-OWL-S route grounds the whole response as one opaque
part.  Here the response complexType is flattened and every leaf becomes an
:class:`~nlogflow.semodel.NlogParameter` expansion of the single output.
"""

from __future__ import annotations

import io
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field

from nlogflow._syntax import XSD_ANYURI, XSD_STRING, Prefixes
from nlogflow.errors import (
    AmbiguousOperation,
    DuplicateLeafName,
    MissingOperation,
    RecursiveType,
    UnknownType,
    UnsupportedConstruct,
    XmlError,
)
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

XS = "http://www.w3.org/2001/XMLSchema"
XSD_PRIMITIVES = frozenset(
    "string normalizedString token anyURI boolean decimal integer int long short byte float double "
    "date dateTime time duration base64Binary hexBinary QName nonNegativeInteger positiveInteger".split()
)
_IGNORED = {"annotation", "documentation", "appinfo", "import", "include"}
_UNSUPPORTED = {"choice", "all", "attribute", "attributeGroup", "extension", "restriction", "any",
                "anyAttribute", "group", "simpleContent", "complexContent", "union", "list"}


def _local(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def _parse_xml(text: str) -> tuple[ET.Element, dict[str, str]]:
    """Parse and also collect every prefix -> namespace declaration."""
    nsmap: dict[str, str] = {}
    try:
        root = None
        for event, item in ET.iterparse(io.StringIO(text), events=("start-ns", "start")):
            if event == "start-ns":
                prefix, uri = item
                nsmap.setdefault(prefix, uri)
            elif root is None:
                root = item
    except ET.ParseError as exc:
        raise XmlError(f"not well-formed XML: {exc}") from None
    if root is None:
        raise XmlError("empty document")
    return root, nsmap


def _split_qname(qname: str) -> tuple[str, str]:
    prefix, _, local = qname.rpartition(":")
    return prefix, local


# -- WSDL ------------------------------------------------------------------------

@dataclass(frozen=True)
class WsdlOperation:
    name: str
    input_element: str
    output_element: str
    fault_element: str | None = None


@dataclass(frozen=True)
class WsdlDoc:
    target_ns: str
    operations: tuple[WsdlOperation, ...]
    port_type: str = ""
    endpoint: str = ""
    selected: str = ""

    @property
    def operation(self) -> WsdlOperation:
        for op in self.operations:
            if op.name == self.selected:
                return op
        raise MissingOperation(f"operation {self.selected!r} not found")


def parse_wsdl(text: str, operation: str | None = None) -> WsdlDoc:
    """Extract operations with their message elements resolved.

    With several operations, ``operation`` selects the one to annotate."""
    root, _ = _parse_xml(text)
    messages: dict[str, str] = {}
    for msg in root.iter():
        if _local(msg.tag) != "message":
            continue
        parts = [p for p in msg if _local(p.tag) == "part"]
        if parts:
            ref = parts[0].get("element") or parts[0].get("type") or ""
            messages[msg.get("name", "")] = _split_qname(ref)[1]

    def element_of(ref: str | None) -> str:
        if not ref:
            return ""
        name = _split_qname(ref)[1]
        return messages.get(name, name)

    ops: list[WsdlOperation] = []
    port_type = ""
    for pt in root.iter():
        if _local(pt.tag) != "portType":
            continue
        port_type = port_type or pt.get("name", "")
        for op in pt:
            if _local(op.tag) != "operation":
                continue
            io_ = {_local(c.tag): c.get("message") for c in op}
            ops.append(WsdlOperation(op.get("name", ""), element_of(io_.get("input")),
                                     element_of(io_.get("output")),
                                     element_of(io_.get("fault")) or None))
    if not ops:
        # bare fragment without <definitions>: operations at top level
        for op in root.iter():
            if _local(op.tag) == "operation" and any(_local(c.tag) == "input" for c in op):
                io_ = {_local(c.tag): c.get("message") for c in op}
                ops.append(WsdlOperation(op.get("name", ""), element_of(io_.get("input")),
                                         element_of(io_.get("output")),
                                         element_of(io_.get("fault")) or None))
    if not ops:
        raise MissingOperation("document declares no operation")
    if operation is None:
        if len(ops) > 1:
            names = ", ".join(o.name for o in ops)
            raise AmbiguousOperation(f"several operations ({names}); select one")
        selected = ops[0].name
    else:
        if operation not in {o.name for o in ops}:
            raise MissingOperation(f"no operation named {operation!r}")
        selected = operation

    endpoint = ""
    for addr in root.iter():
        if _local(addr.tag) == "address" and addr.get("location"):
            endpoint = addr.get("location")
            break
    return WsdlDoc(root.get("targetNamespace", ""), tuple(ops), port_type, endpoint, selected)


# -- XSD -------------------------------------------------------------------------

@dataclass(frozen=True)
class XsdElement:
    name: str
    type_name: str  # complexType name, or "xs:<primitive>" for builtins
    nillable: bool = False
    min_occurs: int = 1

    @property
    def is_builtin(self) -> bool:
        return self.type_name.startswith("xs:")


@dataclass
class XsdSchema:
    complex_types: dict[str, list[XsdElement]] = field(default_factory=dict)
    elements: dict[str, str] = field(default_factory=dict)  # top-level element -> type name
    target_ns: str = ""

    def type_of_element(self, name: str) -> str:
        if name in self.elements:
            return self.elements[name]
        if name in self.complex_types:
            return name
        raise UnknownType(name)


def _find_schema(root: ET.Element) -> ET.Element:
    if _local(root.tag) == "schema":
        return root
    for el in root.iter():
        if _local(el.tag) == "schema":
            return el
    return root  # a loose fragment of complexTypes


def parse_xsd(text: str) -> XsdSchema:
    root, nsmap = _parse_xml(text)
    schema_el = _find_schema(root)
    xs_prefixes = {p for p, uri in nsmap.items() if uri == XS} | {"xs", "xsd"}
    schema = XsdSchema(target_ns=schema_el.get("targetNamespace", ""))

    def type_ref(qname: str, where: str) -> str:
        prefix, local = _split_qname(qname)
        if prefix in xs_prefixes and (nsmap.get(prefix, XS) == XS):
            if local not in XSD_PRIMITIVES:
                raise UnsupportedConstruct(f"xs:{local}", where)
            return "xs:" + local
        return local

    def read_complex(ct: ET.Element, name: str) -> None:
        if name in schema.complex_types:
            raise XmlError(f"complexType {name!r} declared twice")
        elems: list[XsdElement] = []
        schema.complex_types[name] = elems
        for child in ct:
            tag = _local(child.tag)
            if tag in _IGNORED:
                continue
            if tag in _UNSUPPORTED:
                raise UnsupportedConstruct(tag, name)
            if tag != "sequence":
                raise UnsupportedConstruct(tag, name)
            for item in child:
                itag = _local(item.tag)
                if itag in _IGNORED:
                    continue
                if itag != "element":
                    raise UnsupportedConstruct(itag, name)
                elems.append(read_element(item, name))

    def read_element(item: ET.Element, owner: str) -> XsdElement:
        ename = item.get("name") or _split_qname(item.get("ref", ""))[1]
        if not ename:
            raise XmlError(f"element without a name in {owner!r}")
        min_occurs = int(item.get("minOccurs", "1"))
        nillable = item.get("nillable", "false") == "true"
        if item.get("type"):
            tname = type_ref(item.get("type"), owner)
        else:
            inline = [c for c in item if _local(c.tag) == "complexType"]
            simple = [c for c in item if _local(c.tag) == "simpleType"]
            if simple:
                raise UnsupportedConstruct("simpleType", owner)
            if inline:
                tname = f"{owner}.{ename}"
                read_complex(inline[0], tname)
            elif item.get("ref"):
                tname = schema.elements.get(ename, ename)
            else:
                tname = "xs:string"
        return XsdElement(ename, tname, nillable, min_occurs)

    for child in schema_el:
        tag = _local(child.tag)
        if tag in _IGNORED:
            continue
        if tag == "complexType":
            read_complex(child, child.get("name", ""))
        elif tag == "element":
            el = read_element(child, child.get("name", ""))
            schema.elements[el.name] = el.type_name
        elif tag in _UNSUPPORTED or tag == "simpleType":
            raise UnsupportedConstruct(tag, "schema")

    for owner, elems in schema.complex_types.items():
        for el in elems:
            if not el.is_builtin and el.type_name not in schema.complex_types:
                raise UnknownType(f"{el.type_name} (element {el.name!r} of {owner!r})")
    return schema


@dataclass(frozen=True)
class LeafField:
    path: tuple[str, ...]
    name: str
    xsd_type: str


def flatten_type(schema: XsdSchema, type_name: str) -> list[LeafField]:
    """Depth-first, document-order leaves of a complexType."""
    if type_name not in schema.complex_types:
        raise UnknownType(type_name)
    leaves: list[LeafField] = []

    def walk(tname: str, path: tuple[str, ...], active: tuple[str, ...]) -> None:
        if tname in active:
            raise RecursiveType(" -> ".join(active + (tname,)))
        for el in schema.complex_types[tname]:
            p = path + (el.name,)
            if el.is_builtin:
                leaves.append(LeafField(p, el.name, el.type_name))
            else:
                walk(el.type_name, p, active + (tname,))

    walk(type_name, (), ())
    seen: dict[str, LeafField] = {}
    for leaf in leaves:
        if leaf.name in seen:
            raise DuplicateLeafName(
                f"leaf {leaf.name!r} occurs at {'/'.join(seen[leaf.name].path)} and {'/'.join(leaf.path)}"
            )
        seen[leaf.name] = leaf
    return leaves


def _builtin_type(xsd_type: str) -> str:
    return XSD_ANYURI if xsd_type == "xs:anyURI" else XSD_STRING


def generate_skeleton(wsdl: WsdlDoc, schema: XsdSchema, service_name: str,
                      profile_name: str | None = None) -> ServiceAnnotation:
    op = wsdl.operation
    in_type = schema.type_of_element(op.input_element)
    out_type = schema.type_of_element(op.output_element)
    in_leaves = flatten_type(schema, in_type)
    out_leaves = flatten_type(schema, out_type)

    inputs = tuple(
        Parameter(ParamRef(service_name, f"input{i}"), Direction.INPUT, _builtin_type(leaf.xsd_type))
        for i, leaf in enumerate(in_leaves, start=1)
    )
    parts = {p.id.param: leaf.name for p, leaf in zip(inputs, in_leaves)}

    # the single "box": the response's only child element, when there is one
    top = schema.complex_types[out_type]
    result_part = top[0].name if len(top) == 1 else op.output_element
    expansions = tuple(
        NlogParameter(ParamRef(service_name, leaf.name), has_id=leaf.name,
                      parameter_type=_builtin_type(leaf.xsd_type))
        for leaf in out_leaves
    )
    output = OutputDecl(Parameter(ParamRef(service_name, "output1"), Direction.OUTPUT, XSD_STRING), expansions)
    grounding = Grounding(
        wsdl_uri=wsdl.endpoint + "?wsdl" if wsdl.endpoint and "?" not in wsdl.endpoint else wsdl.endpoint,
        operation=op.name,
        port_type=wsdl.port_type,
        namespace=wsdl.target_ns or schema.target_ns,
        input_parts=parts,
        output_message_part=result_part,
    )
    profile = Profile(profile_name or service_name, None, tuple(p.id for p in inputs), (output.id,))
    return ServiceAnnotation(service_name, profile, inputs, (output,), grounding, Prefixes())

from __future__ import annotations

import xml.etree.ElementTree as ET

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import NS, XSD, fixture_text
from nlogflow.errors import (
    AmbiguousOperation,
    DuplicateLeafName,
    MissingOperation,
    UnknownType,
    UnsupportedConstruct,
    XmlError,
)
from nlogflow.ingest import flatten_type, generate_skeleton, parse_wsdl, parse_xsd
from nlogflow.semodel import serialize_annotation


@pytest.fixture(scope="module")
def t2_wsdl():
    return parse_wsdl(fixture_text("test2.wsdl"))


@pytest.fixture(scope="module")
def t2_xsd():
    return parse_xsd(fixture_text("test2.xsd"))


def leaves(schema, name):
    return [leaf.name for leaf in flatten_type(schema, name)]


class TestWsdl:
    def test_single_local_operation(self, t2_wsdl):
        (op,) = t2_wsdl.operations
        assert (op.name, op.input_element, op.output_element, op.fault_element) == (
            "local", "local", "localResponse", "SOAPException")
        assert t2_wsdl.target_ns == NS
        assert t2_wsdl.port_type == "jigsawPort"
        assert t2_wsdl.endpoint == "http://localhost:8080/Test2-1.1.1/jigsaw"

    def test_bare_fragment(self):
        (op,) = parse_wsdl(fixture_text("fragment.wsdl")).operations
        assert (op.name, op.input_element, op.output_element) == ("local", "local", "localResponse")

    def test_no_operation(self):
        with pytest.raises(MissingOperation):
            parse_wsdl(fixture_text("no_ops.wsdl"))

    def test_two_operations_need_a_selector(self):
        with pytest.raises(AmbiguousOperation):
            parse_wsdl(fixture_text("two_ops.wsdl"))

    def test_selector_picks_operation(self):
        doc = parse_wsdl(fixture_text("two_ops.wsdl"), "status")
        assert doc.operation.input_element == "status"

    def test_unknown_selector(self):
        with pytest.raises(MissingOperation):
            parse_wsdl(fixture_text("two_ops.wsdl"), "nope")

    def test_not_xml(self):
        with pytest.raises(XmlError):
            parse_wsdl("<definitions>")


class TestXsd:
    def test_composite_types(self, t2_xsd):
        ct = t2_xsd.complex_types
        assert len(ct["local"]) == 2
        assert [(e.name, e.type_name) for e in ct["localResponse"]] == [("localResult", "jigsawOutputTest2111")]
        assert [e.name for e in ct["jigsawOutputTest2111"]] == ["stderr", "stdout", "simpleoutput1", "simpleoutput2"]

    def test_attributes_parsed(self, t2_xsd):
        e = t2_xsd.complex_types["jigsawOutputTest2111"][2]
        assert e.nillable and e.min_occurs == 1
        assert t2_xsd.complex_types["local"][0].min_occurs == 0

    def test_choice_unsupported(self):
        with pytest.raises(UnsupportedConstruct) as info:
            parse_xsd(fixture_text("choice.xsd"))
        assert "choice" in str(info.value)

    @pytest.mark.parametrize("inner", [
        '<xs:attribute name="a" type="xs:string"/>',
        '<xs:complexContent><xs:extension base="X"/></xs:complexContent>',
    ])
    def test_other_unsupported(self, inner):
        text = f'<xs:schema xmlns:xs="http://www.w3.org/2001/XMLSchema"><xs:complexType name="T">{inner}' \
               "</xs:complexType></xs:schema>"
        with pytest.raises(UnsupportedConstruct):
            parse_xsd(text)

    def test_three_levels(self):
        schema = parse_xsd(fixture_text("nested.xsd"))
        assert set(schema.complex_types) == {"A", "B", "C"}

    def test_unresolved_type(self):
        text = ('<xs:schema xmlns:xs="http://www.w3.org/2001/XMLSchema"><xs:complexType name="T"><xs:sequence>'
                '<xs:element name="a" type="tns:Missing"/></xs:sequence></xs:complexType></xs:schema>')
        with pytest.raises(UnknownType):
            parse_xsd(text)


class TestFlatten:
    def test_response_through_wrapper(self, t2_xsd):
        assert leaves(t2_xsd, "localResponse") == ["stderr", "stdout", "simpleoutput1", "simpleoutput2"]

    def test_request(self, t2_xsd):
        assert leaves(t2_xsd, "local") == ["simpleinput1", "simpleinput2"]

    def test_nested_depth_first(self):
        flat = flatten_type(parse_xsd(fixture_text("nested.xsd")), "A")
        assert [f.name for f in flat] == ["x", "y", "z1", "z2", "w"]
        assert flat[2].path == ("b", "c", "z1")
        assert all(f.name == f.path[-1] for f in flat)

    def test_duplicate_leaf(self):
        with pytest.raises(DuplicateLeafName):
            flatten_type(parse_xsd(fixture_text("duplicate_leaf.xsd")), "Outer")

    def test_recursion(self):
        text = ('<xs:schema xmlns:xs="http://www.w3.org/2001/XMLSchema" xmlns:t="urn:t" targetNamespace="urn:t">'
                '<xs:complexType name="N"><xs:sequence><xs:element name="v" type="xs:string"/>'
                '<xs:element name="next" type="t:N"/></xs:sequence></xs:complexType></xs:schema>')
        with pytest.raises(RecursionError):
            flatten_type(parse_xsd(text), "N")

    def test_unknown(self, t2_xsd):
        with pytest.raises(UnknownType):
            flatten_type(t2_xsd, "Nope")


class TestSkeleton:
    def test_two_input_service(self, t2_wsdl, t2_xsd):
        s = generate_skeleton(t2_wsdl, t2_xsd, "ex002", "Test2")
        assert list(s.grounding.input_parts.values()) == ["simpleinput1", "simpleinput2"]
        (out,) = s.outputs
        assert [n.has_id for n in out.expands_to] == ["stderr", "stdout", "simpleoutput1", "simpleoutput2"]
        assert all(n.has_label == "" for n in out.expands_to)
        assert s.grounding.result_element == "localResult"
        assert s.grounding.namespace == NS
        assert s.grounding.operation == "local"
        assert s.grounding.wsdl_uri == "http://localhost:8080/Test2-1.1.1/jigsaw?wsdl"

    def test_test1_service(self):
        s = generate_skeleton(parse_wsdl(fixture_text("test1.wsdl")), parse_xsd(fixture_text("test1.xsd")), "ex001")
        assert list(s.grounding.input_parts.values()) == ["simpleinput"]
        assert [n.has_id for n in s.nlog_parameters()] == ["stderr", "stdout", "simpleoutput"]

    def test_placeholder_types_are_builtin(self, t2_wsdl, t2_xsd):
        s = generate_skeleton(t2_wsdl, t2_xsd, "ex002")
        assert {p.parameter_type for p in s.parameters()} <= {XSD + "string", XSD + "anyURI"}

    def test_deterministic(self, t2_wsdl, t2_xsd):
        a = serialize_annotation(generate_skeleton(t2_wsdl, t2_xsd, "ex002"))
        b = serialize_annotation(generate_skeleton(parse_wsdl(fixture_text("test2.wsdl")),
                                                   parse_xsd(fixture_text("test2.xsd")), "ex002"))
        assert a == b

    def test_minimal(self):
        xsd = ('<xs:schema xmlns:xs="http://www.w3.org/2001/XMLSchema" xmlns:t="urn:m" targetNamespace="urn:m">'
               '<xs:element name="run" type="t:run"/><xs:element name="runResponse" type="t:runResponse"/>'
               '<xs:complexType name="run"><xs:sequence><xs:element name="in" type="xs:string"/></xs:sequence>'
               '</xs:complexType><xs:complexType name="runResponse"><xs:sequence>'
               '<xs:element name="out" type="xs:anyURI"/></xs:sequence></xs:complexType></xs:schema>')
        wsdl = ('<definitions xmlns="http://schemas.xmlsoap.org/wsdl/" xmlns:t="urn:m" targetNamespace="urn:m">'
                '<message name="run"><part name="p" element="t:run"/></message>'
                '<message name="runResponse"><part name="p" element="t:runResponse"/></message>'
                '<portType name="P"><operation name="run"><input message="t:run"/>'
                '<output message="t:runResponse"/></operation></portType></definitions>')
        s = generate_skeleton(parse_wsdl(wsdl), parse_xsd(xsd), "m")
        assert len(s.inputs) == 1 and len(list(s.nlog_parameters())) == 1


# -- generated schemas -------------------------------------------------------------

XS = "http://www.w3.org/2001/XMLSchema"


@st.composite
def schema_trees(draw):
    """A type tree with globally unique leaf names; returns (xsd text, root, expected leaves)."""
    counter = iter(range(10_000))
    types: dict[str, list[tuple[str, str]]] = {}

    def build(depth: int) -> tuple[str, list[str]]:
        name = f"T{next(counter)}"
        children, flat = [], []
        for _ in range(draw(st.integers(1, 3))):
            if depth < 3 and draw(st.booleans()):
                sub, sub_flat = build(depth + 1)
                children.append((f"e{next(counter)}", "t:" + sub))
                flat += sub_flat
            else:
                leaf = f"leaf{next(counter)}"
                children.append((leaf, draw(st.sampled_from(["xs:string", "xs:anyURI"]))))
                flat.append(leaf)
        types[name] = children
        return name, flat

    root, flat = build(0)
    schema = ET.Element(f"{{{XS}}}schema", {"targetNamespace": "urn:t"})
    for name, children in types.items():
        ct = ET.SubElement(schema, f"{{{XS}}}complexType", {"name": name})
        seq = ET.SubElement(ct, f"{{{XS}}}sequence")
        for el, typ in children:
            ET.SubElement(seq, f"{{{XS}}}element", {"name": el, "type": typ})
    ET.register_namespace("xs", XS)
    text = ET.tostring(schema, encoding="unicode").replace("<xs:schema ", '<xs:schema xmlns:t="urn:t" ', 1)
    return text, root, flat


@settings(max_examples=150, deadline=None)
@given(schema_trees())
def test_flatten_matches_tree_walk(case):
    text, root, expected = case
    assert leaves(parse_xsd(text), root) == expected


@settings(max_examples=100, deadline=None)
@given(st.lists(st.from_regex(r"[a-z]{1,8}", fullmatch=True), unique=True, min_size=1, max_size=8))
def test_flat_type_flattens_to_its_elements(names):
    body = "".join(f'<xs:element name="{n}" type="xs:string"/>' for n in names)
    text = f'<xs:schema xmlns:xs="{XS}"><xs:complexType name="T"><xs:sequence>{body}</xs:sequence>' \
           "</xs:complexType></xs:schema>"
    assert leaves(parse_xsd(text), "T") == names

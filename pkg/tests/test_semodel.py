from __future__ import annotations

import dataclasses

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import DP, DS, XSD, fixture_text
from nlogflow.errors import DuplicateService, ParseError, UnknownParameter
from nlogflow.semodel import (
    IRI,
    AnnotationEditor,
    Direction,
    Grounding,
    Literal,
    NlogParameter,
    OutputDecl,
    Parameter,
    ParamRef,
    Profile,
    ServiceAnnotation,
    TripleStore,
    Var,
    annotations_from_store,
    build_store,
    parse_annotation,
    parse_query,
    query,
    serialize_annotation,
    validate_annotation,
)

FOUR_PATTERN = "ex001_output1 nlogExpandsTo ?p . ?p links ?link . ?p hasID ?id . ?p parameterType ?type"


def codes(diags):
    return [d.code for d in diags]


class TestParamRef:
    def test_parse_and_node(self):
        r = ParamRef.parse("ex001.simpleoutput")
        assert (r.service, r.param, r.node, str(r)) == ("ex001", "simpleoutput", "ex001_simpleoutput",
                                                         "ex001.simpleoutput")

    def test_workflow_scope(self):
        assert ParamRef.parse("WF.stdout").is_workflow

    @pytest.mark.parametrize("bad", ["", "nodot", ".x", "x.", "a b.c"])
    def test_rejects(self, bad):
        with pytest.raises(ParseError):
            ParamRef.parse(bad)


class TestTextFormat:
    def test_test1_shape(self, test1):
        assert test1.name == "ex001"
        assert test1.profile.refers_to == DP + "De-noising"
        assert [p.id.param for p in test1.inputs] == ["input1"]
        (out,) = test1.outputs
        assert [n.has_id for n in out.expands_to] == ["stderr", "stdout", "simpleoutput"]
        assert out.expands_to[2].parameter_type == DS + "T1-weighted-MR-dataset"
        assert test1.grounding.input_parts == {"input1": "simpleinput"}
        assert test1.grounding.result_element == "localResult"

    def test_profile_lists_follow_process(self, test2):
        assert test2.profile.has_input == (ParamRef("ex002", "input1"), ParamRef("ex002", "input2"))
        assert test2.profile.has_output == (ParamRef("ex002", "output1"),)

    def test_label_kept(self, test2):
        n = test2.find("simpleoutput1")
        assert n.has_label.startswith("This is the extension")

    @pytest.mark.parametrize("name", ["test1.svc", "test2.svc", "registration.svc"])
    def test_round_trip(self, name):
        a = parse_annotation(fixture_text(name))
        b = parse_annotation(serialize_annotation(a))
        assert a == b
        assert serialize_annotation(b) == serialize_annotation(a)

    @pytest.mark.parametrize("text", [
        "profile\n  name x\n",
        "service a\n\tprofile\n",
        "service a\ninputs\n  input i\n    type zz:Nope\n",
        "service a\noutputs\n  output o\n    expands e\n      colour blue\n",
        "service a\ngrounding\n  part onlyone\n",
    ])
    def test_malformed(self, text):
        with pytest.raises(ParseError):
            parse_annotation(text)

    def test_error_carries_line(self):
        with pytest.raises(ParseError) as info:
            parse_annotation("service a\nbogus section\n", "x.svc")
        assert info.value.line == 2


class TestValidateAnnotation:
    def test_fixtures_are_clean(self, onto, test1, test2):
        assert validate_annotation(test1, onto) == []
        assert validate_annotation(test2, onto) == []

    def test_duplicate_markup(self, onto, test1):
        out = test1.outputs[0]
        exps = list(out.expands_to)
        exps[2] = dataclasses.replace(exps[2], has_id="stdout")
        bad = dataclasses.replace(test1, outputs=(dataclasses.replace(out, expands_to=tuple(exps)),))
        assert "DuplicateMarkup" in codes(validate_annotation(bad, onto))

    def test_undeclared_type(self, onto, test1):
        inp = dataclasses.replace(test1.inputs[0], parameter_type=DS + "Nope")
        bad = dataclasses.replace(test1, inputs=(inp,))
        assert codes(validate_annotation(bad, onto)) == ["UnknownType"]

    def test_refers_to_outside_processing_tree(self, onto, test1):
        bad = dataclasses.replace(test1, profile=dataclasses.replace(test1.profile, refers_to=DS + "Mr-dataset"))
        assert codes(validate_annotation(bad, onto)) == ["NotDataProcessing"]

    def test_missing_refers_to_is_informational(self, onto, test1):
        ok = dataclasses.replace(test1, profile=dataclasses.replace(test1.profile, refers_to=None))
        (d,) = validate_annotation(ok, onto)
        assert d.code == "MissingRefersTo" and not d.is_error

    def test_linked_composite(self, onto, test1):
        out = test1.outputs[0]
        base = dataclasses.replace(out.base, links=(ParamRef("WF", "x"),))
        bad = dataclasses.replace(test1, outputs=(dataclasses.replace(out, base=base),))
        assert "LinkedComposite" in codes(validate_annotation(bad, onto))

    def test_input_without_part(self, onto, test2):
        g = dataclasses.replace(test2.grounding, input_parts={"input1": "simpleinput1"})
        assert "MissingPart" in codes(validate_annotation(dataclasses.replace(test2, grounding=g), onto))


class TestEditor:
    def test_set_type_touches_one_line(self):
        text = fixture_text("test2.svc")
        ed = AnnotationEditor(text)
        ed.set_type("simpleoutput2", DS + "Mr-dataset")
        before, after = text.splitlines(), ed.text.splitlines()
        changed = [i for i, (a, b) in enumerate(zip(before, after)) if a != b]
        assert len(before) == len(after) and len(changed) == 1
        assert after[changed[0]].strip() == "type ds:Mr-dataset"

    def test_idempotent(self):
        ed = AnnotationEditor(fixture_text("test1.svc"))
        ed.set_refers_to(DP + "Registration")
        ed.add_link("stdout", ParamRef("WF", "stdout"))
        once = ed.text
        ed.set_refers_to(DP + "Registration")
        ed.add_link("stdout", ParamRef("WF", "stdout"))
        assert ed.text == once

    def test_unknown_parameter(self):
        ed = AnnotationEditor(fixture_text("test1.svc"))
        with pytest.raises(UnknownParameter):
            ed.set_type("nope", DS + "Mr-dataset")
        assert ed.text == fixture_text("test1.svc")

    def test_profile_section_created(self):
        text = "service s\ninputs\n  input i\n    type xsd:string\n"
        ed = AnnotationEditor(text)
        ed.set_refers_to(DP + "Registration")
        assert ed.annotation.profile.refers_to == DP + "Registration"
        assert ed.text.endswith(text.split("\n", 1)[1])


# -- store --------------------------------------------------------------------------

def test_empty_store():
    assert len(build_store([])) == 0


def test_duplicate_service(test1):
    with pytest.raises(DuplicateService):
        build_store([test1, test1])


def test_four_expansions_four_triples(test2):
    store = build_store([test2])
    assert len(store.match(IRI("ex002_output1"), IRI("nlogExpandsTo"))) == 4


def test_query_replay(pipeline):
    store = build_store(pipeline.services.values())
    rows = query(store, parse_query(FOUR_PATTERN))
    got = {(r["p"].value, r["link"].value, r["id"].value, r["type"].value) for r in rows}
    assert got == {
        ("ex001_simpleoutput", "ex002_input2", "simpleoutput", DS + "T1-weighted-MR-dataset"),
        ("ex001_stdout", "WF_stdout", "stdout", XSD + "string"),
        ("ex001_stderr", "WF_stderr", "stderr", XSD + "string"),
    }


def test_select_wrapper_and_foreign_prefix(pipeline):
    store = build_store(pipeline.services.values())
    text = ("SELECT ?p ?link ?id ?type WHERE { ex001_output1 p2:nlogExpandsTo ?p . ?p p2:links ?link . "
            "?p p2:hasID ?id . ?p p2:parameterType ?type }")
    assert query(store, parse_query(text)) == query(store, parse_query(FOUR_PATTERN))


def test_literal_pattern(test1):
    rows = query(build_store([test1]), parse_query('?s hasID "stdout"'))
    assert rows == [{"s": IRI("ex001_stdout")}]


def test_unbound_predicate_on_empty_store():
    assert query(TripleStore(), [(Var("s"), Var("p"), Var("o"))]) == []


def test_zero_patterns_one_empty_binding(test1):
    assert query(build_store([test1]), []) == [{}]


def test_results_sorted_and_deterministic(pipeline):
    store = build_store(pipeline.services.values())
    rows = query(store, parse_query("?p hasID ?id"))
    keys = [(r["p"], r["id"]) for r in rows]
    assert keys == sorted(keys)
    assert rows == query(store, parse_query("?p hasID ?id"))


def test_bad_query():
    with pytest.raises(ParseError):
        parse_query("?a hasID")


def test_store_round_trip(pipeline):
    services = list(pipeline.services.values())
    back = {s.name: s for s in annotations_from_store(build_store(services))}
    for s in services:
        assert _normalized(back[s.name]) == _normalized(s)


def _normalized(s: ServiceAnnotation) -> ServiceAnnotation:
    def sort_links(p):
        return dataclasses.replace(p, links=tuple(sorted(p.links)))

    outputs = tuple(OutputDecl(sort_links(o.base), tuple(sort_links(n) for n in o.expands_to)) for o in s.outputs)
    return dataclasses.replace(s, inputs=tuple(sort_links(p) for p in s.inputs), outputs=outputs)


# -- generated annotations -------------------------------------------------------------

names = st.from_regex(r"[a-z][a-z0-9]{0,6}", fullmatch=True)
types = st.sampled_from([XSD + "string", XSD + "anyURI", DS + "Mr-dataset", DS + "T1-weighted-MR-dataset"])


@st.composite
def annotations(draw):
    svc = draw(names)
    in_ids = draw(st.lists(names, unique=True, max_size=4))
    out_ids = draw(st.lists(names.filter(lambda n: n not in in_ids), unique=True, min_size=1, max_size=2))
    used = set(in_ids) | set(out_ids)
    refs = st.builds(ParamRef, st.sampled_from(["WF", "other"]), names)
    inputs = tuple(Parameter(ParamRef(svc, i), Direction.INPUT, draw(types)) for i in in_ids)
    outputs = []
    for o in out_ids:
        exp_ids = draw(st.lists(names.filter(lambda n: n not in used), unique=True, max_size=4))
        used |= set(exp_ids)
        exps = tuple(NlogParameter(ParamRef(svc, e), e, draw(st.sampled_from(["", "a label"])), draw(types),
                                   tuple(draw(st.lists(refs, unique=True, max_size=2))))
                     for e in exp_ids)
        outputs.append(OutputDecl(Parameter(ParamRef(svc, o), Direction.OUTPUT, XSD + "string"), exps))
    profile = Profile(draw(names), draw(st.sampled_from([None, DP + "Registration"])),
                      tuple(p.id for p in inputs), tuple(o.id for o in outputs))
    grounding = Grounding("http://h/x?wsdl", "local", "jigsawPort", "http://i3s.cnrs.fr/jigsaw",
                          {i: f"simple{i}" for i in in_ids}, "localResult")
    return ServiceAnnotation(svc, profile, inputs, tuple(outputs), grounding)


@settings(max_examples=150, deadline=None)
@given(annotations())
def test_generated_text_round_trip(s):
    again = parse_annotation(serialize_annotation(s))
    assert again == s


@settings(max_examples=150, deadline=None)
@given(annotations())
def test_generated_store_round_trip(s):
    (back,) = annotations_from_store(build_store([s]))
    assert _normalized(back) == _normalized(s)


@settings(max_examples=150, deadline=None)
@given(annotations())
def test_expansion_count_matches_triples(s):
    store = build_store([s])
    for o in s.outputs:
        assert len(store.match(IRI(o.id.node), IRI("nlogExpandsTo"))) == len(o.expands_to)


@settings(max_examples=150, deadline=None)
@given(annotations(), st.lists(st.sampled_from(["hasID", "links", "parameterType", "type", "hasLabel"]),
                               min_size=1, max_size=4))
def test_adding_a_pattern_never_grows_results(s, preds):
    # counted on the variables bound before the pattern was added
    store = build_store([s])
    patterns, bound = [], []
    rows = query(store, patterns)
    for i, p in enumerate(preds):
        before = {tuple(r[k] for k in bound) for r in rows}
        patterns.append((Var("x"), IRI(p), Var(f"v{i}")))
        rows = query(store, patterns)
        after = {tuple(r[k] for k in bound) for r in rows}
        assert after <= before
        bound = ["x"] + [f"v{j}" for j in range(i + 1)]


def test_literal_and_iri_are_distinct_terms():
    store = TripleStore()
    store.add((IRI("a"), IRI("p"), Literal("b")))
    assert query(store, [(IRI("a"), IRI("p"), IRI("b"))]) == []

from __future__ import annotations

import shutil
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import DS, FIXTURES, XSD
from oracles import closure, taxonomy_text
from nlogflow.composer import (
    LinkKind,
    check_link,
    derive_workflow_signature,
    load_workflow,
    parse_workflow,
    serialize_workflow,
    topo_order,
    validate_workflow,
)
from nlogflow.errors import CycleError, ParseError, UnknownType
from nlogflow.ontology import load_ontology
from nlogflow.semodel import ParamRef

MR, T1, T2 = DS + "Mr-dataset", DS + "T1-weighted-MR-dataset", DS + "T2-weighted-MR-dataset"


def variant(tmp_path: Path, wf_edit=None, svc_edits=None) -> Path:
    """Copy the two-service fixture into tmp_path, applying text edits."""
    for name in ("test1.svc", "test2.svc", "pipeline.wf"):
        shutil.copy(FIXTURES / name, tmp_path / name)
    for name, (old, new) in (svc_edits or {}).items():
        p = tmp_path / name
        text = p.read_text()
        assert old in text, old
        p.write_text(text.replace(old, new, 1))
    wf = tmp_path / "pipeline.wf"
    if wf_edit:
        wf.write_text(wf_edit(wf.read_text()))
    return wf


def codes(report):
    return [d.code for d in report.diagnostics if d.is_error]


def drop_line(fragment):
    return lambda text: "".join(ln for ln in text.splitlines(keepends=True) if fragment not in ln)


class TestCheckLink:
    def test_identical(self, onto):
        v = check_link(onto, MR, MR)
        assert v.kind is LinkKind.IDENTICAL and v.accepted

    def test_narrower_source_accepted(self, onto):
        v = check_link(onto, T1, MR)
        assert v.kind is LinkKind.SOURCE_NARROWER and v.accepted

    def test_broader_source_rejected(self, onto):
        v = check_link(onto, MR, T1)
        assert v.kind is LinkKind.SOURCE_BROADER and not v.accepted

    def test_siblings_incomparable(self, onto):
        v = check_link(onto, T1, T2)
        assert v.kind is LinkKind.INCOMPARABLE and not v.accepted

    def test_builtins_exact_only(self, onto):
        assert check_link(onto, XSD + "string", XSD + "string").accepted
        assert not check_link(onto, XSD + "anyURI", XSD + "string").accepted
        assert not check_link(onto, XSD + "string", MR).accepted

    def test_unknown_type(self, onto):
        with pytest.raises(UnknownType):
            check_link(onto, DS + "Nope", MR)


class TestValidate:
    def test_pipeline_valid(self, onto, pipeline):
        r = validate_workflow(pipeline, onto)
        assert r.valid, r.diagnostics
        assert len(r.link_verdicts) == 9

    def test_removed_internal_link(self, onto, tmp_path):
        w = load_workflow(variant(tmp_path, drop_line("-> ex002.input2")))
        r = validate_workflow(w, onto)
        assert not r.valid and "UnboundInput" in codes(r)
        assert any(d.subject == "ex002.input2" for d in r.diagnostics)

    def test_reversed_types_on_internal_link(self, onto, tmp_path):
        edits = {
            "test1.svc": ("      label denoised image\n      type ds:T1-weighted-MR-dataset",
                          "      label denoised image\n      type ds:Mr-dataset"),
            "test2.svc": ("  input input2\n    type ds:Mr-dataset", "  input input2\n    type ds:T1-weighted-MR-dataset"),
        }
        w = load_workflow(variant(tmp_path, svc_edits=edits))
        r = validate_workflow(w, onto)
        assert not r.valid
        (d,) = [d for d in r.diagnostics if d.code == "SourceBroader"]
        assert d.subject == "ex001.simpleoutput -> ex002.input2"
        expected = check_link(onto, MR, T1)
        assert [v for s, t, v in r.link_verdicts if t == ParamRef("ex002", "input2")] == [expected]

    def test_fan_in_rejected(self, onto, tmp_path):
        w = load_workflow(variant(tmp_path, lambda t: t + "link WF.input1 -> ex002.input2\n"))
        assert "MultiplyBoundInput" in codes(validate_workflow(w, onto))

    def test_unbound_workflow_output(self, onto, tmp_path):
        w = load_workflow(variant(tmp_path, drop_line("-> WF.stdout2")))
        assert codes(validate_workflow(w, onto)) == ["UnboundOutput"]

    def test_unknown_endpoint(self, onto, tmp_path):
        w = load_workflow(variant(tmp_path, lambda t: t + "link ex001.nothing -> WF.stdout\n"))
        assert "UnknownParameter" in codes(validate_workflow(w, onto))

    def test_linking_the_composite_box(self, onto, tmp_path):
        w = load_workflow(variant(tmp_path, lambda t: t.replace("ex001.simpleoutput ->", "ex001.output1 ->")))
        assert "LinkedComposite" in codes(validate_workflow(w, onto))

    def test_input_as_source(self, onto, tmp_path):
        w = load_workflow(variant(tmp_path, lambda t: t + "output extra ds:Mr-dataset\nlink ex001.input1 -> WF.extra\n"))
        assert "BadLinkSource" in codes(validate_workflow(w, onto))

    def test_cycle(self, onto, tmp_path):
        def edit(text):
            text = text.replace("link WF.input1 -> ex001.input1", "link ex002.simpleoutput1 -> ex001.input1")
            return text.replace("link ex002.simpleoutput1 -> WF.simpleoutput1\n", "")
        w = load_workflow(variant(tmp_path, edit))
        r = validate_workflow(w, onto)
        assert "Cycle" in codes(r)
        with pytest.raises(CycleError):
            topo_order(w)

    def test_unlinked_expansion_is_info_only(self, onto, tmp_path):
        w = load_workflow(variant(tmp_path, lambda t: drop_line("simpleoutput2")(t)))
        r = validate_workflow(w, onto)
        assert r.valid
        assert [d.code for d in r.diagnostics] == ["UnlinkedParameter"]

    def test_mixed_fan_out_flagged(self, onto, tmp_path):
        w = load_workflow(variant(tmp_path, lambda t: t + "output copy ds:Mr-dataset\n"
                                                          "link ex001.simpleoutput -> WF.copy\n"))
        r = validate_workflow(w, onto)
        assert r.valid and "MixedFanOut" in [d.code for d in r.diagnostics]


class TestOrderAndSignature:
    def test_pipeline_order(self, pipeline):
        assert topo_order(pipeline) == ["ex001", "ex002"]

    def test_independent_services_by_name(self, tmp_path):
        text = "workflow w\nservice b = test1.svc\nservice a = test2.svc\n"
        variant(tmp_path)
        w = parse_workflow(text, tmp_path)
        assert topo_order(w) == ["a", "b"]

    def test_single_service(self, tmp_path):
        variant(tmp_path)
        assert topo_order(parse_workflow("workflow w\nservice only = test1.svc\n", tmp_path)) == ["only"]

    def test_signature(self, pipeline):
        sig = derive_workflow_signature(pipeline)
        assert [str(r) for r in sig.has_input] == ["WF.input1", "WF.input2"]
        assert len(sig.has_output) == 6

    def test_empty_signature(self):
        sig = derive_workflow_signature(parse_workflow("workflow empty\n"))
        assert sig.has_input == () and sig.has_output == ()

    def test_every_edge_respected(self, pipeline):
        order = topo_order(pipeline)
        for a, b in pipeline.service_edges():
            assert order.index(a) < order.index(b)


class TestFormat:
    def test_round_trip(self, pipeline):
        again = parse_workflow(serialize_workflow(pipeline), FIXTURES)
        assert again == pipeline
        assert serialize_workflow(again) == serialize_workflow(pipeline)

    def test_local_names_rename_services(self, pipeline):
        assert set(pipeline.services) == {"ex001", "ex002"}
        assert all(p.id.service == "ex002" for p in pipeline.services["ex002"].parameters())

    @pytest.mark.parametrize("text", [
        "service a = x.svc\n",
        "workflow w\nlink a.b c.d\n",
        "workflow w\ninput x\n",
        "workflow w\nfrobnicate\n",
        "workflow w\nworkflow v\n",
        "workflow w\nservice a = missing.svc\n",
    ])
    def test_malformed(self, text, tmp_path):
        with pytest.raises(ParseError):
            parse_workflow(text, tmp_path)

    def test_each_single_link_deletion_invalidates(self, onto, pipeline):
        lines = (FIXTURES / "pipeline.wf").read_text().splitlines(keepends=True)
        link_lines = [i for i, ln in enumerate(lines) if ln.startswith("link ")]
        for i in link_lines:
            w = parse_workflow("".join(lines[:i] + lines[i + 1:]), FIXTURES)
            assert not validate_workflow(w, onto).valid, lines[i]


# -- verdict properties on generated taxonomies ------------------------------------------

@st.composite
def dags(draw):
    n = draw(st.integers(1, 12))
    parents = {}
    for i in range(n):
        earlier = [f"c{j}" for j in range(i)]
        parents[f"c{i}"] = draw(st.lists(st.sampled_from(earlier), unique=True, max_size=2)) if earlier else []
    return parents


@settings(max_examples=100, deadline=None)
@given(dags())
def test_verdict_kinds_partition_pairs(parents):
    o = load_ontology(taxonomy_text(parents))
    rel = closure(o.classes, o.edges())
    for a in o.classes:
        assert check_link(o, a, a).kind is LinkKind.IDENTICAL
        for b in o.classes:
            if a == b:
                continue
            ab, ba = check_link(o, a, b).kind, check_link(o, b, a).kind
            assert (ab is LinkKind.SOURCE_NARROWER) == (ba is LinkKind.SOURCE_BROADER)
            expected = (LinkKind.SOURCE_NARROWER if (a, b) in rel
                        else LinkKind.SOURCE_BROADER if (b, a) in rel else LinkKind.INCOMPARABLE)
            assert ab is expected

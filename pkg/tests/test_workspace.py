from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from statbridge.dsfile import dumps, loads
from statbridge.errors import DatasetFormatError, WorkspaceError
from statbridge.storage import StorageType, encode_missing
from statbridge.workspace import Variable, Workspace


def test_create_variable_fills_generic_missing(ws):
    ws.set_obs(3)
    v = ws.create_variable("x", StorageType.INT)
    assert list(v.data) == [encode_missing(0, StorageType.INT)] * 3


def test_set_obs_pads_every_column(ws):
    ws.set_obs(2)
    ws.create_variable("a", StorageType.BYTE)
    ws.create_variable("s", StorageType.STR)
    ws.set_obs(5)
    assert all(len(v) == 5 for v in ws.dataset.variables)
    assert ws.dataset.get("s").data[-1] == ""


def test_set_obs_cannot_shrink(ws):
    ws.set_obs(4)
    ws.create_variable("a", StorageType.BYTE)
    with pytest.raises(WorkspaceError, match="cannot reduce"):
        ws.set_obs(2)


def test_duplicate_and_invalid_names(ws):
    ws.create_variable("a", StorageType.BYTE)
    with pytest.raises(WorkspaceError, match="already defined"):
        ws.create_variable("a", StorageType.INT)
    with pytest.raises(WorkspaceError, match="invalid name"):
        ws.create_variable("1bad", StorageType.INT)


def test_expand_varlist_ranges_and_wildcards(ws):
    for n in ["x1", "x2", "x3", "y"]:
        ws.create_variable(n, StorageType.DOUBLE)
    ds = ws.dataset
    assert ds.expand_varlist("x1-x3") == ["x1", "x2", "x3"]
    assert ds.expand_varlist("x*") == ["x1", "x2", "x3"]
    assert ds.expand_varlist("y x?") == ["y", "x1", "x2", "x3"]
    assert ds.expand_varlist(None) == ["x1", "x2", "x3", "y"]
    with pytest.raises(WorkspaceError):
        ds.expand_varlist("z")


def test_labels_only_on_integer_variables(ws):
    ws.create_variable("f", StorageType.FLOAT)
    ws.define_labels("yn", {0: "no", 1: "yes"})
    with pytest.raises(WorkspaceError, match="integer types only"):
        ws.attach_labels("f", "yn")


def test_lookup_label_falls_back_to_code(ws):
    ws.set_obs(1)
    ws.create_variable("b", StorageType.BYTE)
    ws.define_labels("yn", {0: "no"})
    ws.attach_labels("b", "yn")
    assert ws.lookup_label("b", 0) == "no"
    assert ws.lookup_label("b", 7) == "7"


def test_promote_copies_only_marked_names(ws):
    child = ws.push_frame()
    ws.set_local("keep", "1")
    ws.set_local("drop", "2")
    child.mark_for_promotion("keep")
    ws.promote()
    assert ws.get_local("keep") == "1"
    assert ws.get_local("drop") is None


def test_get_local_sees_only_current_frame(ws):
    ws.set_local("a", "outer")
    ws.push_frame()
    assert ws.get_local("a") is None


def test_transfer_lock_blocks_mutation(ws):
    ws.begin_transfer()
    with pytest.raises(WorkspaceError, match="locked"):
        ws.set_obs(3)
    ws.end_transfer()
    ws.set_obs(3)


def test_matrix_dimensions_validated(ws):
    with pytest.raises(WorkspaceError):
        ws.define_object("matrix", "M", (0, 2))
    ws.define_object("matrix", "M", (2, 3))
    assert ws.matrix("M").data.shape == (2, 3)


def test_store_load_round_trip(ws, tmp_path):
    ws.set_obs(3)
    ws.add_variable(Variable("b", StorageType.BYTE, np.array([1, encode_missing(5, StorageType.BYTE), -3], dtype=np.int8)))
    ws.add_variable(Variable("s", StorageType.STRL, ["a", "\xff\x00", ""], binary=np.array([False, True, False])))
    ws.define_labels("t", {1: "one"})
    ws.attach_labels("b", "t")
    ws.store(tmp_path / "d.stbd")
    assert not ws.dirty
    other = Workspace()
    other.load(tmp_path / "d.stbd")
    assert other.dataset.names() == ["b", "s"]
    assert list(other.dataset.get("b").data) == list(ws.dataset.get("b").data)
    assert other.dataset.get("s").data == ["a", "\xff\x00", ""]
    assert list(other.dataset.get("s").binary) == [False, True, False]
    assert other.label_tables["t"].mapping == {1: "one"}


def test_loads_rejects_garbage():
    with pytest.raises(DatasetFormatError):
        loads(b"nope")


_F32_BOUND = float(np.float32(1e30))
_numeric = st.sampled_from([StorageType.BYTE, StorageType.INT, StorageType.LONG, StorageType.FLOAT, StorageType.DOUBLE])


@st.composite
def datasets(draw):
    nobs = draw(st.integers(0, 12))
    ws = Workspace()
    ws.set_obs(nobs)
    nvars = draw(st.integers(0, 4))
    for j in range(nvars):
        if draw(st.booleans()):
            stype = draw(_numeric)
            if stype.is_integer:
                ints = st.integers(int(stype.valid_min), int(stype.valid_max))
                vals = draw(st.lists(ints, min_size=nobs, max_size=nobs))
            else:
                vals = draw(st.lists(st.floats(-_F32_BOUND, _F32_BOUND, width=32), min_size=nobs, max_size=nobs))
            data = np.array(vals, dtype=stype.dtype)
            codes = draw(st.lists(st.integers(-1, 26), min_size=nobs, max_size=nobs))
            for i, k in enumerate(codes):
                if k >= 0:
                    data[i] = encode_missing(k, stype)
            ws.add_variable(Variable(f"v{j}", stype, data))
        else:
            texts = draw(st.lists(st.text(max_size=6), min_size=nobs, max_size=nobs))
            ws.add_variable(Variable(f"v{j}", StorageType.STR, texts))
    return ws


@settings(max_examples=150, deadline=None)
@given(datasets())
def test_store_load_is_identity(w):
    ds, labels = loads(dumps(w.dataset, w.label_tables))
    assert ds.nobs == w.dataset.nobs
    assert ds.names() == w.dataset.names()
    for a, b in zip(ds.variables, w.dataset.variables):
        assert a.stype is b.stype
        if a.stype.is_string:
            assert a.data == b.data
        else:
            assert np.asarray(a.data).tobytes() == np.asarray(b.data).tobytes()


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.sampled_from(["obs", "var"]), st.integers(0, 20)), max_size=12))
def test_column_lengths_track_nobs(ops):
    w = Workspace()
    for k, (op, n) in enumerate(ops):
        if op == "obs" and n >= w.dataset.nobs:
            w.set_obs(n)
        elif op == "var":
            w.create_variable(f"v{k}", StorageType.INT if n % 2 else StorageType.STR)
        assert all(len(v) == w.dataset.nobs for v in w.dataset.variables)


@settings(max_examples=100, deadline=None)
@given(
    st.dictionaries(st.from_regex(r"[a-z]{1,4}", fullmatch=True), st.text(max_size=5), max_size=6),
    st.data(),
)
def test_promote_keeps_exactly_marked_names(child_locals, data):
    w = Workspace()
    w.set_local("pre", "existing")
    frame = w.push_frame()
    for k, v in child_locals.items():
        w.set_local(k, v)
    marked = data.draw(st.lists(st.sampled_from(sorted(child_locals)), unique=True) if child_locals else st.just([]))
    for k in marked:
        frame.mark_for_promotion(k)
    w.promote()
    parent = w.frame.locals
    for k in child_locals:
        if k in marked:
            assert parent[k] == child_locals[k]
        elif k != "pre":
            assert k not in parent

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from statbridge import bridge
from statbridge.bridge import CopyOptions, map_type
from statbridge.errors import BridgeError
from statbridge.fixtures import mixed_dataset
from statbridge.gate import SampleRestriction
from statbridge.guest.values import GuestBase, GuestColumnType, GuestDataFrame, GuestMatrix, GuestVector
from statbridge.storage import NUMERIC_TYPES, StorageType, decode_missing, encode_missing
from statbridge.workspace import Variable, Workspace

_INTS = [StorageType.BYTE, StorageType.INT, StorageType.LONG]


def _vec(values, base: GuestBase, mask=None) -> GuestVector:
    return GuestVector(np.array(values, dtype=base.dtype), GuestColumnType(base, mask is not None), mask)


def _frame_equal(a: GuestDataFrame, b: GuestDataFrame) -> bool:
    return a.same_as(b)


def test_auto_types_map_to_listing(auto_ws):
    guest = {}
    bridge.save_df(auto_ws, guest, "auto")
    df = guest["auto"]
    assert [df.columns[n].ctype.name for n in df.names()] == [
        "Int16?", "Int16?", "Float32?", "Int16?", "Categorical?"
    ]
    assert df.columns["foreign"].levels == ("Domestic", "Foreign")


def test_map_type_directions():
    assert map_type("host->guest", StorageType.BYTE).name == "Int8?"
    assert map_type("host->guest", StorageType.BYTE, labeled=True).name == "Categorical?"
    assert map_type("guest->host", GuestBase.I8) is StorageType.INT
    assert map_type("guest->host", GuestBase.I16) is StorageType.LONG
    assert map_type("guest->host", GuestBase.F32, (0.0, 2e38)) is StorageType.DOUBLE
    assert map_type("guest->host", GuestBase.F32, (0.0, 1.0)) is StorageType.FLOAT
    with pytest.raises(BridgeError):
        map_type("sideways", StorageType.BYTE)


def test_i8_lands_in_int_and_i16_max_in_long(ws):
    ws.set_obs(2)
    guest = {"df": GuestDataFrame({"a": _vec([-128, 127], GuestBase.I8), "b": _vec([32767, -1], GuestBase.I16)})}
    bridge.get_vars_from_df(ws, guest)
    assert ws.dataset.get("a").stype is StorageType.INT
    assert ws.dataset.get("b").stype is StorageType.LONG
    assert list(ws.dataset.get("b").data) == [32767, -1]


def test_string_empty_is_missing(ws):
    ws.set_obs(3)
    ws.add_variable(Variable("s", StorageType.STR, ["a", "", "c"]))
    guest = {}
    bridge.put_vars_to_df(ws, guest)
    assert guest["df"].columns["s"].missing_mask().tolist() == [False, True, False]


def test_unlabeled_codes_become_text_levels(ws):
    ws.set_obs(3)
    ws.add_variable(Variable("g", StorageType.BYTE, np.array([1, 2, 9], dtype=np.int8)))
    ws.define_labels("g", {1: "one", 2: "two"})
    ws.attach_labels("g", "g")
    guest = {}
    bridge.put_vars_to_df(ws, guest)
    assert guest["df"].columns["g"].values() == ["one", "two", "9"]
    guest2 = {}
    bridge.put_vars_to_df(ws, guest2, opts=CopyOptions(nolabel=True))
    assert guest2["df"].columns["g"].ctype.base is GuestBase.I8


def test_categorical_comes_back_as_labeled_codes(auto_ws):
    guest = {}
    bridge.save_df(auto_ws, guest, "auto")
    target = Workspace()
    bridge.use_df(target, guest, "auto")
    foreign = target.dataset.get("foreign")
    assert foreign.stype is StorageType.INT
    assert target.lookup_label("foreign", int(foreign.data[0])) == "Domestic"
    assert target.lookup_label("foreign", int(foreign.data[-1])) == "Foreign"


def test_get_vars_errors_leave_dataset_alone(ws):
    ws.set_obs(2)
    ws.add_variable(Variable("x", StorageType.DOUBLE, np.array([1.0, 2.0])))
    ws.add_variable(Variable("s", StorageType.STR, ["p", "q"]))
    before = ws.dataset.get("x").data.copy()
    with pytest.raises(BridgeError, match="already defined"):
        bridge.get_vars_from_df(ws, {"df": GuestDataFrame({"x": _vec([5.0, 6.0], GuestBase.F64)})})
    bad = GuestDataFrame({"x": _vec([5.0, 6.0], GuestBase.F64), "s": _vec([1.0, 2.0], GuestBase.F64)})
    with pytest.raises(BridgeError, match="type mismatch"):
        bridge.get_vars_from_df(ws, {"df": bad}, opts=CopyOptions(replace=True))
    assert np.array_equal(ws.dataset.get("x").data, before)
    with pytest.raises(BridgeError, match="rows"):
        bridge.get_vars_from_df(ws, {"df": GuestDataFrame({"y": _vec([1.0, 2.0, 3.0], GuestBase.F64)})})
    with pytest.raises(BridgeError, match="not found"):
        bridge.get_vars_from_df(ws, {"df": GuestDataFrame({"y": _vec([1.0], GuestBase.F64)})}, ["y"], opts=CopyOptions(cols=["z"]))
    assert ws.dataset.names() == ["x", "s"]


def test_replace_promotes_storage(ws):
    ws.set_obs(2)
    ws.add_variable(Variable("x", StorageType.BYTE, np.array([1, 2], dtype=np.int8)))
    guest = {"df": GuestDataFrame({"x": _vec([1000, 2000], GuestBase.I16)})}
    bridge.get_vars_from_df(ws, guest, opts=CopyOptions(replace=True))
    assert ws.dataset.get("x").stype is StorageType.LONG
    assert list(ws.dataset.get("x").data) == [1000, 2000]


def test_use_requires_clear_when_dirty(auto_ws):
    guest = {"df": GuestDataFrame({"y": _vec([1.0], GuestBase.F64)})}
    auto_ws.dirty = True
    with pytest.raises(BridgeError, match="would be lost"):
        bridge.use_df(auto_ws, guest)
    assert auto_ws.dataset.nobs == 74
    bridge.use_df(auto_ws, guest, opts=CopyOptions(clear=True))
    assert auto_ws.dataset.names() == ["y"]


def test_save_empty_dataset_errors(ws):
    with pytest.raises(BridgeError, match="no variables"):
        bridge.save_df(ws, {})


def test_matrix_transfers(ws):
    ws.set_obs(3)
    ws.add_variable(Variable("a", StorageType.INT, np.array([1, 2, 3], dtype=np.int16)))
    guest = {}
    bridge.put_vars_to_mat(ws, guest, None, None, CopyOptions(destination="A"))
    assert guest["A"].data.tolist() == [[1.0], [2.0], [3.0]]
    guest["B"] = GuestMatrix(np.arange(6, dtype=np.float64).reshape(3, 2))
    bridge.get_mat_from_mat(ws, guest, "B")
    assert ws.matrix("B").data.shape == (3, 2)
    bridge.put_mat_to_mat(ws, guest, "B", CopyOptions(destination="C"))
    assert np.array_equal(guest["C"].data, ws.matrix("B").data)
    with pytest.raises(BridgeError, match="source"):
        bridge.get_vars_from_mat(ws, guest, ["p", "q"])
    bridge.get_vars_from_mat(ws, guest, ["p", "q"], opts=CopyOptions(source="B"))
    assert list(ws.dataset.get("q").data) == [1.0, 3.0, 5.0]


def test_f32_out_of_range_goes_to_double(ws):
    ws.set_obs(2)
    big = float(np.float32(3e38))
    guest = {"df": GuestDataFrame({"f": _vec([1.0, big], GuestBase.F32), "g": _vec([1.0, 2.0], GuestBase.F32)})}
    bridge.get_vars_from_df(ws, guest)
    assert ws.dataset.get("f").stype is StorageType.DOUBLE
    assert ws.dataset.get("f").data[1] == big
    assert ws.dataset.get("g").stype is StorageType.FLOAT


def test_transfer_lock_released_after_error(ws):
    ws.set_obs(1)
    ws.add_variable(Variable("s", StorageType.STR, ["x"]))
    with pytest.raises(BridgeError):
        bridge.put_vars_to_mat(ws, {}, None, None, CopyOptions(destination="M"))
    ws.set_obs(2)


# -- properties ------------------------------------------------------------------


def _bounded(stype: StorageType):
    if stype.is_integer:
        return st.integers(int(stype.valid_min), int(stype.valid_max))
    bound = float(np.float32(1e30))
    return st.floats(-bound, bound, width=32 if stype is StorageType.FLOAT else 64)


@st.composite
def clean_datasets(draw, min_obs: int = 1):
    nobs = draw(st.integers(min_obs, 15))
    w = Workspace()
    w.set_obs(nobs)
    for j, stype in enumerate(draw(st.lists(st.sampled_from(NUMERIC_TYPES), min_size=1, max_size=5))):
        vals = draw(st.lists(_bounded(stype), min_size=nobs, max_size=nobs))
        w.add_variable(Variable(f"v{j}", stype, np.array(vals, dtype=stype.dtype)))
    return w


@settings(max_examples=120, deadline=None)
@given(clean_datasets())
def test_save_use_round_trip_fidelity(w):
    guest = {}
    bridge.save_df(w, guest, "d")
    back = Workspace()
    bridge.use_df(back, guest, "d")
    for a, b in zip(w.dataset.variables, back.dataset.variables):
        assert b.stype is bridge.GUEST_TO_HOST[bridge.HOST_TO_GUEST[a.stype]]
        assert np.array_equal(a.data.astype(np.float64), b.data.astype(np.float64))


@settings(max_examples=120, deadline=None)
@given(st.sampled_from(NUMERIC_TYPES), st.lists(st.integers(0, 26), min_size=1, max_size=10))
def test_missing_flavours_collapse_then_restore_generic(stype, codes):
    w = Workspace()
    w.set_obs(len(codes))
    data = np.array([encode_missing(k, stype) for k in codes], dtype=stype.dtype)
    w.add_variable(Variable("x", stype, data))
    guest = {}
    bridge.put_vars_to_df(w, guest)
    col = guest["df"].columns["x"]
    assert col.missing_mask().all()
    back = Workspace()
    bridge.use_df(back, guest)
    out = back.dataset.get("x")
    assert [decode_missing(v, out.stype) for v in out.data.tolist()] == [0] * len(codes)


@settings(max_examples=120, deadline=None)
@given(clean_datasets())
def test_fast_paths_match_default(w):
    plain, fast, dbl = {}, {}, {}
    bridge.put_vars_to_df(w, plain)
    bridge.put_vars_to_df(w, fast, opts=CopyOptions(nomissing=True))
    bridge.put_vars_to_df(w, dbl, opts=CopyOptions(doubleonly=True))
    assert _frame_equal(plain["df"], fast["df"])
    for n in w.dataset.names():
        assert dbl["df"].columns[n].ctype.base is GuestBase.F64
        assert np.array_equal(dbl["df"].columns[n].data, plain["df"].columns[n].data.astype(np.float64))


@settings(max_examples=120, deadline=None)
@given(clean_datasets(), st.data())
def test_restriction_equivalence(w, data):
    nobs = w.dataset.nobs
    mask = np.array(data.draw(st.lists(st.booleans(), min_size=nobs, max_size=nobs)))
    restricted, full = {}, {}
    bridge.put_vars_to_df(w, restricted, None, SampleRestriction.from_mask(mask))
    bridge.put_vars_to_df(w, full)
    rows = np.flatnonzero(mask)
    oracle = GuestDataFrame({n: c.take(rows) for n, c in full["df"].columns.items()})
    assert _frame_equal(restricted["df"], oracle)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 300), st.integers(0, 10_000))
def test_parallel_copy_is_deterministic(nobs, seed):
    w = Workspace()
    mixed_dataset(w, nobs, seed)
    seq, par = {}, {}
    bridge.put_vars_to_df(w, seq, thread_limit=1)
    bridge.put_vars_to_df(w, par, thread_limit=4)
    assert _frame_equal(seq["df"], par["df"])

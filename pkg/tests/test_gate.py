from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from statbridge.errors import GateError
from statbridge.gate import GateSession, SampleRestriction
from statbridge.storage import N_MISSING, NUMERIC_TYPES, StorageType, decode_missing, double_missing
from statbridge.workspace import Workspace


def _numeric_ws(stype: StorageType, nobs: int = 4) -> Workspace:
    w = Workspace()
    w.set_obs(nobs)
    w.create_variable("x", stype)
    w.create_variable("s", StorageType.STR)
    return w


def test_gate_pushes_and_pops_frame(ws):
    depth = len(ws.frames)
    g = GateSession(ws)
    assert len(ws.frames) == depth + 1
    g.close()
    assert len(ws.frames) == depth


def test_cell_access_is_one_based_and_checked():
    w = _numeric_ws(StorageType.DOUBLE)
    with GateSession(w) as g:
        g.vstore(1, 1, 2.5)
        assert g.vdata(1, 1) == 2.5
        with pytest.raises(GateError, match="out of range"):
            g.vdata(0, 1)
        with pytest.raises(GateError, match="out of range"):
            g.vdata(1, 3)
        with pytest.raises(GateError, match="type mismatch"):
            g.vdata(1, 2)


def test_restriction_checks_without_renumbering():
    w = _numeric_ws(StorageType.DOUBLE, 5)
    g = GateSession(w, SampleRestriction.in_range(2, 3))
    g.vstore(2, 1, 1.0)
    with pytest.raises(GateError, match="outside the sample"):
        g.vstore(1, 1, 1.0)
    g.close()


def test_overflow_stores_missing_and_warns():
    w = _numeric_ws(StorageType.BYTE)
    with GateSession(w) as g:
        g.vstore(1, 1, 101.0)
        g.vstore(2, 1, 1.5)
        assert g.warnings == 2
        assert g.vdata(1, 1) == double_missing(0)


def test_local_reads_are_empty_and_saves_stay_in_gate_frame(ws):
    ws.set_local("a", "host")
    g = GateSession(ws)
    assert g.macro_use("a") == ""
    g.macro_save("b", "1")
    g.close()
    assert ws.get_local("b") is None
    assert ws.get_local("a") == "host"


def test_promote_local_reaches_caller(ws):
    with GateSession(ws) as g:
        g.promote_local("m", "v")
    assert ws.get_local("m") == "v"


def test_globals_round_trip(ws):
    with GateSession(ws) as g:
        g.macro_save("G", "x", is_global=True)
        assert g.macro_use("G", is_global=True) == "x"
    assert ws.globals["G"] == "x"


def test_matrix_put_requires_existing_matrix_with_same_shape(ws):
    with GateSession(ws) as g:
        with pytest.raises(GateError, match="not found"):
            g.matrix_put("M", np.zeros((2, 2)))
    ws.define_object("matrix", "M", (2, 2))
    with GateSession(ws) as g:
        with pytest.raises(GateError, match="conformability"):
            g.matrix_put("M", np.zeros((3, 2)))
        g.matrix_put("M", np.ones((2, 2)))
    assert ws.matrix("M").data.sum() == 4


def test_strl_binary_cells():
    w = Workspace()
    w.set_obs(1)
    w.create_variable("b", StorageType.STRL)
    with GateSession(w) as g:
        g.sstore(1, 1, b"\x00\xff")
        assert g.var_is_binary(1, 1)
        assert g.sdatalen(1, 1) == 2


_F32_BOUND = float(np.float32(1e30))
_values = {
    st_: st.integers(int(st_.valid_min), int(st_.valid_max)).map(float)
    if st_.is_integer
    else st.floats(-_F32_BOUND, _F32_BOUND, width=32 if st_ is StorageType.FLOAT else 64)
    for st_ in NUMERIC_TYPES
}


@settings(max_examples=200, deadline=None)
@given(st.sampled_from(NUMERIC_TYPES), st.data())
def test_set_get_identity_for_valid_values(stype, data):
    w = _numeric_ws(stype, 1)
    v = data.draw(_values[stype])
    with GateSession(w) as g:
        g.cell_numeric("set", 1, 1, v)
        assert g.cell_numeric("get", 1, 1) == v
        assert g.warnings == 0


@settings(max_examples=100, deadline=None)
@given(st.sampled_from(NUMERIC_TYPES), st.integers(0, N_MISSING - 1))
def test_set_get_identity_for_missing_codes(stype, code):
    w = _numeric_ws(stype, 1)
    with GateSession(w) as g:
        g.vstore(1, 1, double_missing(code))
        assert decode_missing(g.vdata(1, 1), StorageType.DOUBLE) == code


@settings(max_examples=100, deadline=None)
@given(st.lists(st.sampled_from(["vstore", "sstore", "macro", "global", "scalar", "matput", "bad"]), max_size=15))
def test_gate_never_changes_variable_or_matrix_names(ops):
    w = _numeric_ws(StorageType.INT, 3)
    w.define_object("matrix", "M", (1, 1))
    before = (w.dataset.names(), sorted(w.matrices))
    with GateSession(w) as g:
        for k, op in enumerate(ops):
            try:
                if op == "vstore":
                    g.vstore(1 + k % 3, 1, float(k))
                elif op == "sstore":
                    g.sstore(1 + k % 3, 2, str(k))
                elif op == "macro":
                    g.promote_local(f"l{k}", "v")
                elif op == "global":
                    g.macro_save(f"g{k}", "v", is_global=True)
                elif op == "scalar":
                    g.scal_save(f"s{k}", k)
                elif op == "matput":
                    g.matrix_put("N", np.zeros((1, 1)))
                else:
                    g.vstore(1, 9, 0.0)
            except GateError:
                pass
    assert (w.dataset.names(), sorted(w.matrices)) == before


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 3), max_size=8))
def test_macro_save_touches_only_gate_frame(depths):
    w = Workspace()
    for d in depths:
        w.push_frame()
        w.set_local("x", str(d))
    snapshot = [dict(f.locals) for f in w.frames]
    g = GateSession(w)
    g.macro_save("x", "changed")
    assert [dict(f.locals) for f in w.frames[:-1]] == snapshot
    g.close(promote=False)

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from statbridge.bench import XQX_SOURCE, xqx_oracle
from statbridge.errors import GuestError, GuestSyntaxError
from statbridge.gate import GateSession
from statbridge.guest.builtins import NO_DOC, help_doc
from statbridge.guest.interp import ExitRequest, Interpreter, ScopingMode
from statbridge.guest.parser import Completeness, check_complete
from statbridge.guest.parser import parse
from statbridge.guest.softscope import softscope_transform
from statbridge.guest.values import GuestMatrix, GuestVector
from statbridge.storage import StorageType
from statbridge.workspace import Variable, Workspace


def run(src: str, interp: Interpreter | None = None, mode=None):
    interp = interp or Interpreter()
    return interp.evaluate(src, mode).value


def as_array(v) -> np.ndarray:
    return np.asarray(v.data if isinstance(v, (GuestVector, GuestMatrix)) else v)


@pytest.mark.parametrize(
    "src, expected",
    [
        ("for i in 1:2", Completeness.INCOMPLETE),
        ("function f(x)\n  x", Completeness.INCOMPLETE),
        ("x = (1,", Completeness.INCOMPLETE),
        ('"abc', Completeness.INCOMPLETE),
        ("x = 1 +", Completeness.INCOMPLETE),
        ("end", Completeness.INVALID),
        ("x = )", Completeness.INVALID),
        ("1 + 1", Completeness.COMPLETE),
        ("for i in 1:2\nend", Completeness.COMPLETE),
    ],
)
def test_check_complete(src, expected):
    assert check_complete(src) is expected


def test_trailing_semicolon_suppresses():
    assert Interpreter().evaluate("1 + 1;").suppress
    assert not Interpreter().evaluate("1 + 1").suppress


def test_softscope_updates_global_in_loop():
    assert run("s = 0\nfor i in 1:10\n  s += i\nend\ns") == 55


def test_strict_mode_keeps_loop_assignment_local():
    with pytest.raises(GuestError, match="UndefVarError: s not defined"):
        run("s = 0\nfor i in 1:3\n  s += i\nend", mode=ScopingMode.STRICT)


def test_functions_never_rewritten_by_softscope():
    interp = Interpreter()
    interp.evaluate("t = 100")
    interp.evaluate("function f()\n  t = 1\n  return t\nend")
    assert run("f()", interp) == 1
    assert run("t", interp) == 100


def test_annotation_macros_are_accepted():
    assert run("s = 0\n@inbounds for i in 1:3\n  s += i\nend\ns") == 6
    with pytest.raises(GuestSyntaxError):
        run("@bogus 1")


def test_exit_request():
    with pytest.raises(ExitRequest):
        run("exit()")


def test_typeof_and_literals():
    assert run("typeof(1.0)").name == "Float64"
    m = run("[1 2; 3 4]")
    assert isinstance(m, GuestMatrix)
    assert as_array(m).tolist() == [[1.0, 2.0], [3.0, 4.0]]


def test_bounds_errors():
    with pytest.raises(GuestError, match="BoundsError"):
        run("x = [1, 2]; x[3]")


def test_help_doc():
    assert "observations" in help_doc("SF_nobs")
    assert help_doc("no_such_thing") == NO_DOC


def test_st_view_writes_through_and_st_data_copies(auto_ws):
    with GateSession(auto_ws) as g:
        interp = Interpreter(gate=g)
        run('d = st_data("mpg"); d[1, 1] = 0', interp)
        assert auto_ws.dataset.get("mpg").data[0] == 22
        run('v = st_view("price"); v[1, 1] = 1.0', interp)
        assert auto_ws.dataset.get("price").data[0] == 1
        assert run('size(st_data("price mpg"))', interp) == (74, 2)


def test_sf_calls_reach_the_gate(auto_ws):
    with GateSession(auto_ws) as g:
        interp = Interpreter(gate=g)
        assert run("SF_nobs()", interp) == 74
        assert run("SF_vdata(2, 1)", interp) == 4749.0
        run('SF_macro_save("_m", "hi")', interp)
        assert auto_ws.get_local("m") is None


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(-1000, 1000), min_size=1, max_size=20), st.integers(-5, 5))
def test_broadcast_matches_loop(xs, c):
    interp = Interpreter()
    interp.globals["c"] = c
    lit = "[" + ", ".join(str(x) for x in xs) + "]"
    broadcast = as_array(run(f"{lit} .* c .+ 1", interp))
    looped = as_array(run(f"x = {lit}\ny = zeros(length(x))\nfor i in 1:length(x)\n  y[i] = x[i] * c + 1\nend\ny", interp))
    assert np.array_equal(broadcast, looped)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(-50, 50), min_size=0, max_size=15))
def test_softscope_is_idempotent_on_loop_sum(xs):
    lit = "[" + ", ".join(str(x) for x in xs) + "]" if xs else "zeros(0)"
    src = f"s = 0\nfor v in {lit}\n  s += v\nend\ns"
    interp = Interpreter()
    first = run(src, interp)
    second = run(src, interp)
    assert first == second == sum(xs)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 30), st.integers(1, 6), st.integers(0, 2**31))
def test_guest_xqx_matches_oracle(n, m, seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, m))
    A = rng.uniform(size=(m, m))
    Q = (A + A.T) / 2
    interp = Interpreter()
    interp.evaluate(XQX_SOURCE)
    interp.globals["X"] = GuestMatrix(X.copy())
    interp.globals["Q"] = GuestMatrix(Q.copy())
    got = as_array(run("XQX(Q, X)", interp))
    np.testing.assert_allclose(got, xqx_oracle(X, Q), rtol=1e-12, atol=1e-12)


_stmt_templates = [
    "{a} = {k}",
    "{a} += {k}",
    "for i in 1:{k}\n  {a} += i\nend",
    "for i in 1:{k}\n  for j in 1:2\n    {b} = {a} + j\n  end\nend",
    "while {a} < {k}\n  {a} += 1\nend",
    "if {a} > {k}\n  {b} = 1\nelse\n  {b} = 2\nend",
    "function f{k}(x)\n  {a} = x\n  return {a}\nend",
]


@st.composite
def programs(draw):
    names = st.sampled_from(["s", "t", "u"])
    stmts = draw(
        st.lists(
            st.tuples(st.sampled_from(_stmt_templates), names, names, st.integers(0, 4)), min_size=1, max_size=6
        )
    )
    return "\n".join(t.format(a=a, b=b, k=k) for t, a, b, k in stmts)


@settings(max_examples=150, deadline=None)
@given(programs(), st.sets(st.sampled_from(["s", "t", "u"])))
def test_softscope_transform_is_idempotent(src, bound):
    tree = parse(src)
    once = softscope_transform(tree, bound)
    assert softscope_transform(once, bound) == once


@settings(max_examples=100, deadline=None)
@given(programs())
def test_incomplete_prefix_is_resolvable(src):
    lines = src.split("\n")
    for cut in range(1, len(lines)):
        head = "\n".join(lines[:cut])
        if check_complete(head) is Completeness.INCOMPLETE:
            assert check_complete(head + "\n" + "\n".join(lines[cut:])) is Completeness.COMPLETE


@settings(max_examples=100, deadline=None)
@given(st.integers(-100, 100), st.integers(-100, 100))
def test_semicolon_changes_only_suppression(a, b):
    plain = Interpreter().evaluate(f"print({a}); {a} + {b}")
    quiet = Interpreter().evaluate(f"print({a}); {a} + {b};")
    assert (plain.value, plain.stdout) == (quiet.value, quiet.stdout)
    assert quiet.suppress and not plain.suppress


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 12), st.data())
def test_view_materializes_to_data(nobs, data):
    w = Workspace()
    w.set_obs(nobs)
    kinds = [StorageType.BYTE, StorageType.INT, StorageType.LONG, StorageType.FLOAT, StorageType.DOUBLE]
    for j, stype in enumerate(data.draw(st.lists(st.sampled_from(kinds), min_size=1, max_size=4))):
        vals = data.draw(st.lists(st.integers(-100, 100), min_size=nobs, max_size=nobs))
        w.add_variable(Variable(f"v{j}", stype, np.array(vals, dtype=stype.dtype)))
    names = data.draw(st.lists(st.sampled_from(w.dataset.names()), min_size=1, unique=True))
    mask = data.draw(st.lists(st.booleans(), min_size=nobs, max_size=nobs))
    with GateSession(w) as g:
        interp = Interpreter(gate=g)
        interp.globals["sel"] = GuestVector(np.array(mask, dtype=bool))
        spec = " ".join(names)
        view = run(f'st_view("{spec}", sel)', interp).materialize()
        copy = run(f'st_data("{spec}", sel)', interp)
    assert np.array_equal(view.data, copy.data)

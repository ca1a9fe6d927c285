"""The twelve acceptance criteria, one test each.

Every test prints a single ``PASS``/``FAIL`` line naming its criterion.
The line also shows the measured wall time against the pinned limit. Run with ``-s`` to see the
lines interleaved with pytest's own output; they are printed with
capturing disabled, so they also appear in ``pytest -v`` logs.
"""

from __future__ import annotations

import re
import subprocess
import sys
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest

from conftest import ShellHarness
from statbridge import bridge
from statbridge.bench import random_xq, run_xqx
from statbridge.bridge import CopyOptions
from statbridge.envman import DEFAULT_PACKAGES, EnvManager, SemVer, format_manifest
from statbridge.errors import GuestError
from statbridge.fixtures import load_auto, mixed_dataset
from statbridge.gate import GateSession
from statbridge.guest.interp import Interpreter
from statbridge.guest.values import GuestBase, GuestColumnType, GuestDataFrame, GuestVector
from statbridge.storage import (
    N_MISSING,
    NUMERIC_TYPES,
    StorageType,
    decode_missing,
    encode_missing,
    missing_name,
)
from statbridge.workspace import Variable, Workspace

TESTS = Path(__file__).parent


@contextmanager
def criterion(capsys, number: int, title: str, limit: float | None):
    """Time the body, print one verdict line, then re-raise any failure."""
    t0 = time.perf_counter()
    failure = None
    try:
        yield
    except Exception as exc:  # reported below, then re-raised
        failure = exc
    secs = time.perf_counter() - t0
    if failure is None and limit is not None and secs >= limit:
        failure = AssertionError(f"took {secs:.2f} s; limit {limit:g} s")
    verdict = "PASS" if failure is None else "FAIL"
    bound = f"< {limit:g} s" if limit is not None else "not gated"
    detail = "" if failure is None else f" ({type(failure).__name__}: {failure})"
    with capsys.disabled():
        print(f"\n{verdict} criterion {number}: {title} [{secs:.3f} s, {bound}]{detail}")
    if failure is not None:
        raise failure


def test_c01_type_mapping(capsys):
    with criterion(capsys, 1, "auto fixture maps to Int16? Int16? Float32? Int16? Categorical?", 1.0):
        ws = Workspace()
        load_auto(ws)
        stypes = [ws.dataset.get(n).stype for n in ws.dataset.names()]
        assert stypes == [StorageType.INT, StorageType.INT, StorageType.FLOAT, StorageType.INT, StorageType.BYTE]
        assert ws.dataset.get("foreign").label_table is not None
        guest = {}
        bridge.save_df(ws, guest, "auto")
        df = guest["auto"]
        assert [df.columns[n].ctype.name for n in df.names()] == [
            "Int16?", "Int16?", "Float32?", "Int16?", "Categorical?"
        ]


def test_c02_missing_ladder(capsys):
    with criterion(capsys, 2, "27-code missing ladder on every numeric type; byte max is 100", 1.0):
        for stype in NUMERIC_TYPES:
            for k in range(N_MISSING):
                raw = encode_missing(k, stype)
                assert decode_missing(raw, stype) == k
                assert raw > stype.valid_max
        assert StorageType.BYTE.valid_max == 100
        assert StorageType.BYTE.valid_min == -128
        for stype in (StorageType.STR, StorageType.STRL):
            with pytest.raises(Exception):
                encode_missing(0, stype)


def test_c03_widening(capsys):
    with criterion(capsys, 3, "guest Int8 lands in host int; Int16 32767 lands in long and round-trips", 1.0):
        ws = Workspace()
        ws.set_obs(3)
        i8 = GuestVector(np.array([-128, 0, 127], dtype=np.int8), GuestColumnType(GuestBase.I8))
        i16 = GuestVector(np.array([32767, -32768, 5], dtype=np.int16), GuestColumnType(GuestBase.I16))
        guest = {"df": GuestDataFrame({"a": i8, "b": i16})}
        bridge.get_vars_from_df(ws, guest)
        assert ws.dataset.get("a").stype is StorageType.INT
        assert ws.dataset.get("b").stype is StorageType.LONG
        back = {}
        bridge.put_vars_to_df(ws, back)
        assert back["df"].columns["a"].values() == [-128, 0, 127]
        assert back["df"].columns["b"].values() == [32767, -32768, 5]


def test_c04_missing_collapse(capsys):
    with criterion(capsys, 4, "flavors . .a .z collapse to one guest missing and return as .", 1.0):
        ws = Workspace()
        ws.set_obs(4)
        codes = [0, 1, 26]
        data = np.array([encode_missing(k, StorageType.DOUBLE) for k in codes] + [1.5])
        ws.add_variable(Variable("x", StorageType.DOUBLE, data))
        assert [missing_name(k) for k in codes] == [".", ".a", ".z"]
        guest = {}
        bridge.put_vars_to_df(ws, guest)
        col = guest["df"].columns["x"]
        assert col.missing_mask().tolist() == [True, True, True, False]
        bridge.get_vars_from_df(ws, guest, ["y"], opts=CopyOptions(cols=["x"]))
        y = ws.dataset.get("y")
        assert [decode_missing(v, y.stype) for v in y.data.tolist()[:3]] == [0, 0, 0]
        assert y.data[3] == 1.5


def test_c05_fast_path_equivalence(capsys):
    with criterion(capsys, 5, "nomissing / doubleonly / default copies agree on 1e5 x 10 doubles", None):
        rng = np.random.default_rng(5)
        ws = Workspace()
        ws.set_obs(100_000)
        for j in range(10):
            ws.add_variable(Variable(f"x{j + 1}", StorageType.DOUBLE, rng.standard_normal(100_000)))
        runs = {}
        reports = {}
        for name, opts in {
            "default": CopyOptions(),
            "nomissing": CopyOptions(nomissing=True),
            "doubleonly": CopyOptions(doubleonly=True),
            "both": CopyOptions(nomissing=True, doubleonly=True),
        }.items():
            runs[name] = {}
            reports[name] = bridge.put_vars_to_df(ws, runs[name], opts=opts)
        base = runs["default"]["df"]
        for name in ("nomissing", "doubleonly", "both"):
            other = runs[name]["df"]
            for col in base.names():
                assert np.array_equal(other.columns[col].data, base.columns[col].data.astype(np.float64))
                assert not other.columns[col].has_missing()
        assert base.same_as(runs["nomissing"]["df"])
        both = reports["both"]
        assert both.path == "both"
        with capsys.disabled():
            print(f"\n  {both.line()} throughput={both.throughput / 1e9:.2f} GB/s (reported, not gated)")


def test_c06_xqx_oracle(capsys):
    with criterion(capsys, 6, "guest triple-loop XQX matches rowsum((X*Q):*X) within 1e-10 on 1000 x 10", 5.0):
        X, Q = random_xq(1000, 10, seed=1)
        assert np.array_equal(Q, Q.T)
        report = run_xqx(X, Q)
        assert report.result is not None and report.result.shape == (1000,)
        assert report.max_rel_diff <= 1e-10
        with capsys.disabled():
            print(f"\n  guest secs={report.guest_secs:.4f} host secs={report.host_secs:.6f} "
                  f"max rel diff={report.max_rel_diff:.2e}")


def test_c07_softscope(capsys, tmp_path):
    with criterion(capsys, 7, "loop snippet prints 55 interactively and in jl:, errors under _jl:", 1.0):
        h = ShellHarness(tmp_path)
        out = h.run("jl", "S = 0", "for i in 1:10", "  S += i", "end", "print(S)", "exit()")
        assert "55" in out.splitlines()
        out = h.run("jl: R = 0; for i in 1:10; R += i; end; print(R)")
        assert out.splitlines()[-1] == "55"
        out = h.run("_jl: U = 0", "_jl: for i in 1:10 U += i end")
        assert "error: UndefVarError: U not defined" in out


def test_c08_session_transcript(capsys, tmp_path):
    with criterion(capsys, 8, "session skeleton prints Adjusted R2 = .26365506", 1.0):
        script = (TESTS / "golden" / "session.do").read_text(encoding="utf-8").splitlines()
        h = ShellHarness(tmp_path)
        out = h.run(*script)
        h.shell.finish()
        assert h.shell.errors == 0
        assert "74×5 DataFrame" in out
        assert "(74, 5)" in out.splitlines()
        assert out.splitlines()[-1] == "Adjusted R2 = .26365506"


def test_c09_gate_constraints(capsys, tmp_path):
    with criterion(capsys, 9, "gate cannot create matrices; promotion differs between jl: and _jl:", 1.0):
        h = ShellHarness(tmp_path)
        out = h.run('jl: st_matrix("M", [1 2; 3 4])')
        assert "error: matrix M not found" in out
        assert "M" not in h.ws.matrices
        h.run("jl: M = [1 2; 3 4];", "jl GetMatFromMat M")
        assert h.ws.matrix("M").data.tolist() == [[1.0, 2.0], [3.0, 4.0]]
        assert "error" not in h.run('jl: st_matrix("M", [4 3; 2 1])')
        assert h.ws.matrix("M").data[0, 0] == 4.0
        h.run('jl: st_local("p", "yes")', '_jl: st_local("q", "yes")')
        assert h.ws.get_local("p") == "yes"
        assert h.ws.get_local("q") is None
        # no builtin reads a host local: st_local only writes, SF_macro_use sees nothing
        h.ws.set_local("secret", "42")
        with GateSession(h.ws) as g:
            interp = Interpreter(gate=g)
            with pytest.raises(GuestError):
                interp.evaluate('st_local("secret")')
            assert interp.evaluate('SF_macro_use("_secret")').value == ""
        readers = [n for n in h.shell.guest.builtins if "local" in n.lower() and n != "st_local"]
        assert readers == []


def test_c10_envman(capsys, tmp_path, registry):
    with criterion(capsys, 10, "SetEnv seeds a subdirectory; AddPkg three-case table", 1.0):
        mgr = EnvManager(tmp_path / "envs", registry)
        env = mgr.set_env("myenv")
        assert env.path == tmp_path / "envs" / "myenv"
        assert env.manifest == DEFAULT_PACKAGES
        assert mgr.add_pkg("alpha") == "installed"
        assert mgr.environment().manifest["alpha"] == SemVer(1, 3, 1)
        pinned = dict(mgr.environment().manifest)
        pinned["alpha"] = SemVer(1, 2, 0)
        mgr.environment().manifest_path.write_text(format_manifest(pinned), encoding="utf-8")
        assert mgr.add_pkg("alpha", "1.3.0") == "upgraded"
        assert mgr.environment().manifest["alpha"] == SemVer(1, 3, 1)
        assert mgr.add_pkg("alpha", "1.2.0") == "unchanged"
        assert mgr.environment().manifest["alpha"] == SemVer(1, 3, 1)


def test_c11_parallel_determinism(capsys):
    with criterion(capsys, 11, "1 vs 4 worker copies are bit-identical on 1e5 x 8 mixed data", 5.0):
        ws = Workspace()
        mixed_dataset(ws, 100_000, seed=11, missing_rate=0.05)
        assert ws.dataset.nvar == 8
        seq, par = {}, {}
        bridge.put_vars_to_df(ws, seq, thread_limit=1)
        bridge.put_vars_to_df(ws, par, thread_limit=4)
        a, b = seq["df"], par["df"]
        assert a.names() == b.names()
        for n in a.names():
            x, y = a.columns[n], b.columns[n]
            assert x.same_as(y)
            assert np.array_equal(x.missing_mask(), y.missing_mask())
            if x.data.dtype != object:
                assert x.data.tobytes() == y.data.tobytes()
        assert any(c.has_missing() for c in a.columns.values())


PROPERTY_FILES = [
    "test_storage.py", "test_workspace.py", "test_gate.py", "test_guest.py",
    "test_bridge.py", "test_envman.py", "test_shell.py",
]


def test_c12_invariant_suites(capsys):
    with criterion(capsys, 12, "module property suites pass with at least 1000 randomized cases", 60.0):
        proc = subprocess.run(
            [sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider", "--hypothesis-show-statistics",
             *[str(TESTS / f) for f in PROPERTY_FILES]],
            capture_output=True, text=True, cwd=TESTS.parent, timeout=120,
        )
        assert proc.returncode == 0, proc.stdout[-2000:]
        cases = sum(int(n) for n in re.findall(r"(\d+) passing examples", proc.stdout))
        with capsys.disabled():
            print(f"\n  randomized cases passed: {cases}")
        assert cases >= 1000

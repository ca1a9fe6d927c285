from __future__ import annotations

import re

import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from conftest import ShellHarness
from statbridge.shell import interpolate_locals, strip_comment


def test_unknown_subcommand_reports_usage(harness):
    out = harness.run("jl bogus")
    assert out.startswith(". jl bogus\nerror: unknown jl subcommand 'bogus'; usage:")
    assert harness.shell.errors == 1


def test_unknown_host_command(harness):
    assert "error: unrecognized command: frobnicate" in harness.run("frobnicate")


def test_start_fixes_thread_limit(harness):
    harness.run("jl start, threads(8)")
    assert harness.run("jl: Threads.nthreads()").splitlines()[-1] == "8"
    assert "thread limit already fixed" in harness.run("jl start, threads(2)")


def test_start_after_other_jl_command_errors(harness):
    harness.run("jl: 1+1")
    assert "thread limit already fixed" in harness.run("jl start, threads(4)")


def test_start_auto_uses_cpu_count(harness):
    import os

    harness.run("jl start, threads(auto)")
    assert harness.shell.thread_limit == (os.cpu_count() or 1)


def test_prefix_echo_and_suppression(harness):
    assert harness.run("jl: 1 + 1").splitlines() == [". jl: 1 + 1", "2"]
    assert harness.run("jl: x = 1;").splitlines() == [". jl: x = 1;"]
    assert harness.run("jl : x + 1").splitlines()[-1] == "2"


def test_prefix_incomplete_line_is_error(harness):
    assert "error: incomplete input" in harness.run("jl: for i in 1:3")


def test_interpolation_precedes_evaluation(harness):
    out = harness.run('jl: st_local("a", "123"); print("[`a\']")', 'display "`a\'"')
    assert out.splitlines()[1:] == ["[]", ". display \"`a'\"", "123"]


def test_prefix_promotes_and_raw_does_not(harness):
    harness.run('jl: st_local("m", "v1")')
    assert harness.ws.get_local("m") == "v1"
    harness.run('_jl: st_local("n", "v2")')
    assert harness.ws.get_local("n") is None


def test_raw_eval_shows_prints_but_not_values(harness):
    assert harness.run('_jl: print("hi")').splitlines() == ['. _jl: print("hi")', "hi"]
    assert harness.run("_jl: 1 + 1").splitlines() == [". _jl: 1 + 1"]


def test_raw_eval_is_strict(harness):
    out = harness.run("_jl: S = 0", "_jl: for i in 1:10 S += i end")
    assert "error: UndefVarError: S not defined" in out


def test_interactive_softscope_and_continuation(harness):
    out = harness.run("jl", "S = 0", "for i in 1:10", "  S += i", "end", "print(S)", "exit()")
    lines = out.splitlines()
    assert "jl> . for i in 1:10" in lines
    assert "  ...   S += i" in lines
    assert "  ... end" in lines
    assert "55" in lines
    kinds = [e.kind for e in harness.shell.transcript.events]
    for k, kind in enumerate(kinds[:-1]):
        if kind == "fresh" and harness.shell.transcript.events[k].text == "for i in 1:10":
            assert kinds[k + 1] == "continue"


def test_interactive_does_not_interpolate(harness):
    harness.run("local varname price")
    out = harness.run("jl", "`varname'", "exit()")
    assert "error:" in out
    assert "price" not in out.replace("`varname'", "")


def test_interactive_help_and_promotion_at_exit(harness):
    out = harness.run("jl", "?st_view", 'st_local("z", "9")')
    assert "st_view(varnames" in out
    assert "z" not in harness.ws.frames[0].locals
    harness.run("exit()")
    assert harness.ws.get_local("z") == "9"


def test_interactive_error_keeps_session_open(harness):
    harness.run("jl", "undefined_thing")
    assert harness.shell.in_interactive
    harness.run("exit()")
    assert not harness.shell.in_interactive


def test_finish_closes_open_session(harness):
    harness.run("jl", 'st_local("q", "1")')
    harness.shell.finish()
    assert not harness.shell.in_interactive
    assert harness.ws.get_local("q") == "1"


def test_save_and_display_frame(harness):
    out = harness.run("sysuse auto", "jl save auto", "jl: size(auto)")
    assert "Data saved to DataFrame auto" in out
    assert out.splitlines()[-1] == "(74, 5)"


def test_st_matrix_needs_host_matrix_then_getmatfrommat(harness):
    out = harness.run("jl: st_matrix(\"M\", [1 2; 3 4])")
    assert "error:" in out and "not found" in out
    harness.run("jl: M = [1 2; 3 4];", "jl GetMatFromMat M")
    assert harness.ws.matrix("M").data.tolist() == [[1.0, 2.0], [3.0, 4.0]]
    harness.run('jl: st_matrix("M", [5 6; 7 8])')
    assert harness.ws.matrix("M").data[1, 1] == 8.0


def test_put_get_vars_round_trip(harness):
    harness.run(
        "set obs 5",
        "genvar x double = seq",
        "jl PutVarsToDF x, dest(d)",
        "jl: d.y = d.x .* 2;",
        "jl GetVarsFromDF y, source(d)",
    )
    assert list(harness.ws.dataset.get("y").data) == [2.0, 4.0, 6.0, 8.0, 10.0]


def test_errors_leave_dataset_unchanged(harness):
    harness.run("sysuse auto", "jl save auto")
    before = {n: np.array(harness.ws.dataset.get(n).data, copy=True) for n in harness.ws.dataset.names()}
    out = harness.run(
        "jl GetVarsFromDF price, source(auto)",
        "jl use nosuch, clear",
        "jl PutVarsToMat nosuchvar, dest(X)",
        "jl GetVarsFromMat a b, source(nothere)",
        "obs 3",
    )
    assert out.count("error:") == 5
    assert harness.ws.dataset.names() == list(before)
    for n, data in before.items():
        assert np.array_equal(harness.ws.dataset.get(n).data, data)


def test_timing_decoration(harness):
    harness.shell.config.timing_enabled = True
    out = harness.run("set obs 3")
    assert re.search(r"^r; t=\d+\.\d\d$", out, re.M)


def test_getenv_and_return_list(harness):
    harness.run("jl GetEnv")
    out = harness.run("return list")
    assert 'r(pkgs) : "categorical-arrays dataframes-core"' in out


def test_addpkg_via_shell(harness):
    assert harness.run("jl AddPkg alpha").splitlines()[-1] == "alpha v1.3.1 installed"
    assert harness.run("jl AddPkg alpha, minver(1.3.0)").splitlines()[-1] == "alpha v1.3.1 unchanged"


def test_bench_xqx_trivial_case():
    from statbridge.bench import run_xqx

    report = run_xqx(np.array([[2.0]]), np.array([[3.0]]))
    assert report.result.tolist() == [12.0]
    assert report.max_rel_diff == 0.0


def test_bench_copy_reports_both_path(harness):
    out = harness.run("bench copy, n(1000) m(3) nomissing doubleonly")
    assert "path=both" in out
    assert "throughput=" in out


def test_bench_refuses_huge_working_set(harness):
    assert "limit is 2 GiB" in harness.run("bench xqx, n(100000000) m(10)")


def test_strip_comment_and_interpolate(ws):
    assert strip_comment('display "a // b" // note') == 'display "a // b"'
    ws.set_local("v", "x1")
    assert interpolate_locals("sum(df.`v') `missing'", ws) == "sum(df.x1) "


_TIMING = re.compile(r"^(r; t=.*|rows=.*secs=.*)\n", re.M)

_script_lines = st.sampled_from(
    [
        "jl: 1 + 2",
        "jl: x = [1, 2, 3];",
        "jl: sum(x)",
        "_jl: print(\"p\")",
        "set obs 4",
        "genvar a int = seq",
        "jl PutVarsToDF a",
        "jl: df.a",
        "display 2 + 2",
        "jl bogus",
        'jl: st_local("k", "1")',
        "display \"`k'\"",
    ]
)


@settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(st.lists(_script_lines, max_size=8))
def test_timing_flag_changes_only_decoration(tmp_path_factory, lines):
    root = tmp_path_factory.mktemp("timing")
    plain, timed = ShellHarness(root / "a"), ShellHarness(root / "b")
    timed.shell.config.timing_enabled = True
    a = plain.run(*lines)
    b = timed.run(*lines)
    assert _TIMING.sub("", b) == a


_single_lines = st.sampled_from(
    ["1 + 2", "x = 5", "x = 5;", "print(\"hello\")", "[1, 2] .* 3", "typeof(2)", "s = 0; for i in 1:4; s += i; end; s"]
)


@settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(_single_lines)
def test_prefix_matches_interactive_entry(tmp_path_factory, line):
    root = tmp_path_factory.mktemp("same")
    a, b = ShellHarness(root / "a"), ShellHarness(root / "b")
    prefixed = a.run(f"jl: {line}").splitlines()[1:]
    b.run("jl")
    interactive = b.run(line).splitlines()[1:]
    assert prefixed == interactive

"""The command shell, which routes host commands and ``jl`` lines into the guest.

A :class:`Shell` consumes one physical line at a time through
:meth:`Shell.feed`. Outside interactive mode every line first has its
```name'`` local references replaced from the current macro frame, exactly
once and before anything else looks at it. Inside the interactive guest
session lines pass through untouched.

Everything the shell prints goes through :meth:`Shell.emit`, which also
records a :class:`ReplTranscript` for golden tests.
"""

from __future__ import annotations

import os
import re
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np

from . import bridge, fixtures
from .bench import BenchSpec, run_bench
from .bridge import CopyOptions
from .envman import EnvManager, SemVer
from .errors import IncompleteInput, ShellError, StatBridgeError
from .gate import GateSession
from .guest.builtins import help_doc
from .guest.display import show
from .guest.interp import ExitRequest, Interpreter, ScopingMode
from .guest.parser import Completeness, check_complete, parse
from .guest.values import NOTHING
from .hostcmd import (
    HostExpr,
    cell_text,
    expand_new_names,
    format_count,
    format_number,
    parse_options,
    split_clauses,
    split_top,
)
from .storage import StorageType, double_missing, narrow_from_double, parse_missing_name
from .workspace import Variable, Workspace, check_identifier

HOST_PROMPT = ". "
FRESH_PROMPT = "jl> . "
CONTINUE_PROMPT = "  ... "
BANNER_WIDTH = 84
DEFAULT_THREADS = 1

_LOCAL_REF = re.compile(r"`([A-Za-z_][A-Za-z0-9_]*)'")

JL_SUBCOMMANDS = (
    "start", "GetEnv", "SetEnv", "AddPkg", "save", "use",
    "PutVarsToDF", "GetVarsFromDF", "PutVarsToMat", "GetVarsFromMat",
    "PutMatToMat", "GetMatFromMat",
)
JL_USAGE = "usage: jl [: expr] | jl " + " | ".join(JL_SUBCOMMANDS)


def default_home() -> Path:
    return Path(os.environ.get("STATBRIDGE_HOME", Path.home() / ".statbridge"))


@dataclass
class SessionConfig:
    started: bool = False
    thread_limit: Optional[int] = None
    timing_enabled: bool = False
    env_root: Path = field(default_factory=lambda: default_home() / "environments")
    registry_root: Path = field(default_factory=lambda: default_home() / "registry")


@dataclass
class TranscriptEvent:
    kind: str  # host, fresh, continue, output, echo, error
    text: str


@dataclass
class ReplTranscript:
    events: List[TranscriptEvent] = field(default_factory=list)

    def add(self, kind: str, text: str) -> None:
        self.events.append(TranscriptEvent(kind, text))

    def of_kind(self, kind: str) -> List[str]:
        return [e.text for e in self.events if e.kind == kind]


def interpolate_locals(line: str, ws: Workspace) -> str:
    """Replace every ```name'`` with the current frame's local (or "")."""
    return _LOCAL_REF.sub(lambda m: ws.get_local(m.group(1)) or "", line)


_COMMENT = re.compile(r"(^|\s)//(\s|$)")


def strip_comment(line: str) -> str:
    """Drop a trailing ``// comment`` that is not inside a string."""
    for m in _COMMENT.finditer(line):
        if line[: m.start()].count('"') % 2 == 0:
            return line[: m.start()]
    return line


class _Interactive:
    """State of an open guest REPL: its buffer and its long-lived gate."""

    def __init__(self, gate: GateSession) -> None:
        self.gate = gate
        self.buffer: List[str] = []


class Shell:
    def __init__(
        self,
        config: Optional[SessionConfig] = None,
        write: Optional[Callable[[str], None]] = None,
        workspace: Optional[Workspace] = None,
        echo: bool = True,
    ) -> None:
        self.config = config or SessionConfig()
        self.ws = workspace or Workspace()
        self.guest = Interpreter(mode=ScopingMode.SOFT)
        self._write = write or sys.stdout.write
        self.echo = echo
        self.transcript = ReplTranscript()
        self.errors = 0
        self._interactive: Optional[_Interactive] = None
        self._envman: Optional[EnvManager] = None
        self._continued = ""

    # -- output ---------------------------------------------------------------

    def emit(self, text: str, kind: str = "output") -> None:
        if text == "":
            return
        self.transcript.add(kind, text)
        self._write(text if text.endswith("\n") else text + "\n")

    def report_error(self, message: str) -> None:
        self.errors += 1
        self.emit(f"error: {message}", "error")

    @property
    def in_interactive(self) -> bool:
        return self._interactive is not None

    def prompt(self) -> str:
        if self._interactive is None:
            return HOST_PROMPT
        return CONTINUE_PROMPT if self._interactive.buffer else FRESH_PROMPT

    # -- line entry -------------------------------------------------------------

    def feed(self, line: str) -> bool:
        """Process one physical input line. Returns False if it reported an error."""
        line = line.rstrip("\r\n")
        before = self.errors
        if self._interactive is not None:
            self._echo_prompt(line)
            self._interactive_line(line)
            return self.errors == before
        if line.rstrip().endswith("///"):
            self._continued += line.rstrip()[:-3] + " "
            return True
        if self._continued:
            line, self._continued = self._continued + line.lstrip(), ""
        stripped = strip_comment(line).strip()
        if not stripped or stripped.startswith("#") or stripped.startswith("*") or stripped.startswith("//"):
            return True
        self._echo_prompt(stripped)
        t0 = time.perf_counter()
        try:
            self.dispatch(interpolate_locals(stripped, self.ws))
        except StatBridgeError as exc:
            self.report_error(str(exc))
        if self.config.timing_enabled and self._interactive is None:
            self.emit(f"r; t={time.perf_counter() - t0:.2f}", "timing")
        return self.errors == before

    def _echo_prompt(self, line: str) -> None:
        kind = "host" if self._interactive is None else ("continue" if self._interactive.buffer else "fresh")
        self.transcript.add(kind, line)
        if self.echo:
            self._write(f"{self.prompt()}{line}\n")

    def run_lines(self, lines) -> int:
        for line in lines:
            self.feed(line)
        self.finish()
        return 1 if self.errors else 0

    def finish(self) -> None:
        """Close anything a script left open."""
        if self._continued:
            pending, self._continued = self._continued, ""
            self.feed(pending)
        if self._interactive is not None:
            self.report_error("input ended inside the interactive session; closing it")
            self._leave_interactive()

    # -- dispatch ---------------------------------------------------------------

    def dispatch(self, line: str) -> None:
        if line.startswith("_jl:"):
            return self.raw_eval(line[4:])
        if line.startswith("jl:"):
            return self.prefix_eval(line[3:])
        if line == "jl" or line.startswith("jl "):
            rest = line[2:].strip()
            if rest.startswith(":"):
                return self.prefix_eval(rest[1:])
            if not rest:
                return self.enter_interactive()
            return self.jl_command(rest)
        verb, _, rest = line.partition(" ")
        handler = self._host_commands().get(verb)
        if handler is None:
            raise ShellError(f"unrecognized command: {verb}")
        handler(rest.strip())

    # -- guest evaluation ---------------------------------------------------------

    def ensure_started(self) -> None:
        if not self.config.started:
            self.start(None)

    def start(self, threads: Optional[str]) -> None:
        if self.config.started:
            raise ShellError("thread limit already fixed; jl start must be the first jl command")
        if threads is None or threads == "":
            limit = self.config.thread_limit or DEFAULT_THREADS
        elif threads == "auto":
            limit = os.cpu_count() or 1
        else:
            try:
                limit = int(threads)
            except ValueError:
                raise ShellError(f"threads() must be a positive integer or auto, got {threads!r}") from None
            if limit < 1:
                raise ShellError("threads() must be at least 1")
        self.config.thread_limit = limit
        self.config.started = True
        self.guest.nthreads = limit

    @property
    def thread_limit(self) -> int:
        return self.config.thread_limit or DEFAULT_THREADS

    def _gate_emit(self, kind: str, text: str) -> None:
        self.guest.write(text + "\n")

    def _open_gate(self) -> GateSession:
        gate = GateSession(self.ws, emit=self._gate_emit)
        self.guest.gate = gate
        return gate

    def _run_guest(self, src: str, mode: ScopingMode, echo_value: bool) -> None:
        text = src.strip()
        if not text:
            raise ShellError("nothing to evaluate")
        if text.startswith("?"):
            self.emit(help_doc(text[1:], self.guest.builtins))
            return
        state = check_complete(text)
        if state is Completeness.INCOMPLETE:
            raise ShellError("incomplete input: the line ends before the expression or block is closed")
        try:
            program = parse(text)
        except IncompleteInput as exc:  # pragma: no cover - check_complete already caught this
            raise ShellError(f"incomplete input: {exc}") from None
        res = self.guest.evaluate(program, mode)
        self._show_result(res.stdout, res.value, res.suppress or not echo_value)

    def _show_result(self, stdout: str, value, suppress: bool) -> None:
        if stdout:
            self.emit(stdout)
        if not suppress and value is not NOTHING and value is not None:
            self.emit(show(value), "echo")

    def prefix_eval(self, src: str) -> None:
        """Evaluate one ``jl:`` line as the REPL would, then promote its locals."""
        self.ensure_started()
        gate = self._open_gate()
        ok = False
        try:
            self._run_guest(src, ScopingMode.SOFT, echo_value=True)
            ok = True
        except ExitRequest:
            raise ShellError("exit() is only available in the interactive session") from None
        finally:
            gate.close(promote=ok)
            self.guest.gate = None

    def raw_eval(self, src: str) -> None:
        """Evaluate one ``_jl:`` line with strict scoping. Values are not echoed and locals stay put."""
        self.ensure_started()
        gate = self._open_gate()
        try:
            self._run_guest(src, ScopingMode.STRICT, echo_value=False)
        except ExitRequest:
            raise ShellError("exit() is only available in the interactive session") from None
        finally:
            gate.close(promote=False)
            self.guest.gate = None

    # -- interactive session ------------------------------------------------------

    def enter_interactive(self) -> None:
        self.ensure_started()
        title = " guest (type exit() to exit) "
        left = (BANNER_WIDTH - len(title)) // 2
        self.emit("─" * left + title + "─" * (BANNER_WIDTH - left - len(title)))
        self._interactive = _Interactive(self._open_gate())

    def _leave_interactive(self) -> None:
        state = self._interactive
        assert state is not None
        self._interactive = None
        # the REPL gate may not be on top if a nested command failed midway
        while self.ws.frame is not state.gate.gate_frame and len(self.ws.frames) > 1:
            self.ws.pop_frame()
        state.gate.close(promote=True)
        self.guest.gate = None
        self.emit("─" * BANNER_WIDTH)

    def _interactive_line(self, line: str) -> None:
        state = self._interactive
        assert state is not None
        if not state.buffer:
            stripped = line.strip()
            if not stripped:
                return
            if stripped.startswith("?"):
                self.emit(help_doc(stripped[1:], self.guest.builtins))
                return
            if stripped == "jl" or stripped.startswith("jl "):
                self._nested_jl(stripped)
                return
        state.buffer.append(line)
        src = "\n".join(state.buffer)
        status = check_complete(src)
        if status is Completeness.INCOMPLETE:
            return
        state.buffer = []
        self.guest.gate = state.gate
        try:
            program = parse(src)
            res = self.guest.evaluate(program, ScopingMode.SOFT)
        except ExitRequest:
            self._leave_interactive()
            return
        except StatBridgeError as exc:
            self.report_error(str(exc))
            return
        self._show_result(res.stdout, res.value, res.suppress)

    def _nested_jl(self, line: str) -> None:
        state = self._interactive
        assert state is not None
        rest = line[2:].strip()
        try:
            if not rest:
                raise ShellError("already in the interactive session")
            if rest.startswith(":"):
                raise ShellError("jl: is a host command; type the expression directly")
            self.jl_command(rest)
        except StatBridgeError as exc:
            self.report_error(str(exc))
        finally:
            self.guest.gate = state.gate

    # -- jl subcommands -------------------------------------------------------------

    @property
    def envman(self) -> EnvManager:
        if self._envman is None:
            self._envman = EnvManager(self.config.env_root, self.config.registry_root)
        return self._envman

    def jl_command(self, rest: str) -> None:
        m = re.match(r"(\w+)\s*(.*)$", rest)
        sub, args = (m.group(1), m.group(2)) if m else (rest, "")
        matches = [s for s in JL_SUBCOMMANDS if s.lower() == sub.lower()]
        if not matches:
            raise ShellError(f"unknown jl subcommand {sub!r}; {JL_USAGE}")
        sub = matches[0]
        body, opt_text = split_top(args, ",")
        if sub == "start":
            opts = parse_options(opt_text, ("threads",))
            if body.strip():
                raise ShellError("jl start takes no arguments; use jl start, threads(#|auto)")
            return self.start(opts.get("threads"))
        self.ensure_started()
        getattr(self, f"_jl_{sub.lower()}")(body.strip(), opt_text)

    def _jl_getenv(self, body: str, opt_text: Optional[str]) -> None:
        parse_options(opt_text, ())
        path, manifest = self.envman.get_env()
        self.ws.r_results["envdir"] = str(path)
        self.ws.r_results["pkgs"] = " ".join(sorted(manifest))
        self.ws.r_results["versions"] = " ".join(str(manifest[k]) for k in sorted(manifest))
        self.emit(self.envman.status_block())

    def _jl_setenv(self, body: str, opt_text: Optional[str]) -> None:
        parse_options(opt_text, ())
        env = self.envman.set_env(body or None)
        self.emit(self.envman.status_block(env))

    def _jl_addpkg(self, body: str, opt_text: Optional[str]) -> None:
        opts = parse_options(opt_text, ("minver",))
        if not body or len(body.split()) != 1:
            raise ShellError("usage: jl AddPkg name [, minver(X.Y.Z)]")
        minver = SemVer.parse(opts["minver"] or "") if "minver" in opts else None
        outcome = self.envman.add_pkg(body, minver)
        version = self.envman.environment().manifest[body]
        self.emit(f"{body} v{version} {outcome}")

    def _copy_options(self, opt_text: Optional[str], allowed) -> CopyOptions:
        raw = parse_options(opt_text, allowed)
        flags = {k: True for k, v in raw.items() if k in ("nolabel", "nomissing", "doubleonly", "replace", "clear")}
        for k in flags:
            if raw[k] is not None:
                raise ShellError(f"option {k} takes no argument")
        opts = CopyOptions(**flags)
        for k in ("destination", "source"):
            if k in raw:
                if not raw[k]:
                    raise ShellError(f"option {k}() requires a name")
                setattr(opts, k, raw[k])
        if "cols" in raw:
            opts.cols = (raw["cols"] or "").split()
        return opts

    def _transfer_done(self, report: bridge.TransferReport) -> None:
        if report.warnings:
            self.emit(f"({report.warnings} values out of range stored as missing)")
        if self.config.timing_enabled:
            self.emit(report.line(), "timing")

    def _jl_save(self, body: str, opt_text: Optional[str]) -> None:
        opts = self._copy_options(opt_text, ("nolabel", "nomissing", "doubleonly"))
        if len(body.split()) > 1:
            raise ShellError("usage: jl save [dataframename] [, nolabel nomissing doubleonly]")
        name = body or bridge.DEFAULT_NAME
        report = bridge.save_df(self.ws, self.guest.globals, name, opts, self.thread_limit)
        self.emit(f"Data saved to DataFrame {name}")
        self._transfer_done(report)

    def _jl_use(self, body: str, opt_text: Optional[str]) -> None:
        opts = self._copy_options(opt_text, ("clear",))
        varlist = None
        if re.search(r"\busing\b", body):
            left, _, right = re.split(r"\b(using)\b", body, maxsplit=1)
            varlist = left.split() or None
            dfname = right.strip()
        else:
            dfname = body
        if not dfname or len(dfname.split()) != 1:
            raise ShellError("usage: jl use dataframename [, clear] | jl use varlist using dataframename [, clear]")
        report = bridge.use_df(self.ws, self.guest.globals, dfname, varlist, opts, self.thread_limit)
        self._transfer_done(report)

    def _restricted(self, body: str) -> tuple:
        clauses = split_clauses(body)
        restriction = clauses.restriction(self.ws)
        return clauses.body, restriction

    def _jl_putvarstodf(self, body: str, opt_text: Optional[str]) -> None:
        opts = self._copy_options(opt_text, ("destination", "cols", "nolabel", "nomissing", "doubleonly"))
        varlist, restriction = self._restricted(body)
        report = bridge.put_vars_to_df(self.ws, self.guest.globals, varlist or None, restriction, opts, self.thread_limit)
        self._transfer_done(report)

    def _jl_getvarsfromdf(self, body: str, opt_text: Optional[str]) -> None:
        opts = self._copy_options(opt_text, ("cols", "source", "replace", "nomissing"))
        varlist, restriction = self._restricted(body)
        if not varlist:
            raise ShellError("varlist required")
        report = bridge.get_vars_from_df(
            self.ws, self.guest.globals, varlist.split(), restriction, opts, self.thread_limit
        )
        self._transfer_done(report)

    def _jl_putvarstomat(self, body: str, opt_text: Optional[str]) -> None:
        opts = self._copy_options(opt_text, ("destination",))
        if not opts.destination:
            raise ShellError("option destination() required")
        varlist, restriction = self._restricted(body)
        report = bridge.put_vars_to_mat(self.ws, self.guest.globals, varlist or None, restriction, opts, self.thread_limit)
        self._transfer_done(report)

    def _jl_getvarsfrommat(self, body: str, opt_text: Optional[str]) -> None:
        opts = self._copy_options(opt_text, ("source", "replace"))
        varlist, restriction = self._restricted(body)
        if not varlist:
            raise ShellError("varlist required")
        report = bridge.get_vars_from_mat(self.ws, self.guest.globals, expand_new_names(varlist), restriction, opts)
        self._transfer_done(report)

    def _jl_putmattomat(self, body: str, opt_text: Optional[str]) -> None:
        opts = self._copy_options(opt_text, ("destination",))
        if len(body.split()) != 1:
            raise ShellError("usage: jl PutMatToMat matname [, destination(name)]")
        self._transfer_done(bridge.put_mat_to_mat(self.ws, self.guest.globals, body, opts))

    def _jl_getmatfrommat(self, body: str, opt_text: Optional[str]) -> None:
        opts = self._copy_options(opt_text, ("source",))
        if len(body.split()) != 1:
            raise ShellError("usage: jl GetMatFromMat matname [, source(name)]")
        self._transfer_done(bridge.get_mat_from_mat(self.ws, self.guest.globals, body, opts))

    # -- host plumbing commands --------------------------------------------------------

    def _host_commands(self) -> Dict[str, Callable[[str], None]]:
        return {
            "sysuse": self.cmd_sysuse,
            "clear": self.cmd_clear,
            "obs": self.cmd_obs,
            "set": self.cmd_set,
            "genvar": self.cmd_genvar,
            "drawnorm": self.cmd_drawnorm,
            "replace": self.cmd_replace,
            "label": self.cmd_label,
            "matrix": self.cmd_matrix,
            "scalar": self.cmd_scalar,
            "local": self.cmd_local,
            "global": self.cmd_global,
            "display": self.cmd_display,
            "use": self.cmd_use,
            "save": self.cmd_save,
            "list": self.cmd_list,
            "describe": self.cmd_describe,
            "keep": self.cmd_keep,
            "drop": self.cmd_drop,
            "return": self.cmd_return,
            "bench": self.cmd_bench,
        }

    def cmd_sysuse(self, rest: str) -> None:
        name, opt_text = split_top(rest, ",")
        opts = parse_options(opt_text, ("clear",))
        if name.strip() != "auto":
            raise ShellError(f"dataset {name.strip() or '(none)'} not found; the built-in dataset is auto")
        if self.ws.dirty and "clear" not in opts:
            raise ShellError("no; data in memory would be lost")
        fixtures.load_auto(self.ws)
        self.emit("(auto-like fixture data, 74 observations)")

    def cmd_clear(self, rest: str) -> None:
        if rest:
            raise ShellError("clear takes no arguments")
        self.ws.clear()

    def cmd_obs(self, rest: str) -> None:
        try:
            n = int(rest.replace(",", ""))
        except ValueError:
            raise ShellError(f"obs requires an integer, got {rest!r}") from None
        before = self.ws.dataset.nobs
        self.ws.set_obs(n)
        self.emit(f"Number of observations (_N) was {format_count(before)}, now {format_count(n)}.")

    def cmd_set(self, rest: str) -> None:
        what, _, value = rest.partition(" ")
        value = value.strip()
        if what == "obs":
            return self.cmd_obs(value)
        if what == "rmsg":
            if value not in ("on", "off"):
                raise ShellError("usage: set rmsg on|off")
            self.config.timing_enabled = value == "on"
            return
        raise ShellError(f"set {what}: unknown setting")

    def _new_variable(self, name: str, stype: StorageType, data) -> None:
        check_identifier(name)
        if self.ws.dataset.has(name):
            raise ShellError(f"variable {name} already defined")
        self.ws.add_variable(Variable(name, stype, data))

    def cmd_genvar(self, rest: str) -> None:
        m = re.fullmatch(r"(\w+)\s+(\w+)\s*=\s*(\w+)\s*(.*)", rest)
        if not m:
            raise ShellError("usage: genvar name type = seq | const v | normal seed | uniformint a b seed")
        name, tname, rule, args = m.group(1), m.group(2), m.group(3), m.group(4).split()
        stype = StorageType.parse(tname)
        n = self.ws.dataset.nobs
        if stype.is_string:
            if rule != "const" or len(args) != 1:
                raise ShellError("string variables support only: const \"text\"")
            self._new_variable(name, stype, [args[0].strip('"')] * n)
            return
        if rule == "seq" and not args:
            values = np.arange(1, n + 1, dtype=np.float64)
        elif rule == "const" and len(args) == 1:
            values = np.full(n, self._number_or_missing(args[0]))
        elif rule == "normal" and len(args) == 1:
            values = np.random.default_rng(int(args[0])).standard_normal(n)
        elif rule == "uniformint" and len(args) == 3:
            a, b, seed = (int(x) for x in args)
            values = np.random.default_rng(seed).integers(a, b + 1, n).astype(np.float64)
        else:
            raise ShellError(f"genvar: bad fill rule '{rule} {' '.join(args)}'")
        cells, overflow = narrow_from_double(stype, values)
        self._new_variable(name, stype, cells)
        if overflow:
            self.emit(f"({overflow} values out of range stored as missing)")

    @staticmethod
    def _number_or_missing(tok: str) -> float:
        if tok.startswith("."):
            try:
                return double_missing(parse_missing_name(tok))
            except Exception:
                pass
        try:
            return float(tok)
        except ValueError:
            raise ShellError(f"{tok!r} is not a number") from None

    def cmd_drawnorm(self, rest: str) -> None:
        body, opt_text = split_top(rest, ",")
        opts = parse_options(opt_text, ("seed",))
        words = body.split()
        stype = StorageType.FLOAT
        if words and words[0] in ("float", "double"):
            stype = StorageType.parse(words.pop(0))
        names = expand_new_names(" ".join(words))
        if not names:
            raise ShellError("usage: drawnorm [float|double] newvarlist [, seed(#)]")
        seed = int(opts["seed"]) if opts.get("seed") else 12345
        block = np.random.default_rng(seed).standard_normal((self.ws.dataset.nobs, len(names)))
        for n in names:
            if self.ws.dataset.has(n):
                raise ShellError(f"variable {n} already defined")
        for j, n in enumerate(names):
            cells, _ = narrow_from_double(stype, np.ascontiguousarray(block[:, j]))
            self._new_variable(n, stype, cells)

    def cmd_replace(self, rest: str) -> None:
        clauses = split_clauses(rest)
        m = re.fullmatch(r"(\w+)\s*=\s*(.+)", clauses.body)
        if not m:
            raise ShellError("usage: replace var = exp [if] [in]")
        name, expr = m.group(1), m.group(2)
        var = self.ws.dataset.get(name)
        rows = clauses.restriction(self.ws).indices(self.ws.dataset.nobs)
        value = HostExpr(self.ws, dataset=True).evaluate(expr)
        arr = np.broadcast_to(np.asarray(value), (self.ws.dataset.nobs,))
        if var.stype.is_string != (arr.dtype == object or arr.dtype.kind == "U"):
            raise ShellError("type mismatch")
        self.ws._mutating()
        if var.stype.is_string:
            for r in rows:
                var.data[int(r)] = str(arr[r])  # type: ignore[index]
        else:
            cells, overflow = narrow_from_double(var.stype, np.asarray(arr[rows], dtype=np.float64))
            var.data[rows] = cells  # type: ignore[index]
            if overflow:
                self.emit(f"({overflow} values out of range stored as missing)")
        self.emit(f"({len(rows)} real change{'s' if len(rows) != 1 else ''} made)")

    def cmd_label(self, rest: str) -> None:
        verb, _, args = rest.partition(" ")
        if verb == "define":
            m = re.match(r"(\w+)\s+(.*)$", args.strip())
            if not m:
                raise ShellError('usage: label define name # "text" [# "text" ...]')
            pairs = re.findall(r'(-?\d+)\s+"([^"]*)"', m.group(2))
            leftover = re.sub(r'(-?\d+)\s+"([^"]*)"', "", m.group(2)).strip()
            if not pairs or leftover:
                raise ShellError('usage: label define name # "text" [# "text" ...]')
            self.ws.define_labels(m.group(1), {int(k): v for k, v in pairs})
            return
        if verb == "values":
            parts = args.split()
            if len(parts) not in (1, 2):
                raise ShellError("usage: label values var [name]")
            self.ws.attach_labels(parts[0], parts[1] if len(parts) == 2 else None)
            return
        raise ShellError("usage: label define ... | label values ...")

    def cmd_matrix(self, rest: str) -> None:
        if rest.startswith("list "):
            name = rest[5:].strip()
            mat = self.ws.matrix(name)
            label_w = len(f"r{mat.rows}")
            self.emit(f"{name}[{mat.rows},{mat.cols}]")
            self.emit(" " * label_w + "".join(f"c{j + 1}".rjust(12) for j in range(mat.cols)))
            for i in range(mat.rows):
                cells = "".join(format_number(x).rjust(12) for x in mat.data[i])
                self.emit(f"r{i + 1}".ljust(label_w) + cells)
            return
        if rest.startswith("define "):
            rest = rest[7:]
        m = re.fullmatch(r"(\w+)\s*=\s*(.+)", rest.strip())
        if not m:
            raise ShellError("usage: matrix name = (a,b\\c,d) | matrix name = J(r,c,v) | matrix list name")
        name, rhs = m.group(1), m.group(2).strip()
        j = re.fullmatch(r"J\(\s*(\d+)\s*,\s*(\d+)\s*,\s*(\S+?)\s*\)", rhs)
        if j:
            r, c = int(j.group(1)), int(j.group(2))
            if r < 1 or c < 1:
                raise ShellError("matrix dimensions must be at least 1x1")
            data = np.full((r, c), self._number_or_missing(j.group(3)))
        elif rhs.startswith("(") and rhs.endswith(")"):
            rows = [row.split(",") for row in rhs[1:-1].split("\\")]
            if len({len(r) for r in rows}) != 1:
                raise ShellError("matrix rows differ in length")
            data = np.array([[self._number_or_missing(x.strip()) for x in row] for row in rows])
        else:
            raise ShellError("usage: matrix name = (a,b\\c,d) | matrix name = J(r,c,v)")
        self.ws.define_object("matrix", name, data)

    def cmd_scalar(self, rest: str) -> None:
        if rest == "list" or rest.startswith("list "):
            names = rest[4:].split() or sorted(self.ws.scalars)
            for n in names:
                if n not in self.ws.scalars:
                    raise ShellError(f"scalar {n} not found")
                self.emit(f"{n.rjust(12)} = {format_number(self.ws.scalars[n])}")
            return
        if rest.startswith("define "):
            rest = rest[7:]
        m = re.fullmatch(r"(\w+)\s*=\s*(.+)", rest.strip())
        if not m:
            raise ShellError("usage: scalar name = exp | scalar list [names]")
        value = HostExpr(self.ws).evaluate(m.group(2))
        if isinstance(value, str) or np.ndim(value) != 0:
            raise ShellError("type mismatch; scalars hold numbers")
        self.ws.define_object("scalar", m.group(1), float(value))

    def _macro_value(self, text: str) -> str:
        text = text.strip()
        if text.startswith("="):
            value = HostExpr(self.ws).evaluate(text[1:])
            return value if isinstance(value, str) else format_number(float(np.asarray(value).ravel()[0]))
        if len(text) >= 2 and text[0] == '"' and text[-1] == '"':
            return text[1:-1]
        return text

    def cmd_local(self, rest: str) -> None:
        m = re.fullmatch(r"([A-Za-z_]\w*)\s*(.*)", rest)
        if not m:
            raise ShellError("usage: local name [=exp | text]")
        self.ws.set_local(m.group(1), self._macro_value(m.group(2)))

    def cmd_global(self, rest: str) -> None:
        m = re.fullmatch(r"([A-Za-z_]\w*)\s*(.*)", rest)
        if not m:
            raise ShellError("usage: global name [=exp | text]")
        self.ws.globals[m.group(1)] = self._macro_value(m.group(2))

    def cmd_display(self, rest: str) -> None:
        parts = []
        for piece in _display_pieces(rest):
            if piece.startswith('"'):
                parts.append(piece[1:-1])
            elif piece.startswith("$"):
                parts.append(self.ws.globals.get(piece[1:], ""))
            else:
                value = HostExpr(self.ws).evaluate(piece)
                parts.append(value if isinstance(value, str) else format_number(float(value)))
        self.emit("".join(parts) if parts else " ")

    def cmd_use(self, rest: str) -> None:
        path, opt_text = split_top(rest, ",")
        opts = parse_options(opt_text, ("clear",))
        if self.ws.dirty and "clear" not in opts:
            raise ShellError("no; data in memory would be lost")
        self.ws.load(Path(path.strip().strip('"')))

    def cmd_save(self, rest: str) -> None:
        path_text, opt_text = split_top(rest, ",")
        opts = parse_options(opt_text, ("replace",))
        path = Path(path_text.strip().strip('"'))
        if not path_text.strip():
            raise ShellError("usage: save filename [, replace]")
        if path.exists() and "replace" not in opts:
            raise ShellError(f"file {path} already exists")
        self.ws.store(path)
        self.emit(f"file {path} saved")

    def cmd_list(self, rest: str) -> None:
        clauses = split_clauses(rest)
        names = self.ws.dataset.expand_varlist(clauses.body or None)
        rows = clauses.restriction(self.ws).indices(self.ws.dataset.nobs)
        table = [[cell_text(self.ws, n, int(r)) for n in names] for r in rows]
        widths = [max([len(n)] + [len(row[k]) for row in table]) for k, n in enumerate(names)]
        numw = max(len(str(self.ws.dataset.nobs)), 1)
        self.emit(" " * (numw + 3) + "  ".join(n.rjust(w) for n, w in zip(names, widths)))
        for r, row in zip(rows, table):
            self.emit(f"{str(int(r) + 1).rjust(numw)}. " + " " + "  ".join(t.rjust(w) for t, w in zip(row, widths)))

    def cmd_describe(self, rest: str) -> None:
        ds = self.ws.dataset
        names = ds.expand_varlist(rest or None)
        self.emit(f"obs: {format_count(ds.nobs)}  vars: {ds.nvar}")
        for n in names:
            var = ds.get(n)
            label = var.label_table or ""
            self.emit(f"  {n.ljust(16)} {var.stype.value.ljust(7)} {label}".rstrip())

    def cmd_keep(self, rest: str) -> None:
        self.ws.keep(self.ws.dataset.expand_varlist(rest))

    def cmd_drop(self, rest: str) -> None:
        if not rest:
            raise ShellError("varlist required")
        self.ws.drop(self.ws.dataset.expand_varlist(rest))

    def cmd_return(self, rest: str) -> None:
        if rest.strip() != "list":
            raise ShellError("usage: return list")
        for k in sorted(self.ws.r_results):
            self.emit(f"  r({k}) : \"{self.ws.r_results[k]}\"")

    def cmd_bench(self, rest: str) -> None:
        kernel, opt_text = split_top(rest, ",")
        raw = parse_options(opt_text, ("n", "m", "seed", "nomissing", "doubleonly"))
        kernel = kernel.strip()
        try:
            n = int(raw.get("n") or (1000 if kernel == "xqx" else 100000))
            m = int(raw.get("m") or 10)
            seed = int(raw.get("seed") or 1)
        except ValueError:
            raise ShellError("bench options n(), m() and seed() take integers") from None
        opts = CopyOptions(nomissing="nomissing" in raw, doubleonly="doubleonly" in raw)
        spec = BenchSpec(kernel, n, m, seed, opts)
        self.ensure_started()
        report = run_bench(spec, self.thread_limit)
        for line in report.lines():
            self.emit(line, "timing" if "secs=" in line or "throughput" in line else "output")


def _display_pieces(text: str) -> List[str]:
    """Split a display argument list into quoted strings and expressions."""
    pieces: List[str] = []
    i = 0
    text = text.strip()
    while i < len(text):
        if text[i].isspace():
            i += 1
            continue
        if text[i] == '"':
            j = text.find('"', i + 1)
            if j < 0:
                raise ShellError("unmatched quote")
            pieces.append(text[i : j + 1])
            i = j + 1
            continue
        j = i
        depth = 0
        while j < len(text) and not (depth == 0 and (text[j].isspace() or text[j] == '"')):
            if text[j] in "([":
                depth += 1
            elif text[j] in ")]":
                depth -= 1
            j += 1
        if pieces and not pieces[-1].startswith('"'):
            pieces[-1] += " " + text[i:j]
        else:
            pieces.append(text[i:j])
        i = j
    return pieces

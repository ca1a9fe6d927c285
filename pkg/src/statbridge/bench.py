"""Benchmark kernels: the quadratic-form row norm and bulk column copies.

Both kernels run against a scratch workspace and a scratch guest, so a
benchmark never disturbs the user's data.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import bridge
from .bridge import CopyOptions, TransferReport
from .errors import ShellError
from .guest.interp import Interpreter
from .guest.values import GuestMatrix, GuestVector
from .storage import StorageType
from .workspace import Variable, Workspace

# refuse to allocate more than this for a benchmark's working set
MAX_BENCH_BYTES = 2 * 1024**3

XQX_SOURCE = """
function XQX(Q, X)
  N, M = size(X)
  retval = zeros(N)
  for i in 1:N
    for j in 1:M
      for k in 1:M
        retval[i] += X[i,j] * Q[j,k] * X[i,k]
      end
    end
  end
  return retval
end
"""


@dataclass
class BenchSpec:
    kernel: str
    n: int
    m: int
    seed: int = 1
    opts: CopyOptions = field(default_factory=CopyOptions)

    def __post_init__(self) -> None:
        if self.kernel not in ("xqx", "copy"):
            raise ShellError(f"unknown benchmark kernel {self.kernel!r}; use xqx or copy")
        if self.n < 1 or self.m < 1:
            raise ShellError("benchmark dimensions must be at least 1")
        # X is held three times over: the source plus one copy per side
        need = 3 * self.n * self.m * 8
        if need > MAX_BENCH_BYTES:
            raise ShellError(
                f"benchmark needs about {need / 1024**3:.1f} GiB; limit is {MAX_BENCH_BYTES / 1024**3:.0f} GiB"
            )


@dataclass
class BenchReport:
    kernel: str
    n: int
    m: int
    guest_secs: float = 0.0
    host_secs: float = 0.0
    max_rel_diff: Optional[float] = None
    transfer: Optional[TransferReport] = None
    result: Optional[np.ndarray] = None

    def lines(self) -> List[str]:
        if self.kernel == "xqx":
            return [
                f"xqx n={self.n} m={self.m}",
                f"  guest triple loop: secs={self.guest_secs:.4f}",
                f"  host rowsum((X*Q):*X): secs={self.host_secs:.4f}",
                f"  max relative difference: {self.max_rel_diff:.3e}",
            ]
        assert self.transfer is not None
        return [
            self.transfer.line(),
            f"throughput={self.transfer.throughput / 1e6:.1f} MB/s",
        ]


def xqx_oracle(X: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Row-wise quadratic form ``x_i' Q x_i`` via one matrix product."""
    return ((X @ Q) * X).sum(axis=1)


def max_relative_difference(a: np.ndarray, b: np.ndarray) -> float:
    scale = np.maximum(np.abs(b), np.finfo(np.float64).tiny)
    return float(np.max(np.abs(a - b) / scale)) if a.size else 0.0


def random_xq(n: int, m: int, seed: int):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, m))
    A = rng.uniform(size=(m, m))
    return X, (A + A.T) / 2.0


def run_xqx(X: np.ndarray, Q: np.ndarray, nthreads: int = 1) -> BenchReport:
    """Copy X and Q through the bridge, then time the guest loop and the oracle."""
    n, m = X.shape
    ws = Workspace()
    ws.set_obs(n)
    for j in range(m):
        ws.add_variable(Variable(f"x{j + 1}", StorageType.DOUBLE, np.array(X[:, j], dtype=np.float64)))
    ws.define_object("matrix", "Q", np.asarray(Q, dtype=np.float64))
    interp = Interpreter(nthreads=nthreads)
    bridge.put_vars_to_mat(ws, interp.globals, None, None, CopyOptions(destination="X"), nthreads)
    bridge.put_mat_to_mat(ws, interp.globals, "Q")
    interp.evaluate(XQX_SOURCE)
    t0 = time.perf_counter()
    y = interp.evaluate("y = XQX(Q, X);").value
    guest_secs = time.perf_counter() - t0
    host_X = np.column_stack([v.data for v in ws.dataset.variables])
    t0 = time.perf_counter()
    oracle = xqx_oracle(host_X, ws.matrix("Q").data)
    host_secs = time.perf_counter() - t0
    got = y.data if isinstance(y, GuestVector) else np.asarray(y.data if isinstance(y, GuestMatrix) else y)
    return BenchReport("xqx", n, m, guest_secs, host_secs, max_relative_difference(got, oracle), result=got)


def run_copy(spec: BenchSpec, nthreads: int = 1) -> BenchReport:
    rng = np.random.default_rng(spec.seed)
    ws = Workspace()
    ws.set_obs(spec.n)
    block = rng.standard_normal((spec.n, spec.m))
    for j in range(spec.m):
        ws.add_variable(Variable(f"x{j + 1}", StorageType.DOUBLE, np.ascontiguousarray(block[:, j])))
    del block
    opts = CopyOptions(**{**spec.opts.__dict__, "destination": spec.opts.destination or "demo"})
    report = bridge.put_vars_to_df(ws, {}, None, None, opts, nthreads)
    return BenchReport("copy", spec.n, spec.m, transfer=report)


def run_bench(spec: BenchSpec, nthreads: int = 1) -> BenchReport:
    if spec.kernel == "xqx":
        X, Q = random_xq(spec.n, spec.m, spec.seed)
        return run_xqx(X, Q, nthreads)
    return run_copy(spec, nthreads)

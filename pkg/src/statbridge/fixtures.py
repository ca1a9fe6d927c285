"""Deterministic host datasets shared by demos and tests."""

from __future__ import annotations

from typing import Dict, Sequence

import numpy as np

from .storage import StorageType, encode_missing
from .workspace import Variable, Workspace

AUTO_NOBS = 74
AUTO_DOMESTIC = 52
AUTO_VARS = ("price", "mpg", "headroom", "turn", "foreign")
ORIGIN_LABELS = {0: "Domestic", 1: "Foreign"}

# The first eight and last seven rows are fixed so that a displayed frame
# has a recognisable head and tail; the middle is drawn from a seeded RNG.
_AUTO_HEAD = [
    (4099, 22, 2.5, 40),
    (4749, 17, 3.0, 40),
    (3799, 22, 3.0, 35),
    (4816, 20, 4.5, 40),
    (7827, 15, 4.0, 43),
    (5788, 18, 4.0, 43),
    (4453, 26, 3.0, 34),
    (5189, 20, 2.0, 42),
]
_AUTO_TAIL = [
    (3748, 31, 3.0, 35),
    (5719, 18, 2.0, 36),
    (7140, 23, 2.5, 36),
    (5397, 41, 3.0, 35),
    (4697, 25, 3.0, 35),
    (6850, 25, 2.0, 36),
    (11995, 17, 2.5, 37),
]


def auto_columns(seed: int = 1978) -> Dict[str, np.ndarray]:
    rng = np.random.default_rng(seed)
    n_mid = AUTO_NOBS - len(_AUTO_HEAD) - len(_AUTO_TAIL)
    mid = np.column_stack(
        [
            rng.integers(3291, 15906, n_mid),
            rng.integers(12, 36, n_mid),
            rng.integers(3, 11, n_mid) / 2.0,
            rng.integers(31, 52, n_mid),
        ]
    )
    rows = np.vstack([np.array(_AUTO_HEAD, dtype=float), mid, np.array(_AUTO_TAIL, dtype=float)])
    foreign = np.zeros(AUTO_NOBS, dtype=np.int8)
    foreign[AUTO_DOMESTIC:] = 1
    return {
        "price": rows[:, 0].astype(np.int16),
        "mpg": rows[:, 1].astype(np.int16),
        "headroom": rows[:, 2].astype(np.float32),
        "turn": rows[:, 3].astype(np.int16),
        "foreign": foreign,
    }


def load_auto(ws: Workspace, seed: int = 1978) -> None:
    """Replace the workspace dataset with the 74-row auto-like fixture."""
    cols = auto_columns(seed)
    types = {
        "price": StorageType.INT,
        "mpg": StorageType.INT,
        "headroom": StorageType.FLOAT,
        "turn": StorageType.INT,
        "foreign": StorageType.BYTE,
    }
    ws.clear()
    ws.set_obs(AUTO_NOBS)
    for name in AUTO_VARS:
        ws.add_variable(Variable(name, types[name], cols[name].astype(types[name].dtype)))
    ws.define_labels("origin", ORIGIN_LABELS)
    ws.attach_labels("foreign", "origin")
    ws.dirty = False


def fill_normal(ws: Workspace, names: Sequence[str], nobs: int, seed: int) -> None:
    """Add SDouble standard-normal columns, one seeded stream for the block."""
    rng = np.random.default_rng(seed)
    if ws.dataset.nobs < nobs:
        ws.set_obs(nobs)
    block = rng.standard_normal((ws.dataset.nobs, len(names)))
    for j, name in enumerate(names):
        ws.add_variable(Variable(name, StorageType.DOUBLE, np.ascontiguousarray(block[:, j])))


def mixed_dataset(ws: Workspace, nobs: int, seed: int, missing_rate: float = 0.05) -> None:
    """Eight columns covering every storage family, with scattered missings.

    Missing cells draw their flavor uniformly from all 27 codes, and the
    labeled byte column carries a value label table.
    """
    rng = np.random.default_rng(seed)
    ws.clear()
    ws.set_obs(nobs)
    specs = [
        ("b", StorageType.BYTE, lambda: rng.integers(-100, 101, nobs)),
        ("lab", StorageType.BYTE, lambda: rng.integers(0, 4, nobs)),
        ("i", StorageType.INT, lambda: rng.integers(-32000, 32000, nobs)),
        ("l", StorageType.LONG, lambda: rng.integers(-(2**31) + 1, 2**31 - 28, nobs)),
        ("f", StorageType.FLOAT, lambda: rng.standard_normal(nobs) * 1e3),
        ("d", StorageType.DOUBLE, lambda: rng.standard_normal(nobs)),
        ("d2", StorageType.DOUBLE, lambda: rng.uniform(-1e6, 1e6, nobs)),
        ("s", StorageType.STR, None),
    ]
    for name, stype, draw in specs:
        miss = rng.random(nobs) < missing_rate
        if stype.is_string:
            words = np.array(["alpha", "beta", "gamma", "delta", "épsilon"], dtype=object)
            cells = words[rng.integers(0, len(words), nobs)]
            cells[miss] = ""
            ws.add_variable(Variable(name, stype, list(cells)))
            continue
        data = np.asarray(draw(), dtype=stype.dtype)  # type: ignore[misc]
        codes = rng.integers(0, 27, nobs)
        for k in np.unique(codes[miss]):
            data[miss & (codes == k)] = encode_missing(int(k), stype)
        ws.add_variable(Variable(name, stype, data))
    ws.define_labels("grade", {0: "low", 1: "mid", 2: "high", 3: "top"})
    ws.attach_labels("lab", "grade")
    ws.dirty = False

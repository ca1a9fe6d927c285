from __future__ import annotations

import io
from pathlib import Path

import pytest

from statbridge import fixtures
from statbridge.envman import Registry
from statbridge.shell import SessionConfig, Shell
from statbridge.workspace import Workspace


@pytest.fixture
def ws() -> Workspace:
    return Workspace()


@pytest.fixture
def auto_ws() -> Workspace:
    w = Workspace()
    fixtures.load_auto(w)
    return w


@pytest.fixture
def registry(tmp_path: Path) -> Registry:
    return Registry.build(
        tmp_path / "registry",
        {"alpha": ["1.2.0", "1.3.1"], "beta": ["0.1.0"], "dataframes-core": ["1.6.1", "1.7.0"]},
    )


class ShellHarness:
    """A scripted shell whose printed output is captured in a buffer."""

    def __init__(self, root: Path) -> None:
        self.buf = io.StringIO()
        config = SessionConfig(env_root=root / "envs", registry_root=root / "registry")
        self.shell = Shell(config, write=self.buf.write)

    def run(self, *lines: str) -> str:
        start = self.buf.tell()
        for line in lines:
            self.shell.feed(line)
        return self.buf.getvalue()[start:]

    @property
    def ws(self):
        return self.shell.ws


@pytest.fixture
def harness(tmp_path: Path, registry: Registry) -> ShellHarness:
    return ShellHarness(tmp_path)

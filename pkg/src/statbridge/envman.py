"""Directory-backed package environments over a local file registry.

An environment is a directory holding ``Manifest.txt``. The default
environment is the environment root itself and named environments are its
subdirectories. The registry is a directory tree ``<root>/<pkg>/<X.Y.Z>/``
whose leaf directory names list the versions available for each package.

Installing a package writes its manifest line and an empty marker
directory ``.pkgs/<pkg>/<X.Y.Z>``. Nothing executable is ever copied.
"""

from __future__ import annotations

import re
import shutil
from dataclasses import dataclass
from functools import total_ordering
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple

from .errors import EnvError

MANIFEST_NAME = "Manifest.txt"
MARKER_DIR = ".pkgs"
DEFAULT_ENV = "."

_SEMVER = re.compile(r"^(0|[1-9]\d*)\.(0|[1-9]\d*)\.(0|[1-9]\d*)$")
_ENV_NAME = re.compile(r"^[A-Za-z0-9_][A-Za-z0-9_-]*$")
_PKG_NAME = re.compile(r"^[A-Za-z][A-Za-z0-9_-]*$")


@total_ordering
@dataclass(frozen=True)
class SemVer:
    major: int
    minor: int
    patch: int

    def __post_init__(self) -> None:
        for part in (self.major, self.minor, self.patch):
            if isinstance(part, bool) or not isinstance(part, int) or part < 0:
                raise EnvError(f"version parts must be nonnegative integers, got {part!r}")

    @classmethod
    def parse(cls, text: str) -> SemVer:
        m = _SEMVER.match(text.strip())
        if not m:
            raise EnvError(f"invalid version {text!r}; expected X.Y.Z")
        return cls(int(m.group(1)), int(m.group(2)), int(m.group(3)))

    def key(self) -> Tuple[int, int, int]:
        return (self.major, self.minor, self.patch)

    def __lt__(self, other: object) -> bool:
        if not isinstance(other, SemVer):
            return NotImplemented
        return self.key() < other.key()

    def __str__(self) -> str:
        return f"{self.major}.{self.minor}.{self.patch}"


DEFAULT_PACKAGES: Dict[str, SemVer] = {
    "dataframes-core": SemVer(1, 6, 1),
    "categorical-arrays": SemVer(0, 10, 8),
}

Manifest = Dict[str, SemVer]


def format_manifest(manifest: Manifest) -> str:
    return "".join(f"{name} {manifest[name]}\n" for name in sorted(manifest))


def parse_manifest(text: str) -> Manifest:
    out: Manifest = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 2 or not _PKG_NAME.match(parts[0]):
            raise EnvError(f"{MANIFEST_NAME} line {lineno}: expected 'name X.Y.Z', got {line!r}")
        if parts[0] in out:
            raise EnvError(f"{MANIFEST_NAME} line {lineno}: duplicate package {parts[0]}")
        out[parts[0]] = SemVer.parse(parts[1])
    return out


class Registry:
    """Read-only view of a registry directory."""

    def __init__(self, root: Path | str) -> None:
        self.root = Path(root)

    def packages(self) -> List[str]:
        if not self.root.is_dir():
            return []
        return sorted(p.name for p in self.root.iterdir() if p.is_dir() and self.versions_or_none(p.name))

    def versions_or_none(self, name: str) -> Optional[List[SemVer]]:
        pkg = self.root / name
        if not pkg.is_dir():
            return None
        found = []
        for child in pkg.iterdir():
            if child.is_dir() and _SEMVER.match(child.name):
                found.append(SemVer.parse(child.name))
        return sorted(found) or None

    def versions(self, name: str) -> List[SemVer]:
        found = self.versions_or_none(name)
        if found is None:
            raise EnvError(f"package {name} not found in registry {self.root}")
        return found

    @classmethod
    def build(cls, root: Path | str, contents: Dict[str, Iterable[str]]) -> Registry:
        """Create registry directories for ``{package: [versions]}``."""
        root = Path(root)
        for name, versions in contents.items():
            if not _PKG_NAME.match(name):
                raise EnvError(f"invalid package name {name!r}")
            for v in versions:
                (root / name / str(SemVer.parse(v))).mkdir(parents=True, exist_ok=True)
        return cls(root)


@dataclass
class Environment:
    name: str
    path: Path
    manifest: Manifest

    @property
    def manifest_path(self) -> Path:
        return self.path / MANIFEST_NAME

    @property
    def display_name(self) -> str:
        return "default" if self.name == DEFAULT_ENV else self.name


class EnvManager:
    def __init__(self, env_root: Path | str, registry: Registry | Path | str) -> None:
        self.env_root = Path(env_root)
        self.registry = registry if isinstance(registry, Registry) else Registry(registry)
        self.current = DEFAULT_ENV

    # -- paths and persistence ----------------------------------------------

    def env_path(self, name: str) -> Path:
        return self.env_root if name == DEFAULT_ENV else self.env_root / name

    def _check_name(self, name: str) -> str:
        if name == DEFAULT_ENV:
            return name
        if not _ENV_NAME.match(name) or name == MARKER_DIR:
            raise EnvError(f"invalid environment name {name!r}")
        return name

    def read_manifest(self, name: str) -> Manifest:
        path = self.env_path(name) / MANIFEST_NAME
        return parse_manifest(path.read_text(encoding="utf-8"))

    def _write_manifest(self, name: str, manifest: Manifest) -> None:
        path = self.env_path(name) / MANIFEST_NAME
        tmp = path.with_suffix(".tmp")
        tmp.write_text(format_manifest(manifest), encoding="utf-8")
        tmp.replace(path)

    def _mark(self, name: str, pkg: str, old: Optional[SemVer], new: SemVer) -> None:
        base = self.env_path(name) / MARKER_DIR / pkg
        if old is not None:
            shutil.rmtree(base / str(old), ignore_errors=True)
        (base / str(new)).mkdir(parents=True, exist_ok=True)

    def exists(self, name: str) -> bool:
        return (self.env_path(name) / MANIFEST_NAME).is_file()

    def ensure(self, name: str) -> bool:
        """Create and seed ``name`` if absent. Returns True when created."""
        if self.exists(name):
            return False
        self.env_path(name).mkdir(parents=True, exist_ok=True)
        for pkg, ver in DEFAULT_PACKAGES.items():
            self._mark(name, pkg, None, ver)
        self._write_manifest(name, dict(DEFAULT_PACKAGES))
        return True

    def environment(self, name: Optional[str] = None) -> Environment:
        name = self.current if name is None else name
        self.ensure(name)
        return Environment(name, self.env_path(name), self.read_manifest(name))

    # -- commands -----------------------------------------------------------

    def get_env(self) -> Tuple[Path, Manifest]:
        env = self.environment()
        return env.path, env.manifest

    def set_env(self, name: Optional[str] = None) -> Environment:
        name = self._check_name(name or DEFAULT_ENV)
        self.ensure(name)
        self.current = name
        return self.environment()

    def add_pkg(self, pkg: str, minver: Optional[SemVer | str] = None) -> str:
        """Install or upgrade ``pkg``; returns "installed", "upgraded" or "unchanged"."""
        if isinstance(minver, str):
            minver = SemVer.parse(minver)
        available = self.registry.versions(pkg)
        highest = available[-1]
        if minver is not None and minver > highest:
            raise EnvError(f"no version of {pkg} in the registry satisfies minver({minver}); highest is {highest}")
        env = self.environment()
        installed = env.manifest.get(pkg)
        if installed is not None and (minver is None or installed >= minver):
            return "unchanged"
        manifest = dict(env.manifest)
        manifest[pkg] = highest
        self._mark(env.name, pkg, installed, highest)
        self._write_manifest(env.name, manifest)
        return "installed" if installed is None else "upgraded"

    def status_block(self, env: Optional[Environment] = None) -> str:
        env = env or self.environment()
        lines = [
            f"Current environment: {env.display_name}, at {env.path}",
            "",
            f"Status '{env.manifest_path}'",
        ]
        lines.extend(f"  {name} v{env.manifest[name]}" for name in sorted(env.manifest))
        return "\n".join(lines)

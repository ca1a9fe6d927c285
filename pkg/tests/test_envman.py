from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from statbridge.envman import (
    DEFAULT_PACKAGES,
    MANIFEST_NAME,
    EnvManager,
    Registry,
    SemVer,
    format_manifest,
    parse_manifest,
)
from statbridge.errors import EnvError


@pytest.fixture
def manager(tmp_path, registry):
    return EnvManager(tmp_path / "envs", registry)


def _pin(manager: EnvManager, pkg: str, version: str) -> None:
    env = manager.environment()
    manifest = dict(env.manifest)
    manifest[pkg] = SemVer.parse(version)
    env.manifest_path.write_text(format_manifest(manifest), encoding="utf-8")


def test_default_environment_is_seeded(manager):
    path, manifest = manager.get_env()
    assert manifest == DEFAULT_PACKAGES
    assert (path / MANIFEST_NAME).is_file()
    assert (path / ".pkgs" / "dataframes-core" / "1.6.1").is_dir()


def test_set_env_creates_seeded_subdirectory(manager):
    env = manager.set_env("myenv")
    assert env.path == manager.env_root / "myenv"
    assert env.manifest == DEFAULT_PACKAGES
    assert manager.set_env(".").display_name == "default"


def test_add_pkg_fresh_installs_highest(manager):
    assert manager.add_pkg("alpha") == "installed"
    assert manager.environment().manifest["alpha"] == SemVer(1, 3, 1)


@pytest.mark.parametrize(
    "installed, minver, outcome, final",
    [
        (None, None, "installed", "1.3.1"),
        ("1.2.0", "1.3.0", "upgraded", "1.3.1"),
        ("1.3.1", "1.2.0", "unchanged", "1.3.1"),
    ],
)
def test_add_pkg_three_cases(manager, installed, minver, outcome, final):
    if installed:
        _pin(manager, "alpha", installed)
    assert manager.add_pkg("alpha", minver) == outcome
    assert str(manager.environment().manifest["alpha"]) == final


def test_add_pkg_errors(manager):
    with pytest.raises(EnvError):
        manager.add_pkg("nosuch")
    with pytest.raises(EnvError, match="satisfies"):
        manager.add_pkg("alpha", "9.0.0")


def test_add_pkg_is_idempotent_once_satisfied(manager):
    manager.add_pkg("alpha", "1.3.0")
    before = manager.environment().manifest_path.read_text()
    assert manager.add_pkg("alpha", "1.3.0") == "unchanged"
    assert manager.environment().manifest_path.read_text() == before


def test_set_env_leaves_other_environments_alone(manager):
    manager.add_pkg("beta")
    default_text = manager.environment(".").manifest_path.read_text()
    manager.set_env("other")
    manager.add_pkg("alpha")
    assert manager.environment(".").manifest_path.read_text() == default_text
    assert "alpha" not in manager.environment(".").manifest


def test_invalid_environment_name(manager):
    with pytest.raises(EnvError):
        manager.set_env("../escape")


def test_status_block(manager):
    lines = manager.status_block().splitlines()
    assert lines[0].startswith("Current environment: default, at ")
    assert lines[1] == ""
    assert lines[3:] == ["  categorical-arrays v0.10.8", "  dataframes-core v1.6.1"]


def test_registry_build_sorts_versions(tmp_path):
    reg = Registry.build(tmp_path / "r", {"p": ["1.10.0", "1.2.0", "1.9.9"]})
    assert [str(v) for v in reg.versions("p")] == ["1.2.0", "1.9.9", "1.10.0"]


_versions = st.builds(SemVer, st.integers(0, 30), st.integers(0, 30), st.integers(0, 30))


@settings(max_examples=150, deadline=None)
@given(_versions, _versions, _versions)
def test_semver_total_order(a, b, c):
    assert (a < b) == (a.key() < b.key())
    assert (a < b) + (b < a) + (a == b) == 1
    if a <= b and b <= c:
        assert a <= c
    assert SemVer.parse(str(a)) == a


@settings(max_examples=100, deadline=None)
@given(st.dictionaries(st.from_regex(r"[a-z][a-z0-9-]{0,10}", fullmatch=True), _versions, max_size=8))
def test_manifest_write_read_identity(manifest):
    assert parse_manifest(format_manifest(manifest)) == manifest

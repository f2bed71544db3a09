"""Shared scenario runs; the long simulations are computed once per session."""

from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from nvsc.engine import config_from_dict, default_document, load_config, prepare, run_scenario  # noqa: E402


def small_document(horizon: float = 0.05, **changes) -> dict:
    """The bundled platoon shortened to ``horizon`` seconds."""
    doc = default_document()
    doc["horizon"] = horizon
    doc.update(changes)
    return doc


@pytest.fixture(scope="session")
def nominal_cfg():
    return load_config("nominal.json")


@pytest.fixture(scope="session")
def nominal_prep(nominal_cfg):
    return prepare(nominal_cfg)


@pytest.fixture(scope="session")
def nominal_trace(nominal_cfg, nominal_prep):
    return run_scenario(nominal_cfg, nominal_prep)


@pytest.fixture(scope="session")
def observer_offset_run():
    doc = default_document()
    doc["initial"] = {"offset": [0.5, 0.0, 0.0], "observer_offset": [0.5, 0.5, 0.5]}
    cfg = config_from_dict(doc)
    prep = prepare(cfg)
    return cfg, prep, run_scenario(cfg, prep)


@pytest.fixture(scope="session")
def attack_cfg():
    return load_config("dos_veh1.json")


@pytest.fixture(scope="session")
def attack_run(attack_cfg):
    prep = prepare(attack_cfg)
    schedule = attack_cfg.schedule()
    return attack_cfg, prep, schedule, run_scenario(attack_cfg, prep, schedule)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        title, ok, note = results[number]
        terminalreporter.write_line(f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}: {note}")

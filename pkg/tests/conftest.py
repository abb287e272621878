import json
import re

import pytest

from gr_imaging.scenarios import desk_bars


def tiny_config(scatterers=None, n_freq=3, grouping="per-transmitter", snr_db=None, seed=0):
    """A 6 x 4 x 4 grid with two transmitters and six receivers; fast enough for CLI round trips."""
    if scatterers is None:
        scatterers = [{"position": [0.05, -0.55, 0.45], "amplitude": 0.02},
                      {"position": [-0.12, -0.7, 0.55], "amplitude": [0.01, 0.01]}]
    return {
        "grid": {"center": [0.0, -0.6, 0.5], "extents": [0.6, 0.4, 0.4], "divisions": [6, 4, 4]},
        "array": {
            "transmitters": [{"position": [-0.5, 0.0, 0.3], "polarization": "z"},
                             {"position": [0.5, 0.0, 0.7], "polarization": "z"}],
            "receivers": {"uniform": {"center": [0.0, 0.0, 0.5], "counts": [3, 1, 2], "spacing": [0.3, 0.0, 0.3]}},
            "rx_component": "z",
        },
        "frequencies": {"f_min": 1e9, "f_max": 1e9 + (n_freq - 1) * 0.5e9, "step": 0.5e9},
        "grouping": {"mode": grouping, "params": {}},
        "scene": {"scatterers": scatterers, "reference": "occupancy"},
        "noise": {"snr_db": snr_db, "seed": seed},
    }


@pytest.fixture
def tiny_doc():
    return tiny_config()


@pytest.fixture
def write_config(tmp_path):
    def _write(doc, name="config.json"):
        path = tmp_path / name
        path.write_text(json.dumps(doc))
        return path
    return _write


@pytest.fixture(scope="session")
def desk_doc():
    return desk_bars()



_ACCEPTANCE = {}


def pytest_runtest_logreport(report):
    m = re.search(r"test_acceptance\.py::test_c(\d\d)_(\w+)", report.nodeid)
    if not m:
        return
    key = int(m.group(1))
    detail = dict(report.user_properties).get("detail", "")
    if report.failed:
        _ACCEPTANCE[key] = ("FAIL", m.group(2), detail)
    elif report.when == "call":
        _ACCEPTANCE[key] = ("PASS" if report.passed else "SKIP", m.group(2), detail)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_ACCEPTANCE):
        status, name, detail = _ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key:2d} {status}  {name.replace('_', ' ')}  {detail}")

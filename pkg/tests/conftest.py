import json

import pytest

from permeameter import CavitySpec, ModeSpec, SampleSpec


@pytest.fixture
def worked_cavity() -> CavitySpec:
    return CavitySpec(width_a=0.030, length_l=0.060, height_h=0.00157, eps_r=2.2)


@pytest.fixture
def worked_sample() -> SampleSpec:
    return SampleSpec(extent_x_l1=0.010, extent_z_a1=0.002, thickness=0.00157)


@pytest.fixture
def mode4() -> ModeSpec:
    return ModeSpec(4)


BASE_CONFIG = {
    "cavity": {
        "width_a_mm": 30.0,
        "length_l_mm": 60.0,
        "height_h_mm": 1.57,
        "eps_r": 2.2,
        "mu_rs": 1.0,
    },
    "sample": {"extent_x_l1_mm": 10.0, "extent_z_a1_mm": 2.0, "thickness_mm": 1.57},
    "mode": {"n": 4},
    "extraction": {
        "q_method": "lorentzian-fit",
        "interaction": "transverse-hz",
        "model": "quadrature",
        "cells_per_axis": 64,
    },
    "synth": {
        "q0_empty": 800.0,
        "il_linear": 0.3,
        "n_points": 4001,
        "span_bandwidths": 40.0,
        "noise_floor_db": None,
        "seed": 12345,
    },
}

TABLE_MATERIALS = [
    {"name": "U", "mu_re": 1.2, "tan_dm": 0.040},
    {"name": "V", "mu_re": 1.4, "tan_dm": 0.060},
    {"name": "W", "mu_re": 1.6, "tan_dm": 0.100},
    {"name": "X", "mu_re": 1.5, "tan_dm": 0.050},
    {
        "name": "Y",
        "mu_re": 1.7,
        "tan_dm": 0.008,
        "note": "reference loss tangent anomalous; excluded from regression",
    },
    {"name": "Z", "mu_re": 1.3, "tan_dm": 0.150},
]


@pytest.fixture
def config_file(tmp_path):
    """Write a run-config JSON (optionally patched) and return its path."""

    def _write(**overrides):
        doc = json.loads(json.dumps(BASE_CONFIG))
        for section, patch in overrides.items():
            if isinstance(patch, dict):
                doc.setdefault(section, {}).update(patch)
            else:
                doc[section] = patch
        path = tmp_path / "config.json"
        path.write_text(json.dumps(doc, indent=2))
        return path

    return _write


@pytest.fixture
def materials_file(tmp_path):
    def _write(materials=None, name="materials.json"):
        path = tmp_path / name
        path.write_text(json.dumps(TABLE_MATERIALS if materials is None else materials))
        return path

    return _write


def pytest_runtest_logreport(report):
    # one visible pass/fail line per acceptance criterion
    if report.when == "call" and "test_acceptance" in report.nodeid:
        name = report.nodeid.split("::")[-1]
        print(f"\n[ACCEPTANCE] {name}: {'PASS' if report.passed else 'FAIL'}")

import json

import pytest

from permeameter import (
    Resonance,
    SynthConfig,
    lorentzian_trace,
    parse_touchstone,
    write_touchstone,
)
from permeameter.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestModes:
    def test_table_rows(self, capsys, config_file):
        cfg = config_file()
        code, out, _ = run(capsys, "--config", str(cfg), "modes", "--max-n", "4")
        assert code == 0
        lines = out.strip().splitlines()
        assert len(lines) == 5  # header + 4 rows
        last = lines[-1].split()
        assert last[0] == "4"
        assert float(last[1]) == pytest.approx(7.532569, abs=1e-3)  # GHz
        assert float(last[2]) == pytest.approx(30.0, abs=1e-6)  # mm
        assert last[-1] == "*"  # even marker

    def test_json_schema(self, capsys, config_file):
        code, out, _ = run(capsys, "--config", str(config_file()), "modes", "--json")
        assert code == 0
        doc = json.loads(out)
        assert {"n", "f_hz", "lambda_g_m", "even"} <= set(doc["modes"][0])

    def test_zero_rows(self, capsys, config_file):
        code, out, _ = run(capsys, "--config", str(config_file()), "modes", "--max-n", "0")
        assert code == 0
        assert len(out.strip().splitlines()) == 1  # header only

    def test_negative_dimension_exit_2(self, capsys, config_file):
        cfg = config_file(cavity={"width_a_mm": -30.0})
        code, _, err = run(capsys, "--config", str(cfg), "modes")
        assert code == 2
        assert "width_a" in err

    def test_missing_config_exit_2(self, capsys, monkeypatch):
        monkeypatch.delenv("PERMEAMETER_CONFIG", raising=False)
        code, _, err = run(capsys, "modes")
        assert code == 2 and "config" in err

    def test_env_var_config(self, capsys, config_file, monkeypatch):
        monkeypatch.setenv("PERMEAMETER_CONFIG", str(config_file()))
        code, out, _ = run(capsys, "modes", "--max-n", "2")
        assert code == 0 and len(out.strip().splitlines()) == 3


class TestSynth:
    def test_writes_roster_files(self, capsys, tmp_path, config_file, materials_file):
        out_dir = tmp_path / "camp"
        code, out, _ = run(
            capsys, "--config", str(config_file()), "synth",
            "--materials", str(materials_file()), "--out-dir", str(out_dir),
        )
        assert code == 0
        files = sorted(p.name for p in out_dir.glob("*.s2p"))
        assert len(files) == 7
        assert "campaign_empty.s2p" in files and "campaign_U.s2p" in files

    def test_deterministic_bytes(self, capsys, tmp_path, config_file, materials_file):
        cfg, mats = str(config_file()), str(materials_file())
        blobs = []
        for sub in ("a", "b"):
            out_dir = tmp_path / sub
            code, _, _ = run(capsys, "--config", cfg, "synth",
                             "--materials", mats, "--out-dir", str(out_dir))
            assert code == 0
            blobs.append((out_dir / "campaign_X.s2p").read_bytes())
        assert blobs[0] == blobs[1]

    def test_seed_override_changes_noisy_output(
        self, capsys, tmp_path, config_file, materials_file
    ):
        cfg = str(config_file(synth={"noise_floor_db": -70.0}))
        mats = str(materials_file())
        blobs = []
        for seed, sub in ((1, "a"), (2, "b")):
            out_dir = tmp_path / sub
            code, _, _ = run(capsys, "--config", cfg, "--seed", str(seed), "synth",
                             "--materials", mats, "--out-dir", str(out_dir))
            assert code == 0
            blobs.append((out_dir / "campaign_X.s2p").read_bytes())
        assert blobs[0] != blobs[1]

    def test_unwritable_out_dir_exit_2(self, capsys, tmp_path, config_file, materials_file):
        blocker = tmp_path / "blocked"
        blocker.write_text("a file, not a directory")
        code, _, err = run(
            capsys, "--config", str(config_file()), "synth",
            "--materials", str(materials_file()), "--out-dir", str(blocker),
        )
        assert code == 2 and "blocked" in err


class TestExtract:
    @pytest.fixture
    def campaign(self, capsys, tmp_path, config_file, materials_file):
        out_dir = tmp_path / "camp"
        code, _, _ = run(
            capsys, "--config", str(config_file()), "synth",
            "--materials", str(materials_file()), "--out-dir", str(out_dir),
        )
        assert code == 0
        return out_dir

    def test_sample_x_recovery(self, capsys, config_file, campaign):
        code, out, _ = run(
            capsys, "--config", str(config_file()), "--json", "extract",
            str(campaign / "campaign_empty.s2p"), str(campaign / "campaign_X.s2p"),
        )
        assert code == 0
        pair = json.loads(out)["pairs"][0]
        assert pair["mu_re"] == pytest.approx(1.5, rel=0.01)
        assert pair["tan_dm"] == pytest.approx(0.05, rel=0.05)
        assert pair["g_provenance"] == "quadrature-transverse-hz"
        assert pair["mu_re_conventional"] is not None
        assert {"f0_hz", "q_loaded", "q_unloaded", "il_linear", "method"} <= set(pair["empty"])

    def test_identical_files_give_substrate(self, capsys, config_file, campaign):
        empty = str(campaign / "campaign_empty.s2p")
        code, out, _ = run(capsys, "--config", str(config_file()), "--json",
                           "extract", empty, empty)
        assert code == 0
        pair = json.loads(out)["pairs"][0]
        assert pair["mu_re"] == pytest.approx(1.0, abs=1e-9)
        assert pair["tan_dm"] == pytest.approx(0.0, abs=1e-9)

    def test_human_report(self, capsys, config_file, campaign):
        code, out, _ = run(
            capsys, "--config", str(config_file()), "extract",
            str(campaign / "campaign_empty.s2p"), str(campaign / "campaign_X.s2p"),
        )
        assert code == 0
        assert "modified" in out and "conventional" in out and "g " in out

    def test_truncated_file_exit_2(self, capsys, tmp_path, config_file, campaign):
        mangled = tmp_path / "broken.s2p"
        payload = (campaign / "campaign_X.s2p").read_text().splitlines()
        payload[40] = "7.5 0 0"  # wrong column count on 1-based line 41
        mangled.write_text("\n".join(payload))
        code, _, err = run(
            capsys, "--config", str(config_file()), "extract",
            str(campaign / "campaign_empty.s2p"), str(mangled),
        )
        assert code == 2 and "line 41" in err

    def test_no_pairable_resonance_exit_3(self, capsys, tmp_path, config_file, campaign):
        res = Resonance.from_loaded(5.0e9, 560.0, 0.3, "model")
        cfg = SynthConfig(4.5e9, 5.5e9, 1001, None, 0, 0.3)
        far = tmp_path / "far.s2p"
        far.write_bytes(write_touchstone(lorentzian_trace(res, cfg)))
        code, _, err = run(
            capsys, "--config", str(config_file()), "extract",
            str(campaign / "campaign_empty.s2p"), str(far),
        )
        assert code == 3

    def test_unphysical_exit_4(self, capsys, tmp_path, config_file, campaign):
        # resonance 5% above empty pairs fine but implies mu_re < 0
        empty_trace = parse_touchstone((campaign / "campaign_empty.s2p").read_bytes())
        f_up = 7.9e9
        res = Resonance.from_loaded(f_up, 560.0, 0.3, "model")
        cfg = SynthConfig(f_up - 0.3e9, f_up + 0.3e9, 1001, None, 0, 0.3)
        upshift = tmp_path / "upshift.s2p"
        upshift.write_bytes(write_touchstone(lorentzian_trace(res, cfg)))
        code, _, err = run(
            capsys, "--config", str(config_file()), "extract",
            str(campaign / "campaign_empty.s2p"), str(upshift),
        )
        assert code == 4 and "mu_re" in err


class TestCompare:
    def test_csv_table(self, capsys, tmp_path, config_file, materials_file):
        out_csv = tmp_path / "table.csv"
        code, _, _ = run(
            capsys, "--config", str(config_file()), "compare",
            "--materials", str(materials_file()), "--out-csv", str(out_csv),
        )
        assert code == 0
        lines = out_csv.read_text().splitlines()
        assert lines[0] == (
            "material,mu_re_actual,mu_re_conventional,mu_re_modified,"
            "tan_dm_actual,tan_dm_conventional,tan_dm_modified,note"
        )
        assert len(lines) == 7
        rows = {line.split(",")[0]: line.split(",") for line in lines[1:]}
        assert float(rows["X"][3]) == pytest.approx(1.5, rel=0.01)
        assert "anomalous" in rows["Y"][7]

    def test_idempotent_bytes(self, capsys, tmp_path, config_file, materials_file):
        cfg, mats = str(config_file()), str(materials_file())
        payloads = []
        for name in ("one.csv", "two.csv"):
            out_csv = tmp_path / name
            code, _, _ = run(capsys, "--config", cfg, "compare",
                             "--materials", mats, "--out-csv", str(out_csv))
            assert code == 0
            payloads.append(out_csv.read_bytes())
        assert payloads[0] == payloads[1]

    def test_empty_roster_header_only(self, capsys, tmp_path, config_file, materials_file):
        out_csv = tmp_path / "empty.csv"
        code, _, _ = run(
            capsys, "--config", str(config_file()), "compare",
            "--materials", str(materials_file(materials=[])), "--out-csv", str(out_csv),
        )
        assert code == 0
        assert out_csv.read_text().splitlines() == [
            "material,mu_re_actual,mu_re_conventional,mu_re_modified,"
            "tan_dm_actual,tan_dm_conventional,tan_dm_modified,note"
        ]

    def test_bad_materials_exit_2(self, capsys, tmp_path, config_file):
        bad = tmp_path / "bad.json"
        bad.write_text('{"no": "materials"}')
        code, _, err = run(
            capsys, "--config", str(config_file()), "compare",
            "--materials", str(bad), "--out-csv", str(tmp_path / "x.csv"),
        )
        assert code == 2


class TestQuadcheck:
    def test_report_and_exit_0(self, capsys, config_file):
        code, out, _ = run(capsys, "--config", str(config_file()), "--json", "quadcheck")
        assert code == 0
        doc = json.loads(out)
        assert doc["g_printed"] == pytest.approx(1.4786801609189932e-3, rel=1e-9)
        for choice in ("axial-hx", "transverse-hz", "both-components"):
            assert doc[f"deviation_derived_vs_quadrature_{choice}"] < 1e-7
        # printed-form deviation is reported, not asserted small
        assert "deviation_printed_vs_derived_transverse-hz" in doc

    def test_human_output(self, capsys, config_file):
        code, out, _ = run(capsys, "--config", str(config_file()), "quadcheck")
        assert code == 0
        assert "g_printed" in out and "deviation" in out

    def test_sample_shrink_scaling(self, capsys, config_file):
        big = config_file()
        code, out_big, _ = run(capsys, "--config", str(big), "--json", "quadcheck")
        doc_big = json.loads(out_big)
        small = config_file(
            sample={"extent_x_l1_mm": 1.0, "extent_z_a1_mm": 0.2, "thickness_mm": 1.57}
        )
        code, out_small, _ = run(capsys, "--config", str(small), "--json", "quadcheck")
        doc_small = json.loads(out_small)
        # volume term is exactly quadratic in the two shrunk extents
        assert doc_big["g_conventional"] / doc_small["g_conventional"] == pytest.approx(
            100.0, rel=1e-9
        )
        # volume-dominated routes shrink near 100x; the (1 - sinc)
        # product routes collapse quadratically faster
        assert doc_big["g_derived_axial-hx"] / doc_small["g_derived_axial-hx"] == (
            pytest.approx(100.0, rel=0.15)
        )
        for key in ("g_printed", "g_derived_transverse-hz"):
            assert doc_big[key] / doc_small[key] > 1000.0

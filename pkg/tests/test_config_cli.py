"""Model documents, flat-file artifacts and the command-line entry point."""

import json
import os

import numpy as np
import pytest

from piezotitop import artifacts as art
from piezotitop import cli
from piezotitop import config as cfg
from piezotitop import studies
from piezotitop.errors import ConfigurationError, IllPosedInterconnectionError


def preset_with(*edits):
    text = cfg.preset_text()
    for old, new in edits:
        assert old in text
        text = text.replace(old, new)
    return text


@pytest.fixture
def write_doc(tmp_path):
    def write(text, name="model.yaml"):
        path = tmp_path / name
        path.write_text(text)
        return path
    return write


class TestDocument:

    def test_preset_loads_in_si(self):
        doc = cfg.load("table1")
        beam = doc.beam.section()
        assert beam.thickness == pytest.approx(9.53e-3)
        assert beam.modulus == pytest.approx(60e9)
        assert doc.piezo.section().d31 == pytest.approx(-150e-12)
        assert doc.m_retain is None
        assert doc.damping_spec().zeta == 0.001

    def test_missing_field_names_key_and_line(self):
        text = preset_with(("  rho: {value: 2600, units: kg/m^3}\n", ""))
        with pytest.raises(ConfigurationError) as info:
            cfg.parse(text, "model.yaml")
        msg = str(info.value)
        assert "missing required field 'beam.rho'" in msg
        assert msg.startswith("model.yaml:")

    def test_unknown_key_rejected(self):
        text = preset_with(("topology: shared", "topology: shared\ncolour: red"))
        with pytest.raises(ConfigurationError, match="unknown key 'colour'"):
            cfg.parse(text)

    def test_bad_units(self):
        text = preset_with(("E: {value: 60, units: GPa}", "E: {value: 60, units: mm}"))
        with pytest.raises(ConfigurationError, match="beam.E"):
            cfg.parse(text)

    def test_experiment_error_location(self):
        text = preset_with(("    points: 400", "    points: 1"))
        with pytest.raises(ConfigurationError, match=r"experiments\.1\.points"):
            cfg.parse(text)

    @pytest.mark.parametrize("text", ["- a\n- b\n", "beam: [unclosed\n"])
    def test_not_a_document(self, text):
        with pytest.raises(ConfigurationError):
            cfg.parse(text)

    def test_unknown_preset(self):
        with pytest.raises(ConfigurationError):
            cfg.load("nonexistent-preset-name")

    def test_experiment_lookup(self):
        doc = cfg.load("table1")
        assert doc.experiment("bode").points == 400
        assert doc.experiment("export") is None


class TestGains:

    def test_log(self):
        np.testing.assert_allclose(studies.parse_gains("1:100:3,log"), [1, 10, 100])

    def test_linear(self):
        np.testing.assert_allclose(studies.parse_gains("0:10:3,lin"), [0, 5, 10])

    @pytest.mark.parametrize("text", ["1:100", "0:10:3,log", "a:b:3,log", "1:10:3,cubic"])
    def test_malformed(self, text):
        with pytest.raises(ConfigurationError):
            studies.parse_gains(text)


class TestArtifacts:

    def test_number_format(self):
        assert art.fmt(1 / 3) == "0.333333333333"
        assert art.fmt(-0.0) == "0"
        assert art.fmt(float("nan")) == "nan"
        assert art.fmt(float("-inf")) == "-inf"

    def test_atomic_write_leaves_no_temporary(self, tmp_path):
        path = art.atomic_write(tmp_path / "sub" / "a.csv", "x\n")
        art.atomic_write(path, "y\n")
        assert path.read_text() == "y\n"
        assert os.listdir(path.parent) == ["a.csv"]
        assert path.stat().st_mode & 0o777 == 0o666 & ~art._umask()

    def test_state_space_round_trip(self, tmp_path):
        system = studies.open_chain(cfg.load("table1"))
        art.write_json(tmp_path / "ss.json", art.ss_to_dict(system))
        back = art.load_ss(tmp_path / "ss.json")
        assert back.inputs == system.inputs and back.states == system.states
        for w in (10.0, 1234.5):
            np.testing.assert_allclose(back.transfer_at(w), system.transfer_at(w),
                                       rtol=1e-12, atol=0)

    def test_malformed_export(self):
        with pytest.raises(ConfigurationError):
            art.ss_from_dict({"inputs": ["u"], "outputs": [], "states": []})


class TestCli:

    def test_build_prints_port_counts(self, tmp_path, capsys):
        assert cli.run(["build", "--out", str(tmp_path)]) == 0
        assert capsys.readouterr().out.strip() == "inputs=7 outputs=7"
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert summary["states"] == 18
        assert (tmp_path / "ss_matrices.json").exists()

    def test_export_writes_matrices(self, tmp_path):
        assert cli.run(["export", "table1", "--out", str(tmp_path)]) == 0
        header = (tmp_path / "ss_B.csv").read_text().splitlines()[0]
        assert header.startswith("label,b1.F_Q.u")

    def test_missing_field_exit_code(self, write_doc, tmp_path, capsys):
        path = write_doc(preset_with(("  rho: {value: 2600, units: kg/m^3}\n", "")))
        assert cli.run(["build", str(path), "--out", str(tmp_path)]) == 2
        err = capsys.readouterr().err
        assert "rho" in err and str(path) in err

    def test_config_given_twice(self, capsys):
        assert cli.run(["build", "table1", "--config", "other.yaml"]) == 2

    def test_bad_zeta(self, tmp_path):
        assert cli.run(["build", "--zeta", "1.5", "--out", str(tmp_path)]) == 2

    @pytest.mark.parametrize("command", ["bode", "locus"])
    def test_csv_determinism(self, tmp_path, command):
        extra = ["--points", "50"] if command == "bode" else ["--gains", "1:1e4:12,log"]
        texts = []
        for k in range(2):
            out = tmp_path / str(k)
            assert cli.run([command, "--out", str(out)] + extra) == 0
            texts.append((out / f"{command}.csv").read_bytes())
        assert texts[0] == texts[1]

    def test_bode_columns(self, tmp_path):
        assert cli.run(["bode", "--points", "5", "--out", str(tmp_path)]) == 0
        lines = (tmp_path / "bode.csv").read_text().splitlines()
        assert lines[0] == "omega_rad_s,output,input,re,im,mag_db,phase_deg,skipped"
        assert len(lines) == 1 + 5 * 4

    def test_locus_columns(self, tmp_path):
        assert cli.run(["locus", "--gains", "1:10:2,log", "--out", str(tmp_path)]) == 0
        lines = (tmp_path / "locus.csv").read_text().splitlines()
        assert lines[0] == "gain,pole_re,pole_im,branch_id"
        # gain 0 is prepended, 18 states plus the integrator
        assert len(lines) == 1 + 3 * 19

    def test_simulate(self, tmp_path):
        assert cli.run(["simulate", "--out", str(tmp_path)]) == 0
        header = (tmp_path / "sim.csv").read_text().splitlines()[0].split(",")
        assert header[0] == "t" and "b1.acc_P.w" in header and "b1.g.0" in header

    def test_divergence_exit_code(self, write_doc, tmp_path, capsys):
        path = write_doc(preset_with(
            ("components: 1", "components: 2"),
            ("sensor: b1.acc_Q.w", "sensor: b2.acc_Q.w"),
            ("  actuator: b1.v.0\n", "  actuator: b1.v.0\n  gain: 41479\n"),
            ("    t_end: 0.2\n", "    t_end: 2.0\n    dt: 5.0e-4\n")))
        assert cli.run(["simulate", str(path), "--out", str(tmp_path)]) == 3
        assert "stage 'simulate'" in capsys.readouterr().err
        assert not (tmp_path / "sim.csv").exists()

    def test_ill_posed_exit_code(self, tmp_path, monkeypatch, capsys):
        def refuse(*args, **kwargs):
            raise IllPosedInterconnectionError("loop matrix is singular")

        monkeypatch.setattr(studies, "open_chain", refuse)
        assert cli.run(["build", "--out", str(tmp_path)]) == 4
        assert "stage 'build'" in capsys.readouterr().err

"""Snapshot format, config grammar, manifests, SVG emission, and the
command line driver."""

import filecmp
import struct

import numpy as np
import pytest
from hypothesis import given, strategies as st

import nls4d.grid as gr
import nls4d.io as rio
import nls4d.scales as sc
import nls4d.svg as svg
from nls4d.cli import cli


def random_field(d, n, L, seed=0, t=0.0):
    rng = np.random.default_rng(seed)
    g = gr.make_grid(d, n, L)
    vals = rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape)
    return gr.field(g, vals, t=t)


class TestSnapshotFormat:
    def test_round_trip_bitwise(self, tmp_path):
        f = random_field(2, 8, 4.0, seed=3, t=0.375)
        path = tmp_path / "a.nls4"
        rio.write_snapshot(f, path)
        back = rio.read_snapshot(path)
        assert back.values.tobytes() == f.values.tobytes()
        assert back.t == f.t
        assert (back.grid.d, back.grid.n, back.grid.L) == (2, 8, 4.0)

    def test_header_layout(self, tmp_path):
        g = gr.make_grid(4, 32, 16.0)
        f = gr.zero_field(g, t=1.25)
        path = tmp_path / "b.nls4"
        rio.write_snapshot(f, path)
        raw = path.read_bytes()
        # 32-byte header, interleaved payload, 4-byte CRC trailer
        assert len(raw) == 32 + 16 * 32 ** 4 + 4
        assert raw[:4] == b"NLS4"
        version, d, n = struct.unpack_from("<III", raw, 4)
        L, t = struct.unpack_from("<dd", raw, 16)
        assert (version, d, n) == (1, 4, 32)
        assert (L, t) == (16.0, 1.25)
        assert raw[32:48] == b"\x00" * 16

    def test_truncated_file_is_checksum_error(self, tmp_path):
        f = random_field(1, 16, 8.0, seed=1)
        path = tmp_path / "c.nls4"
        rio.write_snapshot(f, path)
        raw = path.read_bytes()
        path.write_bytes(raw[: 32 + len(raw) // 2])
        with pytest.raises(rio.SnapshotError) as err:
            rio.read_snapshot(path)
        assert err.value.reason == "checksum"
        assert "truncated" in str(err.value)

    def test_flipped_byte_is_checksum_error(self, tmp_path):
        f = random_field(1, 16, 8.0, seed=2)
        path = tmp_path / "d.nls4"
        rio.write_snapshot(f, path)
        raw = bytearray(path.read_bytes())
        raw[40] ^= 0xFF
        path.write_bytes(bytes(raw))
        with pytest.raises(rio.SnapshotError) as err:
            rio.read_snapshot(path)
        assert err.value.reason == "checksum"

    def test_bad_magic(self, tmp_path):
        f = random_field(1, 8, 4.0)
        path = tmp_path / "e.nls4"
        rio.write_snapshot(f, path)
        raw = bytearray(path.read_bytes())
        raw[:4] = b"XXXX"
        path.write_bytes(bytes(raw))
        with pytest.raises(rio.SnapshotError) as err:
            rio.read_snapshot(path)
        assert err.value.reason == "magic"

    def test_unsupported_version(self, tmp_path):
        f = random_field(1, 8, 4.0)
        path = tmp_path / "f.nls4"
        rio.write_snapshot(f, path)
        raw = bytearray(path.read_bytes())
        struct.pack_into("<I", raw, 4, 99)
        path.write_bytes(bytes(raw))
        with pytest.raises(rio.SnapshotError) as err:
            rio.read_snapshot(path)
        assert err.value.reason == "version"

    def test_empty_and_header_only_files(self, tmp_path):
        path = tmp_path / "g.nls4"
        path.write_bytes(b"")
        with pytest.raises(rio.SnapshotError):
            rio.read_snapshot(path)
        path.write_bytes(b"NLS4" + b"\x00" * 8)
        with pytest.raises(rio.SnapshotError) as err:
            rio.read_snapshot(path)
        assert err.value.reason == "header"

    def test_error_is_a_value_error(self, tmp_path):
        path = tmp_path / "h.nls4"
        path.write_bytes(b"junk")
        with pytest.raises(ValueError):
            rio.read_snapshot(path)


class TestConfigGrammar:
    def test_round_trip(self):
        sections = {"grid": {"d": "2", "n": "16", "L": "8.0"},
                    "data": {"kind": "gaussian", "width": "0.5"}}
        assert rio.parse_config(rio.format_config(sections)) == sections

    def test_comments_and_blanks(self):
        text = """
        # full-line comment
        [grid]   ; trailing section comment
        d = 2    # trailing comment
        n = 16   ; ditto

        ; another comment
        L = 8.0
        """
        parsed = rio.parse_config(text)
        assert parsed == {"grid": {"d": "2", "n": "16", "L": "8.0"}}

    def test_value_may_contain_equals(self):
        parsed = rio.parse_config("[a]\nexpr = b = c\n")
        assert parsed["a"]["expr"] == "b = c"

    def test_hash_inside_word_is_not_comment(self):
        parsed = rio.parse_config("[a]\ncolor = x#y\n")
        assert parsed["a"]["color"] == "x#y"

    def test_duplicate_key_rejected(self):
        with pytest.raises(rio.ConfigError, match="duplicate key"):
            rio.parse_config("[a]\nk = 1\nk = 2\n")

    def test_duplicate_section_rejected(self):
        with pytest.raises(rio.ConfigError, match="duplicate section"):
            rio.parse_config("[a]\n[a]\n")

    def test_key_outside_section_rejected(self):
        with pytest.raises(rio.ConfigError, match="outside"):
            rio.parse_config("k = 1\n")

    def test_missing_equals_rejected(self):
        with pytest.raises(rio.ConfigError, match="expected key = value"):
            rio.parse_config("[a]\njust words\n")

    @given(st.dictionaries(
        st.from_regex(r"[a-z][a-z0-9_]{0,8}", fullmatch=True),
        st.dictionaries(
            st.from_regex(r"[a-z][a-z0-9_]{0,8}", fullmatch=True),
            st.from_regex(r"[A-Za-z0-9.+-]{1,12}", fullmatch=True),
            min_size=1, max_size=4),
        min_size=1, max_size=3))
    def test_round_trip_generated(self, sections):
        assert rio.parse_config(rio.format_config(sections)) == sections


class TestManifest:
    def test_full_round_trip(self, tmp_path):
        m = rio.RunManifest(
            command="simulate", code_version="0.1.0", status="guard-breach",
            seed=42, grid=gr.make_grid(2, 16, 8.0),
            config={"grid": {"d": "2"}, "time": {"dt": "1e-3"}},
            guards=["step 3: boundary mass fraction 2e-05 exceeds 1e-08",
                    "wrap-around radius clipped"],
            baselines=["endpoint_d4_n16"],
            timings={"evolve": 1.25e-3, "write": 0.5})
        path = tmp_path / "manifest.txt"
        m.write(path)
        assert rio.RunManifest.read(path) == m

    def test_minimal_round_trip(self):
        m = rio.RunManifest(command="weights", code_version="0.1.0")
        assert rio.RunManifest.from_text(m.to_text()) == m

    def test_note_guard_flips_status(self):
        m = rio.RunManifest(command="simulate", code_version="0.1.0")
        assert m.status == "ok"
        m.note_guard("boundary mass")
        assert m.status == "guard-breach"
        assert m.guards == ["boundary mass"]


def test_csv_round_trip(tmp_path):
    path = tmp_path / "t.csv"
    t = np.linspace(0, 1, 7)
    vals = np.sin(t) * 1e-12
    rio.write_csv(path, ["t [time]", "v [1]"], [t, vals])
    header = path.read_text().splitlines()[0]
    assert header == "t [time],v [1]"
    cols = rio.read_csv(path)
    assert np.array_equal(cols["t"], t)
    assert np.array_equal(cols["v"], vals)


def test_csv_shape_guard(tmp_path):
    with pytest.raises(ValueError):
        rio.write_csv(tmp_path / "bad.csv", ["a", "b"], [[1.0, 2.0], [1.0]])


def test_scale_csv_round_trip(tmp_path):
    scale = sc.ScaleFunction("piecewise-linear", [0.0, 0.5, 2.0],
                             [1.0, 4.0, 2.0])
    path = tmp_path / "scale.csv"
    rio.write_scale_csv(path, scale)
    back = sc.scale_from_csv(path)
    assert back.kind == "piecewise-linear"
    assert np.array_equal(back.breakpoints, scale.breakpoints)
    assert np.array_equal(back.values, scale.values)


class TestSvg:
    def test_plot_is_deterministic(self, tmp_path):
        x = np.linspace(0, 1, 20)
        series = {"a": np.sin(x), "b": np.cos(x)}
        p1, p2 = tmp_path / "p1.svg", tmp_path / "p2.svg"
        svg.line_plot(p1, x, series, xlabel="t", title="curves")
        svg.line_plot(p2, x, series, xlabel="t", title="curves")
        body = p1.read_text()
        assert body == p2.read_text()
        assert body.startswith("<svg")
        assert "polyline" in body

    def test_nan_splits_curve(self, tmp_path):
        x = np.arange(8.0)
        y = np.sin(x)
        y[3] = np.nan
        path = tmp_path / "gap.svg"
        svg.line_plot(path, x, {"y": y})
        assert path.read_text().count("<polyline") == 2

    def test_log_axes_drop_nonpositive(self, tmp_path):
        x = np.array([0.1, 1.0, 10.0, 100.0])
        y = np.array([1e-4, 0.0, 1e-2, 1.0])
        path = tmp_path / "log.svg"
        svg.line_plot(path, x, {"y": y}, logx=True, logy=True)
        assert "1e-04" in path.read_text() or "0.0001" in path.read_text()

    def test_plot_csv_regenerates_identically(self, tmp_path):
        csv = tmp_path / "d.csv"
        t = np.linspace(0, 1, 9)
        rio.write_csv(csv, ["t [time]", "m [1]", "e [1]"],
                      [t, t ** 2, np.exp(-t)])
        out1, out2 = tmp_path / "d1.svg", tmp_path / "d2.svg"
        svg.plot_csv(csv, out1, title="run")
        svg.plot_csv(csv, out2, title="run")
        assert out1.read_bytes() == out2.read_bytes()


GOOD_CONFIG = """\
[grid]
d = 1
n = 32
L = 16.0

[equation]
mu = 1
p = 4

[time]
dt = 1e-3
t_end = 0.04
sample_every = 10

[data]
kind = gaussian
amplitude = 0.8
width = 1.5
"""


def write_run_config(tmp_path, body=GOOD_CONFIG, name="run.cfg"):
    path = tmp_path / name
    path.write_text(body)
    return path


class TestCliSimulate:
    def test_happy_path(self, tmp_path, monkeypatch):
        monkeypatch.setenv("NLS4D_RUN_ROOT", str(tmp_path))
        cfg = write_run_config(tmp_path)
        assert cli(["simulate", str(cfg), "--out", "run1"]) == 0
        rundir = tmp_path / "run1"
        snaps = sorted(rundir.glob("snap_*.nls4"))
        assert len(snaps) == 5
        manifest = rio.RunManifest.read(rundir / "manifest.txt")
        assert manifest.status == "ok"
        assert manifest.config == rio.read_config(cfg)
        assert manifest.grid.n == 32
        assert set(manifest.timings) == {"build", "evolve", "write"}
        header = (rundir / "series.csv").read_text().splitlines()[0]
        assert header == "t [time],mass [1],energy [1]"

    def test_determinism(self, tmp_path, monkeypatch):
        monkeypatch.setenv("NLS4D_RUN_ROOT", str(tmp_path))
        cfg = write_run_config(tmp_path)
        assert cli(["simulate", str(cfg), "--out", "a"]) == 0
        assert cli(["simulate", str(cfg), "--out", "b"]) == 0
        for snap in sorted((tmp_path / "a").glob("snap_*.nls4")):
            twin = tmp_path / "b" / snap.name
            assert filecmp.cmp(snap, twin, shallow=False)

    def test_zero_data_run(self, tmp_path, monkeypatch):
        monkeypatch.setenv("NLS4D_RUN_ROOT", str(tmp_path))
        body = GOOD_CONFIG.replace(
            "kind = gaussian\namplitude = 0.8\nwidth = 1.5", "kind = zero")
        cfg = write_run_config(tmp_path, body)
        assert cli(["simulate", str(cfg), "--out", "zero"]) == 0
        rundir = tmp_path / "zero"
        for snap in rundir.glob("snap_*.nls4"):
            assert not np.any(rio.read_snapshot(snap).values)
        assert cli(["diagnose", "zero"]) == 0
        cols = rio.read_csv(rundir / "diagnostics.csv")
        for name in ("mass", "energy", "sup_abs", "l4_norm", "ball_mass",
                     "n0"):
            assert not np.any(cols[name])

    def test_boundary_guard_exits_3(self, tmp_path, monkeypatch):
        monkeypatch.setenv("NLS4D_RUN_ROOT", str(tmp_path))
        body = GOOD_CONFIG.replace("L = 16.0", "L = 6.0")
        cfg = write_run_config(tmp_path, body)
        assert cli(["simulate", str(cfg), "--out", "tight"]) == 3
        manifest = rio.RunManifest.read(tmp_path / "tight" / "manifest.txt")
        assert manifest.status == "guard-breach"
        assert any("boundary" in note for note in manifest.guards)

    def test_missing_config_key_exits_2(self, tmp_path, monkeypatch):
        monkeypatch.setenv("NLS4D_RUN_ROOT", str(tmp_path))
        cfg = write_run_config(
            tmp_path, GOOD_CONFIG.replace("dt = 1e-3\n", ""))
        assert cli(["simulate", str(cfg)]) == 2


class TestCliErrors:
    def test_no_arguments(self):
        assert cli([]) == 2

    def test_unknown_subcommand(self):
        assert cli(["frobnicate"]) == 2

    def test_unknown_flag(self):
        assert cli(["weights", "--R", "1", "--J", "2", "--frob"]) == 2

    def test_missing_config_file(self, tmp_path):
        assert cli(["simulate", str(tmp_path / "none.cfg")]) == 2

    def test_help_exits_0(self, capsys):
        assert cli(["--help"]) == 0
        assert "simulate" in capsys.readouterr().out

    def test_missing_rundir(self, tmp_path, monkeypatch):
        monkeypatch.setenv("NLS4D_RUN_ROOT", str(tmp_path))
        assert cli(["diagnose", "nowhere"]) == 2


@pytest.fixture(scope="module")
def completed_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("runs")
    cfg = write_run_config(root)
    import os
    old = os.environ.get("NLS4D_RUN_ROOT")
    os.environ["NLS4D_RUN_ROOT"] = str(root)
    try:
        assert cli(["simulate", str(cfg), "--out", "base"]) == 0
        yield root / "base", root
    finally:
        if old is None:
            os.environ.pop("NLS4D_RUN_ROOT", None)
        else:
            os.environ["NLS4D_RUN_ROOT"] = old


class TestCliDiagnose:
    def test_outputs(self, completed_run, monkeypatch):
        rundir, root = completed_run
        monkeypatch.setenv("NLS4D_RUN_ROOT", str(root))
        assert cli(["diagnose", "base"]) == 0
        cols = rio.read_csv(rundir / "diagnostics.csv")
        assert set(cols) == {"t", "mass", "energy", "sup_abs", "l4_norm",
                             "ball_mass", "n0"}
        assert np.all(cols["mass"] > 0)
        drift = np.max(np.abs(cols["mass"] - cols["mass"][0]))
        assert drift < 1e-8 * cols["mass"][0]
        scale = sc.scale_from_csv(rundir / "scale_n0.csv")
        assert np.all(np.asarray(scale.values) > 0)
        summary = (rundir / "summary.csv").read_text().splitlines()
        assert summary[0] == "quantity,value"
        names = [line.split(",")[0] for line in summary[1:]]
        assert "mass_drift" in names and "scattering_size" in names
        assert (rundir / "diagnostics.svg").is_file()
        manifest = rio.RunManifest.read(rundir / "diagnose_manifest.txt")
        assert manifest.status == "ok"


class TestCliMorawetz:
    def test_outputs_and_svg(self, completed_run, monkeypatch):
        rundir, root = completed_run
        monkeypatch.setenv("NLS4D_RUN_ROOT", str(root))
        assert cli(["morawetz", "base", "--R", "0.5", "--J", "2",
                    "--n-val", "2.0"]) == 0
        header = (rundir / "morawetz.csv").read_text().splitlines()[0]
        assert header == "t,M,T_dta,T_scary,T_potential,T_massmass,residual"
        summary = dict(
            line.split(",") for line in
            (rundir / "morawetz_summary.csv").read_text().splitlines()[1:])
        assert np.isfinite(float(summary["residual"]))
        assert float(summary["im4_lhs"]) >= 0
        svg_path = rundir / "morawetz.svg"
        body = svg_path.read_bytes()
        svg.plot_csv(rundir / "morawetz.csv", svg_path,
                     columns=["M", "T_dta", "T_scary", "T_potential",
                              "T_massmass"],
                     title="interaction functional: base")
        assert svg_path.read_bytes() == body

    def test_support_guard_exits_3(self, completed_run, monkeypatch):
        rundir, root = completed_run
        monkeypatch.setenv("NLS4D_RUN_ROOT", str(root))
        assert cli(["morawetz", "base", "--R", "8", "--J", "2",
                    "--n-val", "1.0"]) == 3
        manifest = rio.RunManifest.read(rundir / "morawetz_manifest.txt")
        assert manifest.status == "guard-breach"
        assert any("support" in note for note in manifest.guards)

    def test_weight_flags_required(self, completed_run, monkeypatch):
        _, root = completed_run
        monkeypatch.setenv("NLS4D_RUN_ROOT", str(root))
        assert cli(["morawetz", "base"]) == 2

    def test_from_profile_bound(self, completed_run, monkeypatch):
        rundir, root = completed_run
        monkeypatch.setenv("NLS4D_RUN_ROOT", str(root))
        # choose_parameters at a tiny K keeps the weight inside the box
        # unless the stored run's grid is too small; both outcomes leave
        # a manifest behind
        assert cli(["morawetz", "base", "--from-K", "1.01",
                    "--n-val", "4.0"]) in (0, 3)
        assert (rundir / "morawetz_manifest.txt").is_file()


class TestCliWeights:
    def test_band_point_value(self, tmp_path):
        out = tmp_path / "w.csv"
        assert cli(["weights", "--R", "10", "--J", "4",
                    "--out", str(out)]) == 0
        cols = rio.read_csv(out)
        i = int(np.argmin(np.abs(cols["r"] - 10 * np.e ** 2)))
        assert abs(cols["r"][i] - 10 * np.e ** 2) < 1e-9
        assert abs(cols["w_r"][i] - 0.5) < 1e-12
        assert out.with_suffix(".svg").is_file()

    def test_certificates_printed(self, tmp_path, capsys):
        out = tmp_path / "w.csv"
        assert cli(["weights", "--R", "2", "--J", "3",
                    "--out", str(out)]) == 0
        text = capsys.readouterr().out
        assert "cone positivity" in text and "pass" in text


class TestCliSmooth:
    def test_pipeline(self, tmp_path):
        src = tmp_path / "n0.csv"
        src.write_text("# piecewise-linear\n0,1.3\n1,2.8\n2,1.1\n3,0.9\n")
        assert cli(["smooth", str(src), "-m", "2"]) == 0
        out = tmp_path / "n0_smooth_m2.csv"
        back = sc.scale_from_csv(out)
        vals = np.asarray(back.values, dtype=float)
        logs = np.log2(vals)
        assert np.allclose(logs, np.round(logs), atol=1e-12)
        ratios = vals[1:] / vals[:-1]
        assert all(r in (0.5, 1.0, 2.0) for r in np.round(ratios, 12))

    def test_raw_rejects_non_dyadic(self, tmp_path):
        src = tmp_path / "bad.csv"
        src.write_text("# piecewise-linear\n0,1.0\n1,3.0\n")
        assert cli(["smooth", str(src), "-m", "2", "--raw"]) == 2


class TestCliCheck:
    def test_runs_selected_tests(self, tmp_path):
        import pathlib
        tests_dir = pathlib.Path(__file__).resolve().parent
        rc = cli(["check", "--tests", str(tests_dir),
                  "-k", "test_band_point_value"])
        assert rc == 0

    def test_missing_tests_dir(self, tmp_path):
        assert cli(["check", "--tests", str(tmp_path / "nope")]) == 2

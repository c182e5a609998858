from __future__ import annotations

import csv
import json
import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from fracfilm import cli_io as cli
from fracfilm.constants_profiles import model_constants, profile_dyda
from fracfilm.diagnostics import DiagnosticsRecord, make_record
from fracfilm.evolution import EvolutionState, MobilityParams, StepperConfig
from fracfilm.grid_spectral import Field, Grid

MINIMAL = {
    "dimension": 1,
    "s": 0.5,
    "grid": {"n": 1024, "L": 16},
    "dt": 1e-3,
    "t_end": 1,
    "mode": "cauchy",
    "family": "second",
    "initial": {"kind": "dyda"},
}


def small_config(tmp_path, **overrides) -> dict:
    cfg = {
        **MINIMAL,
        "grid": {"n": 256, "L": 16},
        "t_end": 0.004,
        "sample_every": 2,
        "output_dir": str(tmp_path / "out"),
    }
    cfg.update(overrides)
    return cfg


def write_json(path, obj) -> str:
    path.write_text(json.dumps(obj))
    return str(path)


class TestParseConfig:
    def test_minimal_defaults(self):
        cfg = cli.parse_config(json.dumps(MINIMAL))
        assert cfg.epsilon == 1e-6 and cfg.cap == 1e6 and cfg.sample_every == 100
        assert cfg.initial == cli.InitialSpec("dyda", {})
        assert cfg.grid() == Grid(1, 1024, 16.0)

    def test_s_out_of_range_names_key(self):
        with pytest.raises(cli.ConfigError) as info:
            cli.parse_config(json.dumps({**MINIMAL, "s": 1.5}))
        assert info.value.path == "config.s"

    def test_unknown_key(self):
        with pytest.raises(cli.ConfigError, match="epsilonn"):
            cli.parse_config(json.dumps({**MINIMAL, "epsilonn": 1e-6}))

    def test_duplicate_key(self):
        text = json.dumps(MINIMAL)[:-1] + ', "s": 0.25}'
        with pytest.raises(cli.ConfigError, match="duplicate"):
            cli.parse_config(text)

    def test_malformed_json(self):
        with pytest.raises(cli.ConfigError, match="malformed"):
            cli.parse_config("{not json")

    @pytest.mark.parametrize(
        "patch,path",
        [
            ({"grid": {"n": 1000, "L": 16}}, "config.grid.n"),
            ({"grid": {"n": 1024}}, "config.grid.L"),
            ({"dimension": 3}, "config.dimension"),
            ({"dt": 0}, "config.dt"),
            ({"mode": "both"}, "config.mode"),
            ({"epsilon": -1.0}, "config.epsilon"),
            ({"sample_every": 1.5}, "config.sample_every"),
            ({"initial": {"kind": "rescaled_C", "parameters": {}}}, "config.initial.parameters"),
            ({"initial": {"kind": "dyda", "parameters": {"C": 1}}}, "config.initial.parameters.C"),
            ({"solver": {"picard_tol": "tight"}}, "config.solver.picard_tol"),
            ({"t_end": 0.5, "start_time": 1.0}, "config.t_end"),
        ],
    )
    def test_path_qualified_errors(self, patch, path):
        with pytest.raises(cli.ConfigError) as info:
            cli.parse_config(json.dumps({**MINIMAL, **patch}))
        assert info.value.path == path

    @given(
        st.sampled_from([1, 2]),
        st.floats(0.01, 0.99),
        st.sampled_from(["second", "fourth"]),
        st.sampled_from(["cauchy", "fokker_planck"]),
        st.floats(1e-8, 1e-2),
        st.integers(1, 1000),
        st.integers(0, 2**31),
    )
    def test_round_trip(self, d, s, family, mode, eps, every, seed):
        obj = {
            **MINIMAL,
            "dimension": d,
            "s": s,
            "family": family,
            "mode": mode,
            "epsilon": eps,
            "sample_every": every,
            "seed": seed,
            "solver": {"picard_tol": 1e-9},
            "initial": {"kind": "bump_sum", "parameters": {"count": 3}},
        }
        cfg = cli.parse_config(json.dumps(obj))
        assert cli.parse_config(cli.serialize_config(cfg)) == cfg

    def test_obstacle_config(self):
        cfg = cli.parse_obstacle_config(json.dumps({"dimension": 1, "s": 0.5, "grid": {"n": 256, "L": 16}}))
        assert cfg.beta is None and cfg.tol == 1e-6
        with pytest.raises(cli.ConfigError):
            cli.parse_obstacle_config(json.dumps({"dimension": 1, "s": 0.5}))


class TestInitialData:
    GRID = Grid(1, 256, 16.0)
    CSET = model_constants(1, 0.5)

    def test_dyda_matches_profile(self):
        f = cli.build_initial(cli.InitialSpec("dyda"), self.GRID, self.CSET)
        assert np.array_equal(f.values, profile_dyda(self.GRID, self.CSET).values)

    def test_dyda_scale_and_shift(self):
        f = cli.build_initial(cli.InitialSpec("dyda", {"scale": 0.5, "shift": [1.0]}), self.GRID, self.CSET)
        ref = profile_dyda(self.GRID, self.CSET).values
        assert f.values.max() == pytest.approx(0.5 * ref.max())
        assert self.GRID.axis()[np.argmax(f.values)] == pytest.approx(1.0)

    def test_rescaled_by_mass(self):
        from fracfilm.diagnostics import mass

        f = cli.build_initial(cli.InitialSpec("rescaled_C", {"mass": 5.0}), Grid(1, 2048, 16.0), self.CSET)
        assert mass(f) == pytest.approx(5.0, rel=1e-3)

    def test_bump_sum_seeded(self):
        spec = cli.InitialSpec("bump_sum", {"count": 4})
        a = cli.build_initial(spec, self.GRID, self.CSET, seed=7)
        b = cli.build_initial(spec, self.GRID, self.CSET, seed=7)
        c = cli.build_initial(spec, self.GRID, self.CSET, seed=8)
        assert np.array_equal(a.values, b.values)
        assert not np.array_equal(a.values, c.values)

    def test_bump_sum_explicit(self):
        spec = cli.InitialSpec("bump_sum", {"centers": [[-2.0], [2.0]], "widths": [1.0, 1.0], "amplitudes": [1.0, 2.0]})
        f = cli.build_initial(spec, self.GRID, self.CSET)
        assert f.values.max() == pytest.approx(2.0)

    def test_bump_sum_lengths(self):
        spec = cli.InitialSpec("bump_sum", {"centers": [[0.0]], "widths": [1.0, 2.0]})
        with pytest.raises(cli.ConfigError):
            cli.build_initial(spec, self.GRID, self.CSET)

    def test_gaussian_and_higher_order(self):
        g = cli.build_initial(cli.InitialSpec("gaussian", {"width": 2.0}), self.GRID, self.CSET)
        assert g.values.max() == pytest.approx(1.0)
        h = cli.build_initial(cli.InitialSpec("higher_order", {"K": 1.0}), self.GRID, self.CSET)
        assert h.values.min() >= 0 and h.values.max() > 0

    def test_negative_rejected(self):
        spec = cli.InitialSpec("gaussian", {"amplitude": -1.0})
        with pytest.raises(cli.ConfigError):
            cli.build_initial(spec, self.GRID, self.CSET)


class TestSnapshots:
    @given(
        hnp.arrays(np.float64, st.sampled_from([(16,), (32,), (16, 16)]), elements=st.floats(-1e300, 1e300)),
        st.floats(1e-3, 1e3),
        st.floats(-10, 10),
    )
    def test_bit_exact_round_trip(self, tmp_path_factory, values, L, t):
        grid = Grid(values.ndim, values.shape[0], L)
        f = Field(grid, values, t)
        path = tmp_path_factory.mktemp("snap") / "f.ftf1"
        cli.write_snapshot(f, path, s=0.3)
        snap = cli.load_snapshot(path)
        assert snap.field.values.tobytes() == values.tobytes()
        assert snap.field.grid == grid and snap.field.time == t and snap.s == 0.3

    def test_layout(self, tmp_path):
        path = tmp_path / "f.ftf1"
        cli.write_snapshot(Field(Grid(1, 16, 2.0), np.arange(16.0), 0.5), path, s=0.25)
        raw = path.read_bytes()
        assert raw[:4] == b"FTF1"
        assert struct.unpack_from("<IBQddd", raw, 4) == (1, 1, 16, 2.0, 0.25, 0.5)
        assert len(raw) == 4 + 4 + 1 + 8 + 24 + 16 * 8

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.ftf1"
        cli.write_snapshot(Field(Grid(1, 16, 2.0), np.zeros(16)), path)
        path.write_bytes(b"XXXX" + path.read_bytes()[4:])
        with pytest.raises(cli.SnapshotFormatError, match="magic"):
            cli.read_snapshot(path)

    def test_truncated(self, tmp_path):
        path = tmp_path / "cut.ftf1"
        cli.write_snapshot(Field(Grid(1, 16, 2.0), np.zeros(16)), path)
        path.write_bytes(path.read_bytes()[:-3])
        with pytest.raises(cli.SnapshotFormatError, match="payload"):
            cli.read_snapshot(path)

    def test_dimension_mismatch(self, tmp_path):
        path = tmp_path / "f.ftf1"
        cli.write_snapshot(Field(Grid(2, 16, 2.0), np.zeros((16, 16))), path)
        with pytest.raises(cli.SnapshotFormatError, match="dimension"):
            cli.read_snapshot(path, expected_dimension=1)

    def test_nonfinite_payload(self, tmp_path):
        path = tmp_path / "f.ftf1"
        cli.write_snapshot(Field(Grid(1, 16, 2.0), np.zeros(16)), path)
        raw = bytearray(path.read_bytes())
        raw[-8:] = struct.pack("<d", float("nan"))
        path.write_bytes(bytes(raw))
        with pytest.raises(cli.SnapshotFormatError):
            cli.read_snapshot(path)


class TestNdjson:
    def test_record_line(self, tmp_path):
        c = model_constants(1, 0.5)
        v = profile_dyda(Grid(1, 256, 16.0), c)
        rec = make_record(EvolutionState(v, 0.0), MobilityParams(), StepperConfig(1e-3), c)
        line = cli.ndjson_line(rec)
        data = json.loads(line)
        assert set(data) == set(DiagnosticsRecord.__dataclass_fields__)
        path = tmp_path / "d.ndjson"
        path.write_text(line + "\n" + line + "\n")
        assert len(cli.read_ndjson(path)) == 2


class TestCommands:
    def test_unknown_subcommand(self, capsys):
        assert cli.main(["frobnicate"]) == 64
        assert "usage" in capsys.readouterr().err

    def test_missing_argument(self):
        assert cli.main(["verify", "--d", "1"]) == 64

    def test_verify_constants(self, capsys):
        assert cli.main(["verify", "--d", "1", "--s", "0.5", "--suite", "constants"]) == 0
        assert "PASS" in capsys.readouterr().out

    def test_verify_dyda(self, capsys):
        assert cli.main(["verify", "--d", "1", "--s", "0.5", "--suite", "dyda"]) == 0
        out = capsys.readouterr().out
        assert "FAIL" not in out and "ALL PASS" in out

    def test_profile(self, tmp_path, capsys):
        prefix = tmp_path / "prof"
        assert cli.main(["profile", "--d", "1", "--s", "0.5", "--family", "second", "--C", "1", "--out", str(prefix)]) == 0
        info = json.loads(capsys.readouterr().out)
        assert info["constants"]["beta"] == 0.25
        assert cli.read_snapshot(prefix.with_suffix(".ftf1")).values.max() > 0
        assert json.loads(prefix.with_suffix(".json").read_text()) == info

    def test_profile_needs_constant(self):
        assert cli.main(["profile", "--d", "1", "--s", "0.5"]) == 64

    def test_profile_fourth(self, capsys):
        assert cli.main(["profile", "--d", "1", "--s", "0.5", "--family", "fourth", "--K", "1"]) == 0
        assert "c_sd" in capsys.readouterr().out

    def test_evolve_outputs(self, tmp_path):
        cfg = write_json(tmp_path / "c.json", small_config(tmp_path))
        assert cli.main(["evolve", "--config", cfg]) == 0
        out = tmp_path / "out"
        recs = cli.read_ndjson(out / "diagnostics.ndjson")
        assert len(recs) == 3
        assert len(list(out.glob("snapshot_*.ftf1"))) == 3
        meta = json.loads((out / "run.json").read_text())
        assert meta["status"] == "ok" and meta["family"] == "second"

    def test_evolve_deterministic(self, tmp_path):
        a = write_json(tmp_path / "a.json", small_config(tmp_path, output_dir=str(tmp_path / "a")))
        b = write_json(tmp_path / "b.json", small_config(tmp_path, output_dir=str(tmp_path / "b")))
        assert cli.main(["evolve", "--config", a]) == 0
        assert cli.main(["evolve", "--config", b]) == 0
        for name in ("diagnostics.ndjson", "snapshot_00002.ftf1"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_snapshot_initial_reproduces_run(self, tmp_path):
        grid = Grid(1, 256, 16.0)
        snap = tmp_path / "vd.ftf1"
        cli.write_snapshot(profile_dyda(grid, model_constants(1, 0.5)), snap, 0.5)
        a = write_json(tmp_path / "a.json", small_config(tmp_path, output_dir=str(tmp_path / "a")))
        b = write_json(
            tmp_path / "b.json",
            small_config(
                tmp_path,
                output_dir=str(tmp_path / "b"),
                initial={"kind": "snapshot_file", "parameters": {"path": str(snap)}},
            ),
        )
        assert cli.main(["evolve", "--config", a]) == 0
        assert cli.main(["evolve", "--config", b]) == 0
        assert (tmp_path / "a" / "diagnostics.ndjson").read_bytes() == (tmp_path / "b" / "diagnostics.ndjson").read_bytes()

    def test_epsilon_continuation(self, tmp_path):
        cfg = write_json(tmp_path / "c.json", small_config(tmp_path, t_end=0.002))
        assert cli.main(["evolve", "--config", cfg, "--epsilon-continuation", "1"]) == 0
        runs = [json.loads((tmp_path / "out" / f"eps_{j}" / "run.json").read_text()) for j in (0, 1)]
        assert runs[1]["config"]["epsilon"] == runs[0]["config"]["epsilon"] / 2

    def test_evolve_nonconvergence_exit(self, tmp_path):
        solver = {"picard_max_iters": 1, "picard_tol": 1e-15, "max_step_splits": 0}
        cfg = write_json(tmp_path / "c.json", small_config(tmp_path, solver=solver))
        assert cli.main(["evolve", "--config", cfg]) == 2
        meta = json.loads((tmp_path / "out" / "run.json").read_text())
        assert meta["status"].startswith("nonconvergence")

    def test_bad_config_exit(self, tmp_path):
        cfg = write_json(tmp_path / "c.json", {**MINIMAL, "s": 1.5})
        assert cli.main(["evolve", "--config", cfg]) == 65

    def test_bad_snapshot_exit(self, tmp_path):
        bad = tmp_path / "bad.ftf1"
        bad.write_bytes(b"nope")
        cfg = write_json(
            tmp_path / "c.json",
            small_config(tmp_path, initial={"kind": "snapshot_file", "parameters": {"path": str(bad)}}),
        )
        assert cli.main(["evolve", "--config", cfg]) == 65

    def test_missing_config_file(self, tmp_path):
        assert cli.main(["evolve", "--config", str(tmp_path / "nope.json")]) == 64

    def test_obstacle(self, tmp_path):
        cfg = write_json(
            tmp_path / "o.json",
            {"dimension": 1, "s": 0.5, "grid": {"n": 256, "L": 16}, "output_dir": str(tmp_path / "o")},
        )
        assert cli.main(["obstacle", "--config", cfg]) == 0
        report = json.loads((tmp_path / "o" / "kkt_report.json").read_text())
        assert report["kkt_residual"] <= 1e-6
        assert report["linf_to_closed_form"] < 1e-2
        assert cli.read_snapshot(tmp_path / "o" / "solution.ftf1").grid == Grid(1, 256, 16.0)

    def test_obstacle_nonconvergence(self, tmp_path):
        cfg = write_json(
            tmp_path / "o.json",
            {"dimension": 1, "s": 0.5, "grid": {"n": 256, "L": 16}, "max_iters": 2, "tol": 1e-12,
             "output_dir": str(tmp_path / "o")},
        )
        assert cli.main(["obstacle", "--config", cfg]) == 2

    def test_longtime_csv(self, tmp_path):
        cfg = write_json(
            tmp_path / "l.json",
            small_config(
                tmp_path,
                mode="fokker_planck",
                dt=5e-3,
                t_end=0.02,
                initial={"kind": "dyda", "parameters": {"scale": 0.5, "shift": [0.5]}},
            ),
        )
        assert cli.main(["longtime", "--config", cfg]) == 0
        with open(tmp_path / "out" / "convergence.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["tau", "l1_distance", "fp_energy", "min_value"]
        assert len(rows) == 4
        assert float(rows[-1][1]) < float(rows[1][1])

    def test_longtime_rejects_fourth(self, tmp_path):
        cfg = write_json(tmp_path / "l.json", small_config(tmp_path, family="fourth"))
        assert cli.main(["longtime", "--config", cfg]) == 65

"""Study drivers, table emission, and the command-line interface."""

import warnings

import numpy as np
import pytest

from heatbem.cli import main
from heatbem.studies import (
    ConfigError,
    ExperimentConfig,
    records_to_csv,
    records_to_markdown,
    run_adaptive_study,
    run_single_solve,
    run_uniform_study,
)

FAST_UNIFORM = ExperimentConfig(example=1, max_level=2, kappa_convention="both")
FAST_ADAPTIVE = ExperimentConfig(example=2, target_n=12, max_steps=30)


@pytest.fixture(scope="module")
def uniform_small():
    return run_uniform_study(FAST_UNIFORM)


@pytest.fixture(scope="module")
def adaptive_small():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return run_adaptive_study(FAST_ADAPTIVE)


class TestConfig:
    def test_defaults_valid(self):
        ExperimentConfig().validate()

    def test_bad_values(self):
        with pytest.raises(ConfigError):
            ExperimentConfig(tol=2.0).validate()
        with pytest.raises(ConfigError):
            ExperimentConfig(theta=0.0).validate()
        with pytest.raises(ConfigError):
            ExperimentConfig(example=3).validate()
        with pytest.raises(ConfigError):
            ExperimentConfig(max_level=12).validate()
        with pytest.raises(ConfigError):
            ExperimentConfig(preconds=("cholesky",)).validate()


class TestUniformStudy:
    def test_degenerate_single_row(self):
        records, meshes = run_uniform_study(
            ExperimentConfig(example=1, max_level=0)
        )
        assert len(records) == 1
        assert records[0].n_elements == 2
        assert records[0].iters_none == 1
        assert records[0].eoc is None

    def test_row_shape(self, uniform_small):
        records, meshes = uniform_small
        assert [r.n_elements for r in records] == [2, 4, 8]
        assert records[1].eoc is not None
        for r in records:
            assert r.kappa_V is not None and r.kappa_V_eig is not None
            assert r.iters_none is not None
            assert r.iters_diag is not None
            assert r.iters_calderon is not None

    def test_kappa_cap_skips(self):
        records, _ = run_uniform_study(
            ExperimentConfig(example=1, max_level=2, max_kappa_n=4)
        )
        assert records[0].kappa_V is not None
        assert records[2].kappa_V is None

    def test_precond_subset(self):
        records, _ = run_uniform_study(
            ExperimentConfig(example=1, max_level=0, preconds=("calderon",))
        )
        assert records[0].iters_none is None
        assert records[0].iters_calderon == 1


class TestAdaptiveStudy:
    def test_n_strictly_increasing(self, adaptive_small):
        records, meshes = adaptive_small
        ns = [r.n_elements for r in records]
        assert all(b > a for a, b in zip(ns, ns[1:]))
        assert ns[0] == 2
        assert ns[-1] > 12

    def test_meshes_match_records(self, adaptive_small):
        records, meshes = adaptive_small
        for rec, mesh in zip(records, meshes):
            assert rec.n_elements == mesh.n_elements


class TestEmission:
    def test_csv_deterministic(self, uniform_small):
        records, _ = uniform_small
        assert records_to_csv(records) == records_to_csv(records)
        again, _ = run_uniform_study(FAST_UNIFORM)
        assert records_to_csv(records) == records_to_csv(again)

    def test_csv_shape(self, uniform_small):
        records, _ = uniform_small
        lines = records_to_csv(records).splitlines()
        assert len(lines) == len(records) + 1
        header = lines[0].split(",")
        assert header[0] == "L" and "kappa_calderon_sv" in header
        assert lines[1].split(",")[3] == ""  # eoc empty on the first row

    def test_markdown_styles(self, uniform_small, adaptive_small):
        uni = records_to_markdown(uniform_small[0], style="uniform")
        ada = records_to_markdown(adaptive_small[0], style="adaptive")
        assert "kappa(C_V^-1 V_h)" in uni
        assert "kappa(diag^-1 V_h)" in ada
        assert uni.count("|") > 10
        with pytest.raises(ValueError):
            records_to_markdown(uniform_small[0], style="wide")


class TestSingleSolve:
    def test_samples_and_flux(self):
        result = run_single_solve(
            ExperimentConfig(example=1, max_level=3), 3, [(0.25, 0.1)]
        )
        assert result.mesh.n_elements == 16
        assert len(result.interior_samples) == 1
        x, t, u_h, u_ref = result.interior_samples[0]
        assert abs(u_h - u_ref) < 0.05

    def test_zero_data_zero_flux(self):
        cfg = ExperimentConfig(custom_u0=lambda y: 0.0 * np.asarray(y), example=0)
        result = run_single_solve(cfg, 2, [(0.5, 0.5)])
        np.testing.assert_allclose(result.flux.coefficients, 0.0, atol=1e-12)
        assert result.interior_samples[0][2] == pytest.approx(0.0, abs=1e-12)

    def test_point_outside_rejected(self):
        with pytest.raises(ConfigError):
            run_single_solve(ExperimentConfig(), 1, [(1.5, 0.5)])
        with pytest.raises(ConfigError):
            run_single_solve(ExperimentConfig(), 1, [(0.5, 0.0)])


class TestCli:
    def test_study_uniform_writes_outputs(self, tmp_path):
        out = tmp_path / "run"
        code = main(
            ["study-uniform", "--levels", "1", "--out", str(out), "--max-kappa-n", "8"]
        )
        assert code == 0
        for name in ("table1.csv", "table1.md", "meta.txt", "mesh_L0.txt", "mesh_L1.txt"):
            assert (out / name).is_file()
        header = (out / "table1.csv").read_text().splitlines()[0]
        assert header.startswith("L,N,l2_error,eoc")

    def test_csv_bitwise_reproducible(self, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        for out in (out1, out2):
            assert main(["study-uniform", "--levels", "1", "--out", str(out)]) == 0
        assert (out1 / "table1.csv").read_bytes() == (out2 / "table1.csv").read_bytes()
        assert (out1 / "meta.txt").read_bytes() == (out2 / "meta.txt").read_bytes()

    def test_dump_matrices(self, tmp_path):
        out = tmp_path / "dump"
        code = main(
            ["study-uniform", "--levels", "0", "--out", str(out), "--dump-matrices"]
        )
        assert code == 0
        assert (out / "V_L0.txt").is_file()
        assert (out / "D_L0.txt").is_file()
        assert (out / "rhs_L0.txt").read_text().splitlines()[0] == "1 2"

    def test_study_adaptive_writes_outputs(self, tmp_path):
        out = tmp_path / "ada"
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            code = main(
                ["study-adaptive", "--example", "2", "--target-n", "8",
                 "--out", str(out)]
            )
        assert code == 0
        assert (out / "table2.csv").is_file()
        assert (out / "table2.md").is_file()

    def test_solve_interior_csv(self, tmp_path):
        out = tmp_path / "solve"
        code = main(
            ["solve", "--level", "3", "--points", "0.25,0.1;0.5,0.3",
             "--out", str(out)]
        )
        assert code == 0
        rows = (out / "interior.csv").read_text().splitlines()
        assert rows[0] == "x,t,u_h,u_reference,abs_error"
        assert len(rows) == 3
        assert (out / "flux_L3.txt").is_file()

    def test_solve_point_outside_is_config_error(self, tmp_path):
        code = main(
            ["solve", "--level", "1", "--points", "2.0,0.5",
             "--out", str(tmp_path / "x")]
        )
        assert code == 2

    def test_bad_flag_exits_2(self):
        with pytest.raises(SystemExit) as err:
            main(["study-uniform", "--precond", "ilu"])
        assert err.value.code == 2

    def test_bad_config_value_exits_2(self, tmp_path):
        code = main(["study-uniform", "--levels", "20", "--out", str(tmp_path / "y")])
        assert code == 2

    def test_config_file_and_override(self, tmp_path):
        cfgfile = tmp_path / "run.cfg"
        cfgfile.write_text("levels=1\nalpha=1.0\n# comment\nkappa=both\n")
        out = tmp_path / "cfg_run"
        code = main(
            ["study-uniform", "--config", str(cfgfile), "--out", str(out),
             "--levels", "0"]  # flag overrides the file
        )
        assert code == 0
        body = (out / "table1.csv").read_text().splitlines()
        assert len(body) == 2  # header + single level-0 row
        meta = (out / "meta.txt").read_text()
        assert "kappa_convention=both" in meta

    def test_unknown_config_key_exits_2(self, tmp_path):
        cfgfile = tmp_path / "bad.cfg"
        cfgfile.write_text("solver=mumps\n")
        code = main(["study-uniform", "--config", str(cfgfile)])
        assert code == 2

    def test_check_invariants_passes(self, capsys):
        code = main(["check-invariants"])
        out = capsys.readouterr().out
        assert code == 0
        assert "invariant checks passed" in out
        assert "[FAIL]" not in out

from cryoground.cli import main

TINY_RUN = """
[mesh]
type = box
extents = 1 1 1
divisions = 3 3 3

[materials.1]
kind = single_phase
crho = 2e6
lambda = 2.0

[phase]
latent_volumetric = 0

[time]
tau = 3600
t_max = 36000

[dirichlet]
6 = -20.0

[output]
directory = {out}
cadence = 5
probes = 0 0 0

[solver]
tol = 1e-8
"""


def write(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestValidate:
    def test_good_config(self, tmp_path, capsys):
        path = write(tmp_path, TINY_RUN.format(out=tmp_path / "out"))
        assert main(["validate", "--config", str(path)]) == 0
        assert "config OK" in capsys.readouterr().out

    def test_bad_config(self, tmp_path, capsys):
        path = write(tmp_path, TINY_RUN.format(out=tmp_path / "out") + "\n[bogus]\nx=1\n")
        assert main(["validate", "--config", str(path)]) == 2
        assert "configuration error" in capsys.readouterr().err

    def test_missing_file(self, tmp_path, capsys):
        assert main(["validate", "--config", str(tmp_path / "none.cfg")]) == 2


class TestRun:
    def test_tiny_run_writes_outputs(self, tmp_path, capsys):
        out = tmp_path / "out"
        path = write(tmp_path, TINY_RUN.format(out=out))
        assert main(["run", "--config", str(path)]) == 0
        assert (out / "probes.csv").exists()
        assert (out / "step_000000.vtk").exists()
        assert (out / "step_000010.vtk").exists()
        assert "completed 10 steps" in capsys.readouterr().out

    def test_solver_failure_exit_code(self, tmp_path, capsys):
        out = tmp_path / "out"
        text = TINY_RUN.format(out=out).replace("tol = 1e-8", "tol = 1e-15\nmax_iter = 1")
        path = write(tmp_path, text)
        assert main(["run", "--config", str(path)]) == 3
        assert "solver failure" in capsys.readouterr().err

    def test_workers_override_validated(self, tmp_path, capsys):
        path = write(tmp_path, TINY_RUN.format(out=tmp_path / "out"))
        assert main(["run", "--config", str(path), "--workers", "0"]) == 2


class TestOracle:
    def test_neumann_csv(self, capsys):
        code = main(
            ["oracle", "neumann", "--cells", "12", "--tau", "20000", "--samples", "4",
             "--delta", "0.2"]
        )
        assert code == 0
        captured = capsys.readouterr()
        lines = captured.out.splitlines()
        assert lines[0] == "t_seconds,front_exact_m,front_sim_m,rel_error"
        assert len(lines) == 5
        assert "lambda_s" in captured.err

    def test_stefan_alias(self, capsys):
        code = main(
            ["oracle", "neumann", "--cells", "10", "--tau", "30000", "--samples", "2",
             "--stefan", "2.0", "--delta", "0.2"]
        )
        assert code == 0

    def test_bad_beta(self, capsys):
        assert main(["oracle", "neumann", "--beta", "-1"]) == 2

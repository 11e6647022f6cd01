import numpy as np
import pytest

from sbmgnn import cli, sbm


def run(capsys, *argv):
    assert cli.main([str(a) for a in argv]) == 0
    return capsys.readouterr().out


@pytest.fixture
def instance(tmp_path, capsys):
    g, l = tmp_path / "g.txt", tmp_path / "l.txt"
    out = run(capsys, "generate", "--n", 400, "--c", 8, "--eps", 0.1, "--seed", 3,
              "--out-graph", g, "--out-labels", l)
    assert "400 vertices" in out
    return g, l


def test_generate_forward_evaluate(instance, tmp_path, capsys):
    g, l = instance
    assert sbm.read_graph(g).n_vertices == 400
    run(capsys, "forward", "--graph", g, "--labels", l, "--d", 8, "--layers", 5,
        "--emit-covariance", tmp_path / "cov.csv", "--out", tmp_path / "x.npy")
    lines = (tmp_path / "cov.csv").read_text().splitlines()
    assert lines[0] == "layer,c11,c12" and len(lines) == 7
    assert np.load(tmp_path / "x.npy").shape == (400, 8)
    ov = float(run(capsys, "evaluate", "--graph", g, "--labels", l, "--d", 16, "--layers", 20))
    assert 0.8 < ov <= 1.0
    ov = float(run(capsys, "evaluate", "--graph", g, "--labels", l, "--method", "spectral"))
    assert ov > 0.8


def test_nmi_command(instance, capsys):
    _, l = instance
    assert float(run(capsys, "nmi", "--pred-labels", l, "--true-labels", l)) == 1.0


def test_meanfield_commands(tmp_path, capsys):
    out = run(capsys, "meanfield", "--c", 8, "--eps", 0.1)
    assert "c11=" in out and "gap=" in out
    run(capsys, "meanfield", "boundary", "--c-min", 7, "--c-max", 8, "--c-step", 1, "--tol-eps", 0.01,
        "--out", tmp_path / "b.csv")
    lines = (tmp_path / "b.csv").read_text().splitlines()
    assert lines[0] == "c,eps_star,eps_it" and len(lines) == 3


def test_train_sweep_plot(tmp_path, capsys):
    (tmp_path / "t.cfg").write_text("n = 100\nd = 4\nlayers = 3\ntrain_graphs = 4\nval_graphs = 2\n"
                                    "epochs = 1\nval_every = 2\n")
    run(capsys, "train", "--config", tmp_path / "t.cfg", "--out", tmp_path / "m.bin", "--log", tmp_path / "log.csv")
    assert (tmp_path / "log.csv").read_text().startswith("step,loss,val_nmi,val_overlap\n")
    (tmp_path / "s.cfg").write_text("c_values = 6, 8\neps_values = 0.1, 0.9\nreps = 2\nn = 100\nd = 4\nlayers = 5\n")
    out = run(capsys, "sweep", "gap", "--config", tmp_path / "s.cfg", "--out", tmp_path / "gap.csv")
    assert "baseline" in out
    run(capsys, "sweep", "overlap", "--config", tmp_path / "s.cfg", "--method", "trained-model",
        "--model", tmp_path / "m.bin", "--out", tmp_path / "ov.csv")
    run(capsys, "plot", "--csv", tmp_path / "gap.csv", "--column", "sig2", "--out", tmp_path / "gap.svg")
    assert "<svg" in (tmp_path / "gap.svg").read_text()


def test_help_lists_config_keys(capsys):
    with pytest.raises(SystemExit):
        cli.main(["sweep", "--help"])
    out = capsys.readouterr().out
    assert "eps_values" in out and "--threads" in out and "--seed" in out

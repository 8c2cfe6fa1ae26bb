import numpy as np
import pytest

from qarrival import cli
from qarrival.arrival import TimeSeries
from qarrival.capscatter import LayeredPotential


def write_cfg(path, **overrides):
    lines = [f"{k.replace('__', '.')} = {v}" for k, v in overrides.items()]
    path.write_text("\n".join(lines) + "\n")
    return str(path)


@pytest.fixture()
def pot_file(tmp_path, designed):
    path = tmp_path / "pot.txt"
    designed.potential.save(path)
    return str(path)


def test_design_writes_potential_and_report(tmp_path, capsys):
    pot, rep = tmp_path / "p.txt", tmp_path / "r.txt"
    code = cli.main(["design", "--potential", str(pot), "--out", str(rep), "--seed", "0"])
    assert code == 0
    fields = dict(line.split("=", 1) for line in rep.read_text().splitlines())
    assert float(fields["max_survival_check"]) < 1e-3 and fields["target_met"] == "true"
    assert LayeredPotential.load(pot).n == 4
    assert "max_survival_check" in capsys.readouterr().out


def test_design_single_layer_misses_target(tmp_path):
    cfg = write_cfg(tmp_path / "c.cfg", design__layers=1, design__restarts=3)
    rep = tmp_path / "r.txt"
    code = cli.main(["design", "--config", cfg, "--potential", str(tmp_path / "p.txt"),
                     "--out", str(rep)])
    assert code == 2
    assert "target_met=false" in rep.read_text()


def test_malformed_config_exit_1(tmp_path, caplog):
    cfg = write_cfg(tmp_path / "c.cfg", packet__alpha=1.4, nonsense__key=3)
    assert cli.main(["design", "--config", cfg]) == 1
    assert "line 2" in caplog.text


def test_empty_time_grid_exit_1(tmp_path, pot_file):
    cfg = write_cfg(tmp_path / "c.cfg", grid__samples=0)
    assert cli.main(["simulate", "--config", cfg, "--potential", pot_file]) == 1


def test_bad_potential_file_exit_1(tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("L 0.01\nN 3\n1 -1\n")
    assert cli.main(["simulate", "--potential", str(bad), "--out", str(tmp_path / "o")]) == 1


def test_usage_error_exit_1():
    assert cli.main(["simulate", "--seed", "x"]) == 1


def test_simulate_csv(tmp_path, pot_file):
    cfg = write_cfg(tmp_path / "c.cfg", grid__samples=300)
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    assert cli.main(["simulate", "--config", cfg, "--potential", pot_file, "--out", str(out1)]) == 0
    assert cli.main(["simulate", "--config", cfg, "--potential", pot_file, "--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    text = out1.read_text().splitlines()
    header = [line for line in text if not line.startswith("#")][0]
    assert header.split(",") == ["t", *cli.COLUMNS]
    assert any(line.startswith("# tau_D:") for line in text)
    with open(out1) as fh:
        series = TimeSeries.read_csv(fh)
    assert series.t.size == 300
    tau = float(series.meta["tau_D"])
    assert 5e-6 < tau < 2e-5
    # every field survives parse -> print at 17 significant digits
    for line in text[-5:]:
        assert ",".join(f"{float(v):.17g}" for v in line.split(",")) == line
    peak = series["J_free"].max()
    assert np.max(np.abs(series["J_free"] - series["J_cap"])) <= 1e-3 * peak
    np.testing.assert_array_equal(series["absJ"], np.abs(series["J_free"]))


def test_simulate_nonconvergence_exit_3(tmp_path, pot_file, caplog):
    cfg = write_cfg(tmp_path / "c.cfg", grid__samples=50, quadrature__tol=1e-30)
    code = cli.main(["simulate", "--config", cfg, "--potential", pot_file,
                     "--out", str(tmp_path / "o.csv")])
    assert code == 3
    assert "t=" in caplog.text


CHEAP_SKIPS = ["gradient", "emission", "absorption", "dwell", "kijowski", "bohm", "quadrature",
               "oracle"]


def test_validate_detects_corrupted_layer(tmp_path, designed, capsys):
    rng = np.random.default_rng(7)
    vals = list(designed.potential.values)
    j = int(rng.integers(len(vals)))
    vals[j] = complex(vals[j].real, vals[j].imag * 1e-3)  # weaken one layer's absorption
    bad = tmp_path / "bad.txt"
    LayeredPotential(designed.potential.length, tuple(vals)).save(bad)
    args = ["validate", "--potential", str(bad)]
    for name in CHEAP_SKIPS:
        args += ["--skip", name]
    assert cli.main(args) == 4
    rows = {line.split()[0]: line.split()[1] for line in capsys.readouterr().out.splitlines()[1:]}
    assert rows["flux_identity"] == "FAIL"
    assert rows["specfun"] == "pass"


def test_validate_unknown_skip_exit_1():
    assert cli.main(["validate", "--skip", "everything"]) == 1


@pytest.mark.slow
def test_validate_default_passes_with_oracle_skipped(tmp_path, pot_file, capsys):
    out = tmp_path / "table.txt"
    code = cli.main(["validate", "--potential", pot_file, "--skip", "oracle", "--out", str(out)])
    table = capsys.readouterr().out
    assert code == 0, table
    rows = {line.split()[0]: line.split()[1] for line in table.splitlines()[1:]}
    assert rows["oracle"] == "skipped"
    assert all(v == "pass" for k, v in rows.items() if k != "oracle")
    assert out.read_text().strip() == table.strip()

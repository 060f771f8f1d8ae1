import csv
import subprocess
import sys

import pytest

from distoric import cli
from distoric.config import ConfigError, load_config
from distoric.protocols import builtin_tree, recipe_for
from distoric.noise import table_one
from distoric.superop import read_superoperators

NOISELESS = """
[bell]
F_prep = 1
p_EE = 0
mu = 1
lambda = 1
[hardware]
decoherence = no
p_g = 0
p_m = 0
p_link = 1
"""


def write(tmp_path, text, name="run.ini"):
    path = tmp_path / name
    path.write_text(text)
    return path


# ---------------------------------------------------------------------------
# configuration


def test_defaults(tmp_path):
    cfg = load_config(write(tmp_path, "[run]\nseed = 4\n"))
    assert cfg.seed == 4 and cfg.workers == 1
    assert cfg.hardware.base.n_dd == 18
    assert cfg.output_dir == (tmp_path / "results").resolve()


@pytest.mark.parametrize("text", [
    "[sweep]\nmodle = identity\n",
    "[nonsense]\nx = 1\n",
    "[hardware]\ncolumn = 7\n",
    "[sweep]\nmodel = identity\nL = 5\n",
    "[protocol]\nbuiltin = plain\nsearch = yes\n",
    "[run]\nseed = abc\n",
])
def test_invalid_configs_raise(tmp_path, text):
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, text))


def test_bell_override_rederives_decoupling_length(tmp_path):
    cfg = load_config(write(tmp_path, "[bell]\neta_ph = 0.2\n"))
    assert cfg.hardware.base.n_dd != 18
    cfg = load_config(write(tmp_path, "[bell]\neta_ph = 0.2\n[hardware]\nn_dd = 18\n"))
    assert cfg.hardware.base.n_dd == 18


def test_cache_key_tracks_inputs():
    plain = recipe_for(builtin_tree("plain"), "plain")
    modicum = recipe_for(builtin_tree("modicum"), "modicum")
    hw = table_one(2, p=0.001)
    base = cli.cache_key(plain, hw, None, "X", 100, 1)
    assert base == cli.cache_key(plain, table_one(2, p=0.001), None, "X", 100, 1)
    others = [cli.cache_key(modicum, hw, None, "X", 100, 1), cli.cache_key(plain, table_one(2, p=0.002), None, "X", 100, 1),
              cli.cache_key(plain, hw, 0.1, "X", 100, 1), cli.cache_key(plain, hw, None, "Z", 100, 1),
              cli.cache_key(plain, hw, None, "X", 101, 1), cli.cache_key(plain, hw, None, "X", 100, 2)]
    assert len({base, *others}) == 7


def test_shards_cover_the_range():
    assert cli.shards(10, 3) == [(0, 3), (3, 7), (7, 10)]
    assert cli.shards(2, 8) == [(0, 1), (1, 2)]
    assert cli.derive_seed(1, "x") == cli.derive_seed(1, "x") != cli.derive_seed(2, "x")
    assert 0 <= cli.derive_seed(5) < 2 ** 63


# ---------------------------------------------------------------------------
# commands


def test_exit_codes(tmp_path, capsys):
    assert cli.main(["threshold", "-c", str(write(tmp_path, "[sweep]\nmodle = identity\n"))]) == cli.EXIT_CONFIG
    assert "unknown key" in capsys.readouterr().err
    ident = write(tmp_path, "[sweep]\nmodel = identity\np = 0.01 0.02\nL = 4 6\nshots = 10\n", "ident.ini")
    assert cli.main(["threshold", "-c", str(ident)]) == cli.EXIT_RUNTIME
    assert "do not cross" in capsys.readouterr().err
    # the success table survives the rejected fit
    rows = list(csv.DictReader(open(tmp_path / "results" / "threshold.csv")))
    assert len(rows) == 4 and all(r["successes"] == "10" for r in rows)
    assert cli.main(["fit", "-c", str(ident), "--data", str(tmp_path / "missing.csv")]) == cli.EXIT_CONFIG


PHEN = """
[run]
seed = 3
output_dir = {out}
[sweep]
model = phenomenological
p = 0.02 0.06 0.10
L = 4 6 8
shots = 40
"""


def test_threshold_table_is_independent_of_worker_count(tmp_path):
    tables = []
    for workers in (1, 2):
        cfg = write(tmp_path, PHEN.format(out=f"w{workers}"), f"w{workers}.ini")
        cli.main(["threshold", "-c", str(cfg), "--workers", str(workers)])
        tables.append((tmp_path / f"w{workers}" / "threshold.csv").read_bytes())
    assert tables[0] == tables[1]
    assert len(tables[0].splitlines()) == 10


def test_threshold_rows_are_reused(tmp_path, monkeypatch):
    cfg = write(tmp_path, PHEN.format(out="out"))
    cli.main(["threshold", "-c", str(cfg)])
    first = (tmp_path / "out" / "threshold.csv").read_bytes()
    monkeypatch.setattr(cli, "count_successes", lambda *a, **k: pytest.fail("recomputed a stored row"))
    cli.main(["threshold", "-c", str(cfg)])
    assert (tmp_path / "out" / "threshold.csv").read_bytes() == first


def test_fit_command_on_a_table(tmp_path, capsys):
    from distoric.fitstats import DataPoint, model, write_data

    beta = [0.8, -20.0, -80.0, 0.05, 0.005, 1.0, 1.0]
    data = [DataPoint(p, L, int(round(float(model(beta, p, L)) * 10 ** 6)), 10 ** 6)
            for L in (4, 6, 8) for p in (0.004, 0.0045, 0.005, 0.0055, 0.006)]
    write_data(tmp_path / "data.csv", data)
    cfg = write(tmp_path, "[run]\noutput_dir = fit\n")
    assert cli.main(["fit", "-c", str(cfg), "--data", str(tmp_path / "data.csv")]) == 0
    assert "p_th" in capsys.readouterr().out
    assert (tmp_path / "fit" / "threshold_fit.csv").is_file() and (tmp_path / "fit" / "threshold.png").is_file()


SUPEROP = NOISELESS + """
[run]
seed = 2
[protocol]
builtin = plain
[superop]
shots = 4
[sweep]
p = 0
L = 4
shots = 5
"""


def test_superop_cache(tmp_path, monkeypatch, capsys):
    cfg = write(tmp_path, SUPEROP)
    assert cli.main(["superop", "-c", str(cfg)]) == 0
    files = sorted((tmp_path / "cache").glob("*.superop"))
    assert len(files) == 2
    for f in files:
        success, fail, meta = read_superoperators(f)
        assert success.stabilizer_fidelity == pytest.approx(1.0, abs=1e-9) and success.p_ghz == 1.0
        assert (tmp_path / "cache" / f"{meta['key']}.convergence.csv").is_file()
    before = {f: f.read_bytes() for f in files}
    monkeypatch.setattr(cli, "accumulate", lambda *a, **k: pytest.fail("recomputed a cached superoperator"))
    assert cli.main(["superop", "-c", str(cfg)]) == 0
    assert {f: f.read_bytes() for f in files} == before


def test_superop_files_independent_of_worker_count(tmp_path):
    text = SUPEROP.replace("[superop]\nshots = 4", "[superop]\nshots = 6").replace("p_g = 0", "p_g = 0.01")
    out = []
    for workers in (1, 3):
        cfg = write(tmp_path, text, f"s{workers}.ini")
        cli.main(["superop", "-c", str(cfg), "--workers", str(workers), "--cache-dir", str(tmp_path / f"c{workers}")])
        out.append({f.name: f.read_bytes() for f in (tmp_path / f"c{workers}").glob("*.superop")})
    assert out[0] == out[1] and len(out[0]) == 2


def test_threshold_needs_superoperators_first(tmp_path, capsys):
    cfg = write(tmp_path, SUPEROP)
    assert cli.main(["threshold", "-c", str(cfg)]) == cli.EXIT_RUNTIME
    assert "superop subcommand" in capsys.readouterr().err


SEARCH = NOISELESS + """
[run]
seed = 1
[search]
n_max = 4
k_max = 3
n_buffer = 2
shots = 3
"""


def test_search_command_is_deterministic_and_resumable(tmp_path, capsys):
    cfg = write(tmp_path, SEARCH)
    assert cli.main(["search", "-c", str(cfg)]) == 0
    out = tmp_path / "results" / "search"
    first = {f.name: f.read_bytes() for f in out.iterdir()}
    assert "best.recipe" in first and "summary.csv" in first
    best = (out / "best.recipe").read_text()
    assert "k 3" in best.splitlines()
    rows = list(csv.DictReader(open(out / "summary.csv")))
    assert float(rows[0]["score"]) == pytest.approx(1.0, abs=1e-9)
    # a second run resumes from the buffer snapshot and writes the same files
    assert cli.main(["search", "-c", str(cfg)]) == 0
    assert {f.name: f.read_bytes() for f in out.iterdir()} == first
    # the searched protocol can drive the superoperator step
    sup = write(tmp_path, SEARCH + "[protocol]\nsearch = yes\n[superop]\nshots = 2\n[sweep]\np = 0\nL = 4\n",
                "sup.ini")
    assert cli.main(["superop", "-c", str(sup)]) == 0


def test_console_script_entry_point(tmp_path):
    cfg = write(tmp_path, "[sweep]\nmodle = identity\n")
    res = subprocess.run([sys.executable, "-m", "distoric.cli", "threshold", "-c", str(cfg)],
                         capture_output=True, text=True)
    assert res.returncode == 1 and "configuration error" in res.stderr

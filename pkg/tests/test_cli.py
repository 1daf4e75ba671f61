import json
import logging
from pathlib import Path

import pytest

from sectorlab import cli, spectra

CONFIG = """\
[sector]
n = 3
target_size = 3000
orientation = zigzag

[analysis]
windows = 0.02:0.8, 2.9:3.0
analyses = nnsd, delta3, lengths, parity
degree = 5
L_max = 10
"""


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = root / "exp.ini"
    cfg.write_text(CONFIG)
    return root, cfg


@pytest.fixture(scope="module")
def first_run(workspace):
    root, cfg = workspace
    out = root / "run1"
    code = cli.main(["run", "--config", str(cfg), "--cache-dir", str(root / "cache"), "--out", str(out)])
    return code, out


@pytest.mark.filterwarnings("ignore::UserWarning")
def test_run_succeeds(first_run):
    code, out = first_run
    assert code == 0
    summary = json.loads((out / "summary.json").read_text())
    assert set(summary) == {"0.02:0.8", "2.9:3"}
    dirac = summary["0.02:0.8"]
    assert dirac["n_levels"] > 50
    assert set(dirac["ks"]) == {"Poisson", "GOE", "TwoGOE"}
    assert len(dirac["length_peaks"]) > 0
    assert sum(dirac["parity_counts"]) == dirac["n_levels"]
    # the band-edge window is too short for statistics; the failure is recorded, not fatal
    assert "nnsd" in summary["2.9:3"]["errors"]


def test_manifest_complete(first_run):
    _, out = first_run
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["computed"] and not manifest["cache_hits"]
    listed = {f["path"] for f in manifest["files"]}
    for name in ("summary.json", "window_0.02_0.8/spectrum.csv", "window_0.02_0.8/ks.json",
                 "window_0.02_0.8/unfolded.csv", "window_0.02_0.8/length_spectrum.csv"):
        assert name in listed
    for f in manifest["files"]:
        assert (out / f["path"]).stat().st_size == f["bytes"]


def test_second_run_uses_cache(workspace, first_run, monkeypatch, caplog):
    root, cfg = workspace

    def forbidden(*a, **k):
        raise AssertionError("spectrum recomputed despite a warm cache")

    monkeypatch.setattr(spectra, "eig_window", forbidden)
    out = root / "run2"
    with caplog.at_level(logging.INFO, logger="sectorlab"):
        code = cli.main(["run", "--config", str(cfg), "--cache-dir", str(root / "cache"),
                         "--out", str(out), "--threads", "2"])
    assert code == 0
    assert sum("cache hit" in r.getMessage() for r in caplog.records) == 2
    manifest = json.loads((out / "manifest.json").read_text())
    assert len(manifest["cache_hits"]) == 2 and not manifest["computed"]
    assert json.loads((out / "summary.json").read_text()) == json.loads((first_run[1] / "summary.json").read_text())


def test_lengths_from_cache_skip_lattice(workspace, first_run, monkeypatch, tmp_path):
    root, cfg = workspace

    def forbidden(*a, **k):
        raise AssertionError("lattice rebuilt for a cached length spectrum")

    monkeypatch.setattr(spectra, "eig_window", forbidden)
    monkeypatch.setattr(cli.lattice, "build_sector", forbidden)
    out = tmp_path / "lengths"
    assert cli.main(["lengths", "--config", str(cfg), "--cache-dir", str(root / "cache"), "--out", str(out)]) == 0
    a = (out / "window_0.02_0.8" / "length_spectrum.csv").read_text()
    b = (first_run[1] / "window_0.02_0.8" / "length_spectrum.csv").read_text()
    assert a == b


def test_compare(first_run, capsys):
    _, out = first_run
    a = out / "window_0.02_0.8"
    same = cli.compare(cli.load_report(a), cli.load_report(a))
    assert all(v == 0 for v in same["ks_difference"].values())
    assert cli.main(["compare", str(a), str(a)]) == 0
    assert "verdict" in capsys.readouterr().out


def test_compare_rejects_mismatched_binning(first_run, tmp_path, capsys):
    _, out = first_run
    a = out / "window_0.02_0.8"
    ks = json.loads((a / "ks.json").read_text())
    ks["bin_width"] = ks["bin_width"] * 2
    other = tmp_path / "other"
    other.mkdir()
    (other / "ks.json").write_text(json.dumps(ks))
    with pytest.raises(ValueError, match="binning"):
        cli.compare(cli.load_report(a), cli.load_report(other))
    assert cli.main(["compare", str(a), str(other)]) == 1
    assert "mismatched binning" in capsys.readouterr().err


def test_build_writes_lattice(workspace, tmp_path):
    _, cfg = workspace
    assert cli.main(["build", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    info = json.loads((tmp_path / "lattice" / "lattice.json").read_text())
    header = (tmp_path / "lattice" / "hamiltonian.mtx").read_text().splitlines()
    assert header[0].startswith("%%MatrixMarket")
    assert int(header[2].split()[0]) == info["N"]
    assert len((tmp_path / "lattice" / "sites.csv").read_text().splitlines()) == info["N"] + 1


def test_bad_config_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text(CONFIG.replace("analyses = nnsd, delta3, lengths, parity", "analyses ="))
    assert cli.main(["run", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert "analysis.analyses" in err and "line 8" in err


def test_unknown_figure(capsys):
    assert cli.main(["repro", "7z"]) == 2
    assert "7z" in capsys.readouterr().err


@pytest.mark.parametrize("figure", sorted(cli.PRESETS))
def test_presets_parse(figure, tmp_path):
    cfg = cli.preset_config(figure, str(tmp_path))
    assert cfg.analyses and cfg.windows
    assert cfg.output_dir == str(tmp_path)


def test_qb_subcommand(tmp_path, capsys):
    out = tmp_path / "qb"
    assert cli.main(["qb", "--n", "6", "--count", "300", "--out", str(out)]) == 0
    result = json.loads(capsys.readouterr().out)
    assert result
    assert len((out / "qb_levels.csv").read_text().splitlines()) == 301
    assert (out / "manifest.json").exists()

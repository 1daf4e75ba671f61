"""Command-line experiment runner.

Every pipeline reads an :class:`~sectorlab.config.ExperimentConfig`, caches
window spectra under a hash of the lattice and hopping parameters, and writes
CSV (plus optional SVG) outputs together with a ``manifest.json`` that lists
every file it wrote.

Subcommands::

    sectorlab build    --config exp.ini      lattice CSV and Hamiltonian (MatrixMarket)
    sectorlab spectrum --config exp.ini      window eigenvalues
    sectorlab stats    --config exp.ini      NNSD, Delta_3 and KS distances
    sectorlab lengths  --config exp.ini      length spectra and orbit lengths
    sectorlab run      --config exp.ini      every analysis listed in the config
    sectorlab qb       --n 12 --count 3000   quantum sector billiard levels
    sectorlab compare  DIR_A DIR_B           side-by-side KS distances and verdicts
    sectorlab repro    2b                    preset desk-scale figure reproduction
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import config as cfgmod
from . import hamiltonian, lattice, lengthspec, qbilliard, rmtstats, spectra, unfold
from .config import ConfigError, ExperimentConfig

log = logging.getLogger("sectorlab")

VERDICT_THRESHOLD = 0.1
DELTA3_L = tuple(float(x) for x in np.arange(1.0, 41.0, 1.0))
BAND_EDGE_REACH = 0.5  # windows within this distance of a band edge use the band-edge q(E) map
QB_MATCH_REACH = 0.05
ANALYSIS_ERRORS = (
    rmtstats.StatsError, unfold.UnfoldError, lengthspec.LengthSpecError, qbilliard.BilliardError,
)


# --- manifest ------------------------------------------------------------------------------

@dataclass
class Manifest:
    """Records every output file so a run can be audited or diffed."""

    root: Path
    config_hash: str
    config: dict
    files: list[Path] = field(default_factory=list)
    cache_hits: list[str] = field(default_factory=list)
    computed: list[str] = field(default_factory=list)

    def add(self, *paths: Path) -> None:
        for p in paths:
            p = Path(p)
            if p not in self.files:
                self.files.append(p)

    def write(self) -> Path:
        entries = []
        for p in sorted(self.files):
            entries.append({
                "path": str(p.relative_to(self.root)),
                "sha256": hashlib.sha256(p.read_bytes()).hexdigest(),
                "bytes": p.stat().st_size,
            })
        out = self.root / "manifest.json"
        out.write_text(json.dumps({
            "config_hash": self.config_hash,
            "config": self.config,
            "files": entries,
            "cache_hits": self.cache_hits,
            "computed": self.computed,
        }, indent=2))
        return out


def _window_tag(window: tuple[float, float]) -> str:
    return f"window_{window[0]:g}_{window[1]:g}"


# --- pipeline ------------------------------------------------------------------------------

class Pipeline:
    """One experiment: a lattice, its Hamiltonian and cached window spectra."""

    def __init__(self, cfg: ExperimentConfig, threads: int = 1, svg: bool = False,
                 cache_dir: Optional[str] = None, output_dir: Optional[str] = None):
        self.cfg = cfg
        self.threads = max(1, int(threads))
        self.svg = svg
        if cache_dir is not None:
            self.cache = spectra.SpectrumCache(cache_dir)
        else:
            self.cache = spectra.SpectrumCache(cfg.resolved_cache_dir())
        self.out = Path(output_dir or cfg.output_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.manifest = Manifest(self.out, cfg.full_hash, cfg.to_dict())
        self._lat: Optional[lattice.Lattice] = None
        self._H: Optional[hamiltonian.SparseHamiltonian] = None
        self._refs: Optional[list[rmtstats.EnsembleRef]] = None

    # lazily built so a warm cache never touches the lattice
    @property
    def lat(self) -> lattice.Lattice:
        if self._lat is None:
            log.info("building sector n=%d (%s)", self.cfg.sector.n, self.cfg.sector.orientation.value)
            self._lat = lattice.build_sector(self.cfg.sector)
            log.info("lattice has %d sites", self._lat.N)
        return self._lat

    @property
    def H(self) -> hamiltonian.SparseHamiltonian:
        if self._H is None:
            self._H = hamiltonian.assemble(self.lat, self.cfg.params)
        return self._H

    @property
    def refs(self) -> list[rmtstats.EnsembleRef]:
        if self._refs is None:
            self._refs = [
                rmtstats.poisson_reference(),
                rmtstats.goe_reference(),
                rmtstats.two_goe_reference(),
            ]
        return self._refs

    @property
    def t_ratio(self) -> float:
        return self.cfg.params.t_prime_over_t

    # -- build ---------------------------------------------------------------
    def build(self) -> lattice.Lattice:
        sites, bonds = lattice.write_csv(self.lat, self.out / "lattice")
        mtx = hamiltonian.write_matrix_market(self.H, self.out / "lattice" / "hamiltonian.mtx")
        info = self.out / "lattice" / "lattice.json"
        info.write_text(json.dumps({
            "N": self.lat.N, "L0": self.lat.L0, "alpha": self.lat.alpha,
            "radius": self.lat.radius, "sector": self.cfg.sector.to_dict(),
        }, indent=2))
        self.manifest.add(sites, bonds, mtx, info)
        return self.lat

    # -- spectra -------------------------------------------------------------
    def spectrum(self, window: tuple[float, float], want_vectors: bool = False,
                 threads: int = 1) -> spectra.SpectrumRecord:
        key = self.cfg.spectrum_hash
        rec = self.cache.load(key, window, need_vectors=want_vectors)
        if rec is not None:
            log.info("cache hit: spectrum %s %s (%d levels)", key, window, rec.count)
            self.manifest.cache_hits.append(f"{key} {window[0]:g}:{window[1]:g}")
            return rec
        log.info("computing spectrum in [%g, %g)", *window)
        rec = spectra.eig_window(self.H, window[0], window[1], want_vectors,
                                 threads=threads, config_hash=key)
        self.manifest.computed.append(f"{key} {window[0]:g}:{window[1]:g}")
        self.cache.directory.mkdir(parents=True, exist_ok=True)
        self.cache.store(rec)
        return rec

    def spectra(self, want_vectors: bool = False) -> dict[tuple[float, float], spectra.SpectrumRecord]:
        windows = list(self.cfg.windows)
        if self.threads > 1 and len(windows) > 1:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                recs = list(pool.map(lambda w: self.spectrum(w, want_vectors), windows))
        else:
            recs = [self.spectrum(w, want_vectors, threads=self.threads) for w in windows]
        out = dict(zip(windows, recs))
        for w, rec in out.items():
            d = self.out / _window_tag(w)
            d.mkdir(parents=True, exist_ok=True)
            self.manifest.add(spectra.write_csv(rec, d / "spectrum.csv"))
        return out

    # -- analyses ------------------------------------------------------------
    def unfolded(self, rec: spectra.SpectrumRecord) -> unfold.UnfoldedSequence:
        if self.cfg.unfold == "dos":
            return unfold.unfold_with_dos(rec.eigenvalues, rec.window, self.t_ratio)
        return unfold.polynomial_unfold(rec.eigenvalues, rec.window, self.cfg.degree)

    def stats(self, rec: spectra.SpectrumRecord, delta3: bool = True) -> rmtstats.StatReport:
        d = self.out / _window_tag(rec.window)
        seq = self.unfolded(rec)
        L_values = [L for L in DELTA3_L if L <= self.cfg.L_max] if delta3 else []
        report = rmtstats.analyze(seq, self.refs, self.cfg.bin_width, L_values, rec.window)
        self.manifest.add(*report.write(d, self.svg, self.refs))
        self.manifest.add(*seq.write_csv(d / "unfolded.csv"))
        log.info("window %s: %d levels, KS %s -> %s", rec.window, report.n_levels,
                 {k: round(v, 4) for k, v in report.ks.items()}, rmtstats.verdict(report.ks, VERDICT_THRESHOLD))
        return report

    def band_edge(self, window: tuple[float, float]) -> Optional[float]:
        """The band edge within reach of ``window``, if any."""
        top = 3.0 - 6.0 * self.t_ratio if self.t_ratio > 0 else 3.0
        bottom = -3.0 - 6.0 * self.t_ratio
        for edge in (top, bottom):
            if min(abs(window[0] - edge), abs(window[1] - edge)) <= BAND_EDGE_REACH:
                return edge
        return None

    def lengths(self, rec: spectra.SpectrumRecord) -> lengthspec.LengthSpectrum:
        d = self.out / _window_tag(rec.window)
        edge = self.band_edge(rec.window)
        # the record carries N, so a cached spectrum needs no lattice rebuild here
        alpha = self.cfg.sector.alpha
        L0 = math.sqrt(math.sqrt(3.0) * rec.dim / (2.0 * alpha))
        if edge is not None:
            seq = lengthspec.to_wavevectors(rec.eigenvalues, "BandEdge", L0, E_edge=edge, window=rec.window)
        else:
            seq = lengthspec.to_wavevectors(rec.eigenvalues, "Dirac", L0,
                                            E_dirac=3.0 * self.t_ratio, window=rec.window)
        l_max = min(lengthspec.L_MAX, 12.0)
        step = seq_step(seq)
        spec = lengthspec.length_spectrum(seq, np.arange(0.2, l_max, step))
        orbits = lengthspec.enumerate_orbits(alpha, l_max)
        self.manifest.add(spec.write_csv(d / "length_spectrum.csv"),
                          lengthspec.write_orbits_csv(orbits, d / "orbits.csv"))
        if self.svg:
            self.manifest.add(lengthspec.plot_length_spectrum(spec, orbits, d / "length_spectrum.svg"))
        return spec

    def qb_match(self, rec: spectra.SpectrumRecord) -> Optional[qbilliard.BandEdgeMatch]:
        edge = self.band_edge(rec.window)
        e = rec.eigenvalues
        if edge is None or len(e) == 0 or np.any(np.abs(e - edge) > QB_MATCH_REACH):
            warnings.warn(f"qb_match skipped: window {rec.window} is not within {QB_MATCH_REACH} t of a band edge")
            return None
        k_max = 2 * self.lat.L0 * math.sqrt(np.max(np.abs(e - edge)))
        levels = qbilliard.sector_spectrum(self.lat.alpha, k_max)
        match = qbilliard.match_band_edge(e, self.lat.L0, levels, edge)
        d = self.out / _window_tag(rec.window)
        path = d / "qb_match.csv"
        with open(path, "w") as fh:
            fh.write("E,m,n,k,ratio\n")
            for E, lv, r in zip(match.energies, match.levels, match.ratios):
                fh.write(f"{E!r},{lv.m},{lv.n},{lv.k!r},{r!r}\n")
        self.manifest.add(path)
        if not match.complete:
            warnings.warn(match.note)
        log.info("band-edge match: median ratio %.4f, %.1f%% within 2%%", match.median_ratio(),
                 100 * match.fraction_near_median())
        return match

    def parity(self, rec: spectra.SpectrumRecord) -> Optional[rmtstats.ParitySplit]:
        refl = lattice.reflection_map(self.lat)
        if refl is None:
            warnings.warn("parity analysis skipped: the lattice has no mirror symmetry")
            return None
        split = rmtstats.parity_split(rec.eigenvalues, rec.eigenvectors, refl)
        d = self.out / _window_tag(rec.window)
        for name, levels in (("even", split.even), ("odd", split.odd)):
            sub = d / f"parity_{name}"
            sub.mkdir(parents=True, exist_ok=True)
            path = sub / "levels.csv"
            np.savetxt(path, levels, fmt="%.17g", header="E", comments="")
            self.manifest.add(path)
            if len(levels) > rmtstats.MIN_KS_SPACINGS:
                seq = unfold.polynomial_unfold(levels, None, self.cfg.degree)
                report = rmtstats.analyze(seq, self.refs, self.cfg.bin_width, [], rec.window)
                self.manifest.add(*report.write(sub, self.svg, self.refs))
        return split

    # -- drivers -------------------------------------------------------------
    def _analysis(self, name: str, rec: spectra.SpectrumRecord, analyses: Sequence[str], res: dict) -> None:
        if name == "nnsd" or (name == "delta3" and "nnsd" not in analyses):
            report = self.stats(rec, delta3="delta3" in analyses)
            res["ks"] = report.ks
            res["verdict"] = rmtstats.verdict(report.ks, VERDICT_THRESHOLD)
        elif name == "lengths":
            res["length_peaks"] = self.lengths(rec).dominant_peaks(6, l_min=1.0).tolist()
        elif name == "qb_match":
            m = self.qb_match(rec)
            if m is not None:
                res["qb_median_ratio"] = m.median_ratio()
                res["qb_fraction_within_2pct"] = m.fraction_near_median(0.02, 300)
        elif name == "parity":
            split = self.parity(rec)
            if split is not None:
                res["parity_counts"] = [len(split.even), len(split.odd), len(split.unclassified)]

    def run(self, analyses: Optional[Sequence[str]] = None) -> dict:
        analyses = tuple(analyses or self.cfg.analyses)
        results: dict = {}
        recs = self.spectra(want_vectors="parity" in analyses)
        for w, rec in recs.items():
            res: dict = {"n_levels": rec.count}
            for name in analyses:
                try:
                    self._analysis(name, rec, analyses, res)
                except ANALYSIS_ERRORS as exc:
                    # one starved window should not sink the other windows of the experiment
                    warnings.warn(f"{name} on window {w}: {exc}")
                    res.setdefault("errors", {})[name] = str(exc)
            results[f"{w[0]:g}:{w[1]:g}"] = res
        summary = self.out / "summary.json"
        summary.write_text(json.dumps(results, indent=2))
        self.manifest.add(summary)
        self.manifest.write()
        return results


def seq_step(seq: lengthspec.WavevectorSeq) -> float:
    """Length-grid step: a quarter of the resolution ``2 pi / span``."""
    return 2 * math.pi / seq.span / 4 if seq.span > 0 else 0.01


# --- compare -------------------------------------------------------------------------------

def load_report(directory: Path | str) -> dict:
    path = Path(directory)
    if path.is_dir():
        path = path / "ks.json"
    return json.loads(path.read_text())


def compare(report_a: dict, report_b: dict) -> dict:
    """Side-by-side KS distances and nearest-reference verdicts of two reports."""
    if report_a.get("bin_width") != report_b.get("bin_width"):
        raise ValueError(f"mismatched binning: {report_a.get('bin_width')} vs {report_b.get('bin_width')}")
    keys = sorted(set(report_a["ks"]) & set(report_b["ks"]))
    return {
        "window": [report_a.get("window"), report_b.get("window")],
        "ks": {k: [report_a["ks"][k], report_b["ks"][k]] for k in keys},
        "ks_difference": {k: report_b["ks"][k] - report_a["ks"][k] for k in keys},
        "verdict": [rmtstats.verdict({k: report_a["ks"][k] for k in keys}, VERDICT_THRESHOLD),
                    rmtstats.verdict({k: report_b["ks"][k] for k in keys}, VERDICT_THRESHOLD)],
    }


def format_comparison(cmp: dict) -> str:
    lines = [f"{'reference':<10} {'A':>10} {'B':>10}"]
    for k, (a, b) in cmp["ks"].items():
        lines.append(f"{k:<10} {a:>10.4f} {b:>10.4f}")
    lines.append(f"{'verdict':<10} {cmp['verdict'][0]:>10} {cmp['verdict'][1]:>10}")
    return "\n".join(lines)


# --- quantum billiard ----------------------------------------------------------------------

def run_qb(n: int, count: int, out: Path, svg: bool = False, degree: int = 6) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    alpha = math.pi / n
    levels = qbilliard.lowest_levels(alpha, count)
    manifest = Manifest(out, spectra.config_hash({"qb": n, "count": count}), {"n": n, "count": count})
    manifest.add(qbilliard.write_csv(levels, out / "qb_levels.csv"))
    k = np.array([lv.k for lv in levels])
    seq = unfold.polynomial_unfold(k, None, degree)
    refs = [rmtstats.poisson_reference(), rmtstats.goe_reference()]
    report = rmtstats.analyze(seq, refs, L_values=[5.0, 10.0, 15.0, 20.0])
    manifest.add(*report.write(out, svg, refs))
    wseq = lengthspec.to_wavevectors(k, "QuantumBilliard")
    spec = lengthspec.length_spectrum(wseq, np.arange(0.2, 12.0, seq_step(wseq)))
    orbits = lengthspec.enumerate_orbits(alpha, 12.0)
    manifest.add(spec.write_csv(out / "length_spectrum.csv"),
                 lengthspec.write_orbits_csv(orbits, out / "orbits.csv"))
    if svg:
        manifest.add(lengthspec.plot_length_spectrum(spec, orbits, out / "length_spectrum.svg"))
    manifest.write()
    return {"levels": len(levels), "k_max": float(k[-1]), "weyl": float(qbilliard.weyl_count(k[-1], alpha)),
            "ks": report.ks}


# --- figure presets ------------------------------------------------------------------------

def _preset(n, size, windows, analyses, orientation="zigzag", t_prime=0.0, perturbations=""):
    return {
        "sector": {"n": n, "target_size": size, "orientation": orientation, "perturbations": perturbations},
        "params": {"t": 2.8, "t_prime": t_prime},
        "analysis": {"windows": windows, "analyses": analyses},
    }


DIRAC = "0.02:0.2"
EDGE = "2.95:3.0"
HIGH = "0.7:0.8"
SIZE_15 = 57_600
SIZE_60 = 50_000

# desk-scale experiment presets, keyed by figure id
PRESETS: dict[str, dict] = {
    "2b": _preset(12, SIZE_15, DIRAC, "nnsd, delta3"),
    "2f": _preset(12, SIZE_15, EDGE, "nnsd, delta3"),
    "3": _preset(12, SIZE_15, f"{DIRAC}, {EDGE}", "delta3"),
    "4": _preset(12, SIZE_15, EDGE, "qb_match"),
    "5": _preset(12, SIZE_15, EDGE, "lengths"),
    "6": _preset(12, SIZE_15, "0.32:0.5, -2.7:-2.6, -3.6:-3.5", "nnsd, delta3", t_prime=0.28),
    "9a": _preset(3, SIZE_60, DIRAC, "nnsd"),
    "9b": _preset(3, SIZE_60, HIGH, "nnsd"),
    "9c": _preset(3, SIZE_60, DIRAC, "nnsd", orientation="armchair"),
    "9d": _preset(3, SIZE_60, HIGH, "nnsd", orientation="armchair"),
    "9e": _preset(3, SIZE_60, DIRAC, "nnsd", orientation="armchair", perturbations="remove_edge_row:second"),
    "9f": _preset(3, SIZE_60, HIGH, "nnsd", orientation="armchair", perturbations="remove_edge_row:second"),
    "10": _preset(3, SIZE_60, HIGH, "lengths", orientation="armchair"),
}


def preset_config(figure: str, output_dir: str) -> ExperimentConfig:
    key = figure.lower().removeprefix("fig").removeprefix(".").strip()
    if key not in PRESETS:
        raise ConfigError(f"unknown figure id {figure!r}; choose from {sorted(PRESETS)}", "figure")
    data = json.loads(json.dumps(PRESETS[key]))
    data["output"] = {"output_dir": output_dir}
    return cfgmod.from_mapping(data)


def dos_scan(pipe: Pipeline, lo: float, hi: float, width: float = 0.02) -> Path:
    """Histogram DOS from inertia counts; the minimum marks the Dirac point when t' != 0."""
    edges = np.arange(lo, hi + 0.5 * width, width)
    counts = spectra.level_counts(pipe.H, edges)
    path = pipe.out / "dos.csv"
    np.savetxt(path, np.column_stack([0.5 * (edges[1:] + edges[:-1]), counts]),
               delimiter=",", header="E,count", comments="", fmt="%.10g")
    pipe.manifest.add(path)
    return path


# --- argument parsing ----------------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--cache-dir", help=f"spectrum cache (overrides ${cfgmod.CACHE_ENV} and the config)")
    common.add_argument("--threads", type=int, default=1, help="parallel workers for windows / slices")
    common.add_argument("--svg", action="store_true", help="also write SVG plots")
    common.add_argument("--out", help="output directory (overrides the config)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="sectorlab", description="Spectral statistics of graphene sector billiards.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, text in (
        ("build", "write the lattice and Hamiltonian"),
        ("spectrum", "compute window spectra"),
        ("stats", "NNSD, Delta_3 and KS distances per window"),
        ("lengths", "length spectra per window"),
        ("run", "every analysis listed in the config"),
    ):
        sp = sub.add_parser(name, parents=[common], help=text)
        sp.add_argument("--config", required=True, help="INI or JSON experiment file")
    q = sub.add_parser("qb", parents=[common], help="quantum sector billiard levels and statistics")
    q.add_argument("--n", type=int, default=12, help="sector angle pi/n")
    q.add_argument("--count", type=int, default=3000)
    c = sub.add_parser("compare", parents=[common], help="compare two stats reports")
    c.add_argument("report_a")
    c.add_argument("report_b")
    r = sub.add_parser("repro", parents=[common], help="desk-scale figure reproduction")
    r.add_argument("figure", help=f"one of {', '.join(sorted(PRESETS))}")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    logging.getLogger("sectorlab").setLevel(logging.DEBUG if args.verbose else logging.INFO)
    try:
        return _dispatch(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, spectra.SpectrumError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _dispatch(args) -> int:
    if args.command == "qb":
        out = Path(args.out or f"qb_n{args.n}")
        print(json.dumps(run_qb(args.n, args.count, out, args.svg), indent=2))
        return 0
    if args.command == "compare":
        cmp = compare(load_report(args.report_a), load_report(args.report_b))
        print(format_comparison(cmp))
        return 0
    if args.command == "repro":
        cfg = preset_config(args.figure, args.out or f"repro_{args.figure}")
        pipe = Pipeline(cfg, args.threads, args.svg, args.cache_dir)
        if cfg.params.t_prime:
            dos_scan(pipe, 0.0, 0.6)
        print(json.dumps(pipe.run(), indent=2))
        return 0

    cfg = cfgmod.load(args.config)
    pipe = Pipeline(cfg, args.threads, args.svg, args.cache_dir, args.out)
    if args.command == "build":
        pipe.build()
        pipe.manifest.write()
    elif args.command == "spectrum":
        for w, rec in pipe.spectra().items():
            print(f"[{w[0]:g}, {w[1]:g}): {rec.count} levels ({rec.method.value})")
        pipe.manifest.write()
    elif args.command == "stats":
        print(json.dumps(pipe.run(("nnsd", "delta3")), indent=2))
    elif args.command == "lengths":
        print(json.dumps(pipe.run(("lengths",)), indent=2))
    else:
        print(json.dumps(pipe.run(), indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end.

    skyrmebench profile --d 5 --samples 100
    skyrmebench certify --n-min 20
    skyrmebench evolve --config run.ini
    skyrmebench verify-all

Every run writes a manifest (config, content hash, timestamps, outputs)
before starting and finalizes it afterwards.  CSV and JSON artifacts carry
the config hash and no timestamps, so identical configs give identical
files.  Exit codes: 0 success, 1 acceptance or stability finding, 2 usage.
"""
import argparse
import configparser
import csv
import hashlib
import json
import os
from pathlib import Path
import sys
import time
from fractions import Fraction

import numpy as np

from . import __version__
from . import acceptance
from . import evolution as ev
from . import linearized_operator as lo
from . import profiles as pf
from . import spectral_modes as sm

EXIT_OK, EXIT_FINDING, EXIT_USAGE = 0, 1, 2
DEFAULT_OUT = "workbench_out"


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------
# artifacts
# --------------------------------------------------------------------------

def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return float(f"{float(x):.17g}") if np.isfinite(x) else str(float(x))
    if isinstance(x, (complex, np.complexfloating)):
        return [_jsonable(x.real), _jsonable(x.imag)]
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    return x


def content_hash(payload) -> str:
    """Git blob hash of the canonical JSON encoding."""
    data = json.dumps(_jsonable(payload), sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


class Run:
    """Manifest bookkeeping for one subcommand invocation."""

    def __init__(self, subcommand, config, out_dir):
        self.out = Path(out_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.config = _jsonable(config)
        self.hash = content_hash({"subcommand": subcommand, "config": self.config})
        self.manifest = {"subcommand": subcommand, "version": __version__, "config": self.config,
                         "config_hash": self.hash, "started": _now(), "finished": None,
                         "status": "running", "outputs": []}
        self.path = self.out / f"manifest_{subcommand}.json"
        self._flush()

    def _flush(self):
        self.path.write_text(json.dumps(self.manifest, indent=2, sort_keys=True) + "\n")

    def _register(self, path):
        self.manifest["outputs"].append(path.name)
        return path

    def write_csv(self, name, header, rows):
        path = self.out / name
        with open(path, "w", newline="") as fh:
            fh.write(f"# config_hash: {self.hash}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
        return self._register(path)

    def write_json(self, name, obj):
        path = self.out / name
        body = {"config_hash": self.hash, **_jsonable(obj)}
        path.write_text(json.dumps(body, indent=2, sort_keys=True) + "\n")
        return self._register(path)

    def finish(self, status, **extra):
        self.manifest.update(finished=_now(), status=status, **_jsonable(extra))
        self._flush()


def _now():
    return time.strftime("%Y-%m-%dT%H:%M:%S%z")


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def _out_dir(args):
    return args.out or os.environ.get("WORKBENCH_OUT") or DEFAULT_OUT


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------

_RUN_KEYS = {"N": int, "dt": float, "tau_end": float, "T": float, "norm_level": int,
             "record_every": int, "filter_strength": float, "seed": int}
_PERT_KEYS = {"kind": str, "amplitude": float, "width": float, "T_true": float, "file": str, "modes": int}


def read_config(path):
    """Flat INI file with sections [run], [perturbation] and optionally [extract]."""
    cp = configparser.ConfigParser()
    cp.optionxform = str
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise UsageError(f"cannot read config {path}: {exc}")
    schema = {"run": _RUN_KEYS, "perturbation": _PERT_KEYS,
              "extract": {"T_lo": float, "T_hi": float, "tau_probe": float, "xtol": float}}
    out = {}
    for sec in cp.sections():
        if sec not in schema:
            raise UsageError(f"unknown config section [{sec}]")
        out[sec] = {}
        for k, v in cp.items(sec):
            if k not in schema[sec]:
                raise UsageError(f"unknown key '{k}' in [{sec}]")
            try:
                out[sec][k] = schema[sec][k](v)
            except ValueError:
                raise UsageError(f"bad value for {sec}.{k}: {v!r}")
    return out


def perturbation(pert, base_dir="."):
    """(f, g) perturbing u and u_t; both even in r."""
    kind = pert.get("kind", "zero")
    amp = pert.get("amplitude", 0.0)
    width = pert.get("width", 1.0)
    if kind == "zero":
        return None, None
    if kind == "bump":
        return (lambda r: amp * np.exp(-(np.asarray(r) / width) ** 2)), None
    if kind == "bump_velocity":
        return None, (lambda r: amp * np.exp(-(np.asarray(r) / width) ** 2))
    if kind == "shift":
        return ev.blowup_time_perturbation(pert.get("T_true", 1.0))
    if kind == "random":
        rng = np.random.default_rng(pert.get("seed", 0))
        c = rng.standard_normal((2, pert.get("modes", 4)))
        k = np.arange(c.shape[1])

        def make(row):
            def h(r):
                r = np.asarray(r, dtype=float)
                return amp * (np.cos(np.multiply.outer(r, k)) @ row) * np.exp(-r**2)
            return h
        return make(c[0]), make(c[1])
    if kind == "samples":
        path = Path(base_dir) / pert["file"]
        try:
            data = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read perturbation samples {path}: {exc}")
        if data.shape[1] != 3:
            raise UsageError("perturbation samples need columns r, f, g")
        return (data[:, 0], data[:, 1]), (data[:, 0], data[:, 2])
    raise UsageError(f"unknown perturbation kind '{kind}'")


def _resolve_run(args, need_config=False):
    cfg = {"run": {}, "perturbation": {"kind": "zero"}, "extract": {}}
    base = "."
    if args.config:
        loaded = read_config(args.config)
        for k in loaded:
            cfg[k].update(loaded[k])
        base = str(Path(args.config).parent)
    elif need_config:
        raise UsageError("this subcommand needs --config")
    run = cfg["run"]
    for flag, key in (("grid_N", "N"), ("dt", "dt"), ("tau_end", "tau_end"), ("T", "T")):
        v = getattr(args, flag, None)
        if v is not None:
            run[key] = v[0] if isinstance(v, list) else v
    run.setdefault("N", 32)
    run.setdefault("tau_end", 2.0)
    run.setdefault("T", 1.0)
    run.setdefault("norm_level", 1)
    run.setdefault("record_every", 10)
    if "seed" in run:
        cfg["perturbation"].setdefault("seed", run["seed"])
    return cfg, base


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------

def cmd_profile(args):
    cfg = {"d": args.d, "samples": args.samples}
    run = Run("profile", cfg, _out_dir(args))
    tab = pf.profile_table(args.d, args.samples)
    run.write_csv("profile.csv", ["rho", "U", "U1", "U2", "V1", "V2", "V_tilde"], tab)
    run.finish("ok")
    print(f"profile d={args.d}: U(rho*) = {tab[-1, 1]:.17g}  -> {run.out / 'profile.csv'}")
    return EXIT_OK


def cmd_potentials(args):
    n = args.samples
    cfg = {"samples": n}
    run = Run("potentials", cfg, _out_dir(args))
    rows, audit = [], []
    for k in range(n + 1):
        r = Fraction(k, n)
        p = pf.eval_potentials(r)
        rows.append([str(r), str(p.V1), str(p.V1_ring), str(p.V2_ring), str(p.V2), str(p.V_tilde)])
        c, pr = pf.identity_audit(r)
        audit.append({"rho": str(r), "corrected_defect": str(c), "printed_defect": str(pr)})
    run.write_csv("potentials.csv", ["rho", "V1", "V1_ring", "V2_ring", "V2", "V_tilde"], rows)
    ok = all(a["corrected_defect"] == "0" for a in audit)
    run.write_json("identity_audit.json", {"identity": "V2_ring = -2 - rho V1_ring",
                                           "holds_exactly": ok, "samples": audit})
    run.finish("ok" if ok else "finding")
    print(f"potentials at {n + 1} rational points; identity exact: {ok}")
    return EXIT_OK if ok else EXIT_FINDING


def _parse_complex(s):
    try:
        return complex(s.replace(" ", "").replace("i", "j"))
    except ValueError:
        raise UsageError(f"cannot parse lambda '{s}'")


def cmd_modes(args):
    cfg = {"lam": args.lam, "series_N": args.series_N, "step": args.step, "jobs": args.jobs}
    run = Run("modes", cfg, _out_dir(args))
    if args.lam is not None:
        lam = _parse_complex(args.lam)
        c = sm.classify_mode(lam, N=args.series_N)
        run.write_json("mode.json", {"lam": lam, "verdict": c.verdict, "evidence": c.evidence,
                                     "detail": c.detail})
        run.finish("ok")
        print(f"lambda = {lam}: {c.verdict}")
        return EXIT_OK
    rep = sm.scan_halfplane(step=args.step, N=args.series_N, jobs=args.jobs)
    rows = [(c.lam.real, c.lam.imag, c.verdict, c.evidence) for c in rep.nodes]
    run.write_csv("mode_scan.csv", ["re", "im", "verdict", "evidence"], rows)
    found = rep.candidates + rep.indeterminate
    run.write_json("mode_scan_summary.json", {"counts": rep.counts, "excluded": rep.excluded,
                                              "non_ratio_one": [c.lam for c in found]})
    run.finish("ok" if not found else "finding")
    print(f"scan: {rep.counts}")
    return EXIT_OK if not found else EXIT_FINDING


def cmd_certify(args):
    cfg = {"n_min": args.n_min}
    run = Run("certify", cfg, _out_dir(args))
    rep = sm.certify_inequalities(args.n_min)
    run.write_json("certificate.json", rep)
    ok = all(rep[k]["status"] == "PASS" for k in ("C_bound", "eps_bound", "delta20"))
    run.finish("ok" if ok else "finding")
    for k in ("C_bound", "eps_bound", "eps_bound_printed_P3", "delta20"):
        print(f"{k:22s} {rep[k]['status']}")
    return EXIT_OK if ok else EXIT_FINDING


def cmd_spectrum(args):
    res = tuple(args.grid_N) if args.grid_N else (48, 72)
    if len(res) != 2:
        raise UsageError("spectrum needs two resolutions, e.g. --grid-N 48 72")
    cfg = {"resolutions": list(res)}
    run = Run("spectrum", cfg, _out_dir(args))
    reps = {k: lo.compute_spectrum(k, res) for k in ("L", "LV")}
    for k, rep in reps.items():
        run.write_csv(f"spectrum_{k}.csv", ["re", "im", "converged", "N"], rep.as_rows())
    summary = {k: {"converged": r.converged, "drift": r.drift, "omega0": r.omega0,
                   "omega0_by_N": r.omega0_by_N, "finding": r.finding} for k, r in reps.items()}
    summary["L_vs_LV"] = lo.compare_spectra(reps["L"], reps["LV"])
    run.write_json("spectrum_summary.json", summary)
    finding = any(r.finding for r in reps.values())
    run.finish("finding" if finding else "ok")
    print(f"converged: {np.round(reps['L'].converged, 10)}  omega0 = {reps['L'].omega0:.10f}")
    return EXIT_FINDING if finding else EXIT_OK


def cmd_evolve(args):
    cfg, base = _resolve_run(args, need_config=True)
    r = cfg["run"]
    f, g = perturbation(cfg["perturbation"], base)
    run = Run("evolve", cfg, _out_dir(args))
    sc = ev.SimConfig(N=r["N"], dt=r.get("dt"), tau_end=r["tau_end"], T=r["T"], f=f, g=g,
                      norm_level=r["norm_level"], record_every=r["record_every"],
                      filter_strength=r.get("filter_strength", 0.0))
    out = ev.evolve(sc)
    run.write_csv("timeseries.csv", ["tau", "norm", "unstable_coefficient", "guard_min", "guard_max"],
                  out.table())
    st = out.state
    run.write_csv("snapshot.csv", ["rho", "phi1", "phi2"], np.column_stack([st.grid.rho, st.phi1, st.phi2]))
    status = "aborted: " + out.aborted if out.aborted else "ok"
    run.finish(status, tau_reached=out.tau_reached)
    print(f"evolve N={r['N']} to tau={out.tau_reached:.6g}: {status}; final norm {out.norms[-1]:.6e}")
    return EXIT_FINDING if out.aborted else EXIT_OK


def cmd_extract(args):
    cfg, base = _resolve_run(args, need_config=True)
    r, x = cfg["run"], cfg["extract"]
    f, g = perturbation(cfg["perturbation"], base)
    run = Run("extract-T", cfg, _out_dir(args))
    try:
        fit = ev.extract_blowup_time(f, g, bracket=(x.get("T_lo", 0.9), x.get("T_hi", 1.1)), N=r["N"],
                                     tau_probe=x.get("tau_probe", 4.0), dt=r.get("dt"),
                                     xtol=x.get("xtol", 1e-6), fit_window=(2.0, r["tau_end"])
                                     if r["tau_end"] > 2.5 else None)
    except ArithmeticError as exc:
        run.write_json("blowup_time.json", {"status": "extraction failure", "reason": str(exc)})
        run.finish("finding")
        print(f"extraction failure: {exc}")
        return EXIT_FINDING
    run.write_json("blowup_time.json", {"status": "ok", "T_extracted": fit.T_extracted,
                                        "omega_fit": fit.omega_fit, "bracket": fit.bracket,
                                        "evaluations": fit.evaluations,
                                        "probes": [list(p) for p in fit.probes]})
    run.finish("ok")
    print(f"T = {fit.T_extracted:.15g} ({fit.evaluations} probes)")
    return EXIT_OK


def _strip_timing(d):
    if isinstance(d, dict):
        return {k: _strip_timing(v) for k, v in d.items() if k not in ("elapsed", "seconds")}
    return d


def cmd_verify_all(args):
    only = sorted(set(args.only)) if args.only else None
    cfg = {"jobs": args.jobs, "only": only}
    run = Run("verify-all", cfg, _out_dir(args))
    results = acceptance.run_all(jobs=args.jobs, only=only, log=print)
    report = {"criteria": [_strip_timing(r.as_dict()) for r in results],
              "passed": sum(r.passed for r in results), "total": len(results)}
    run.write_json("acceptance.json", report)
    failed = [r.number for r in results if not r.passed]
    run.finish("ok" if not failed else "finding", failed=failed,
               seconds={str(r.number): round(r.seconds, 3) for r in results})
    print(f"{report['passed']}/{report['total']} criteria passed" + (f"; failed: {failed}" if failed else ""))
    return EXIT_FINDING if failed else EXIT_OK


# --------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--out", help="output directory (default: $WORKBENCH_OUT or ./workbench_out)")
    common.add_argument("--config", help="INI run configuration")
    common.add_argument("--jobs", type=int, default=4, help="worker processes for scans")

    p = _Parser(prog="skyrmebench", description="Self-similar Skyrme blowup workbench")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    s = sub.add_parser("profile", parents=[common], help="profile and potential table")
    s.add_argument("--d", type=int, default=5)
    s.add_argument("--samples", type=int, default=100)
    s.set_defaults(fn=cmd_profile)

    s = sub.add_parser("potentials", parents=[common], help="exact potentials at rational rho")
    s.add_argument("--samples", type=int, default=10)
    s.set_defaults(fn=cmd_potentials)

    s = sub.add_parser("modes", parents=[common], help="classify one lambda or scan the half-plane")
    s.add_argument("--lam", help="complex lambda, e.g. 0.5+3j; omit to scan")
    s.add_argument("--series-N", type=int, default=2000)
    s.add_argument("--step", type=float, default=0.25)
    s.set_defaults(fn=cmd_modes)

    s = sub.add_parser("certify", parents=[common], help="exact inequality certificates")
    s.add_argument("--n-min", type=int, default=20)
    s.set_defaults(fn=cmd_certify)

    s = sub.add_parser("spectrum", parents=[common], help="discrete spectrum at two resolutions")
    s.add_argument("--grid-N", type=int, nargs="+")
    s.set_defaults(fn=cmd_spectrum)

    for name, fn, hlp in (("evolve", cmd_evolve, "nonlinear evolution from a config"),
                          ("extract-T", cmd_extract, "blowup time by bisection")):
        s = sub.add_parser(name, parents=[common], help=hlp)
        s.add_argument("--grid-N", type=int, nargs=1)
        s.add_argument("--dt", type=float)
        s.add_argument("--tau-end", type=float)
        s.add_argument("--T", type=float)
        s.set_defaults(fn=fn)

    s = sub.add_parser("verify-all", parents=[common], help="run the acceptance suite")
    s.add_argument("--only", type=int, nargs="+", help="criterion numbers")
    s.set_defaults(fn=cmd_verify_all)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (UsageError, pf.ConfigError) as exc:
        print(f"skyrmebench: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

"""Batch entry point: config-driven runs of the toolkit modules.

Subcommands: weights, jets, extend, fbi, wf-experiment, acceptance.
Common flags: --config <json>, --out <dir>, --threads <n>, --seed <u64>.
Exit codes: 0 success, 1 failed check or I/O error, 2 usage or config error.

Numeric imports happen after --threads is applied to the BLAS environment,
so keep this module free of top-level numpy.  All floating point output is
printed with 17 significant digits and no timestamps; rerunning a command
with the same config reproduces every payload byte for byte.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .errors import CarlemanError, ConfigError

_FIXTURE_GRIDS = ("gaussian", "sign", "pole", "conormal", "holomorphic")


# ---------------------------------------------------------------------------
# deterministic serialization

def _fmt(v: float) -> str:
    return "%.17g" % float(v)


def _json_text(obj, indent: int = 0) -> str:
    pad = "  " * indent
    if hasattr(obj, "item") and not hasattr(obj, "__len__"):
        obj = obj.item()
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        rows = [f'{pad}  {json.dumps(str(k))}: {_json_text(v, indent + 1)}'
                for k, v in obj.items()]
        return "{\n" + ",\n".join(rows) + f"\n{pad}}}"
    if isinstance(obj, (list, tuple)) or type(obj).__name__ == "ndarray":
        items = list(obj)
        if not items:
            return "[]"
        rows = [f"{pad}  {_json_text(v, indent + 1)}" for v in items]
        return "[\n" + ",\n".join(rows) + f"\n{pad}]"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, complex):
        return _json_text([obj.real, obj.imag], indent)
    if isinstance(obj, float):
        return _fmt(obj)
    return json.dumps(str(obj))


def _csv_text(header, rows) -> str:
    if not rows:
        raise ConfigError("refusing to write an empty report")
    out = [",".join(header)]
    for row in rows:
        cells = []
        for v in row:
            if hasattr(v, "item"):
                v = v.item()
            if isinstance(v, bool):
                cells.append("true" if v else "false")
            elif isinstance(v, int):
                cells.append(str(v))
            elif isinstance(v, float):
                cells.append(_fmt(v))
            else:
                cells.append(str(v))
        out.append(",".join(cells))
    return "\n".join(out) + "\n"


def _write(args, name: str, text: str) -> str:
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, name)
    with open(path, "w", newline="") as fh:
        fh.write(text)
    print(f"wrote {path}")
    return path


def _versions() -> dict:
    import numpy
    import scipy

    from . import __version__
    return {"carleman": __version__, "numpy": numpy.__version__,
            "scipy": scipy.__version__}


def _report(config: dict, results: dict) -> dict:
    return {"config": config, "results": results, "versions": _versions()}


# ---------------------------------------------------------------------------
# config plumbing

def _load_config(args) -> dict:
    if args.config is None:
        raise ConfigError("this command needs --config <file.json>")
    try:
        with open(args.config) as fh:
            return json.load(fh)
    except OSError as e:
        raise ConfigError(f"cannot read config {args.config}: {e}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"config {args.config} is not valid JSON: {e}")


def _grid1d(d, name: str):
    import numpy as np
    try:
        if isinstance(d, (list, tuple)):
            return np.asarray(d, dtype=float)
        if "values" in d:
            return np.asarray(d["values"], dtype=float)
        lo, hi, n = float(d["lo"]), float(d["hi"]), int(d["n"])
        if d.get("spacing", "linear") == "log":
            return np.geomspace(lo, hi, n)
        return np.linspace(lo, hi, n)
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"bad grid spec for {name!r}: {e}")


def _seq_cfg(d):
    from .weights import seq_from_dict
    try:
        return seq_from_dict(d)
    except (CarlemanError, KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"bad sequence spec: {e}")


def _jet_cfg(d, what: str):
    from .jets import jet_from_dict
    if isinstance(d, dict) and "file" in d:
        try:
            with open(d["file"]) as fh:
                d = json.load(fh)
        except OSError as e:
            raise ConfigError(f"cannot read {what} file {d['file']}: {e}")
        except json.JSONDecodeError as e:
            raise ConfigError(f"{what} file is not valid JSON: {e}")
    try:
        return jet_from_dict(d)
    except (CarlemanError, KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"bad {what} spec: {e}")


# ---------------------------------------------------------------------------
# subcommands

def _cmd_weights(args) -> int:
    import numpy as np

    from .weights import assoc, bigN_capped, check_regularity, absorption_fit
    cfg = _load_config(args)
    seq = _seq_cfg(cfg.get("seq", {"kind": "gevrey", "s": 2.0, "K_max": 64}))
    r = _grid1d(cfg.get("r", {"lo": 0.01, "hi": 10.0, "n": 50,
                              "spacing": "log"}), "r")

    h = assoc(seq, "h", r)
    h1 = assoc(seq, "h1", r)
    nn = bigN_capped(seq, r, seq.K_max)
    rows = [(float(rv), float(hv), float(h1v), int(nv))
            for rv, hv, h1v, nv in zip(r, h, h1, nn)]
    _write(args, "weights.csv", _csv_text(["r", "h", "h1", "bigN"], rows))

    reg = check_regularity(seq)
    results = {"regular": bool(reg.passed), "c_bound": float(seq.c_bound),
               "K_max": int(seq.K_max), "log_convex": bool(seq.log_convex)}
    if "absorption" in cfg:
        spec = cfg["absorption"]
        rr = _grid1d(spec.get("r", {"lo": 1e-3, "hi": 1.0, "n": 40,
                                    "spacing": "log"}), "absorption.r")
        fits = []
        for n in spec.get("n", [1, 2, 3]):
            fit = absorption_fit(seq, int(n), rr)
            fits.append({"n": int(n), "Q": float(fit.Q), "C": float(fit.C),
                         "passed": bool(fit.passed)})
        results["absorption"] = fits
    _write(args, "weights.json", _json_text(_report(cfg, results)) + "\n")
    return 0


def _cmd_jets(args) -> int:
    from .jets import (VectorFieldJet, formal_solution, jet_to_dict,
                       residual_check)
    cfg = _load_config(args)
    try:
        fspec = cfg["field"]
        a = [_jet_cfg(j, "field coefficient") for j in fspec.get("a", [])]
        b = [_jet_cfg(j, "field coefficient") for j in fspec.get("b", [])]
        field = VectorFieldJet(a=a, b=b,
                               time_dependent=bool(fspec.get(
                                   "time_dependent", False)))
        datum = _jet_cfg(cfg["datum"], "datum")
        n_max = int(cfg.get("n_max", 8))
    except KeyError as e:
        raise ConfigError(f"jets config is missing {e}")
    except CarlemanError as e:
        raise ConfigError(f"bad field spec: {e}")

    series = formal_solution(field, datum, n_max)
    n_res = int(cfg.get("residual_n", min(6, n_max - 1)))
    rows = [(n, float(residual_check(series, n))) for n in range(n_res + 1)]
    _write(args, "jets.csv", _csv_text(["n", "residual"], rows))

    results = {"n_max": series.n_max,
               "lossy": bool(any(u.lossy for u in series.u)),
               "max_residual": max(r for _, r in rows),
               "u": [jet_to_dict(u) for u in series.u]}
    _write(args, "jets.json", _json_text(_report(cfg, results)) + "\n")
    return 0


def _cmd_extend(args) -> int:
    import numpy as np

    from .dynkin import almost_analytic_extend, make_kernel, measure_flatness
    from .jets import EvalBox
    from .weights import assoc
    cfg = _load_config(args)
    try:
        datum = _jet_cfg(cfg["datum"], "datum")
    except KeyError as e:
        raise ConfigError(f"extend config is missing {e}")
    seq = _seq_cfg(cfg.get("seq", {"kind": "gevrey", "s": 2.0,
                                   "K_max": 4096}))
    kspec = cfg.get("kernel", {})
    kernel = make_kernel(epsilon=float(kspec.get("epsilon", 0.5)),
                         n_r=int(kspec.get("n_r", 64)),
                         n_theta=int(kspec.get("n_theta", 64)))
    c_star = cfg.get("C_star")
    gbox = cfg.get("growth_box")
    x = _grid1d(cfg.get("x", {"lo": -0.5, "hi": 0.5, "n": 21}), "x")
    # the real-axis trace pins the default growth box to the x range
    _, sol = almost_analytic_extend(
        datum, seq, kernel, x.astype(complex),
        n_max=int(cfg.get("n_max", 12)),
        C_star=None if c_star is None else float(c_star),
        growth_box=None if gbox is None else
        EvalBox([(float(gbox[0]), float(gbox[1]))]))

    tspec = dict(cfg.get("t", {}))
    t_hi = tspec.get("hi")
    # default top sample 1% inside the validity radius: the centered time
    # difference needs room on both sides
    tspec = {"lo": float(tspec.get("lo", 1e-3)),
             "hi": 0.99 * sol.delta if t_hi is None else float(t_hi),
             "n": int(tspec.get("n", 24)), "spacing": "log"}
    t = _grid1d(tspec, "t")
    fit = measure_flatness(sol, x, t)

    hq = assoc(sol.seq, "h", fit.Q * np.abs(t))
    rows = [(float(tv), float(sv), float(hv),
             float(sv / (fit.A * hv)) if fit.A > 0 and hv > 0 else 0.0)
            for tv, sv, hv in zip(fit.t, fit.sup, hq)]
    _write(args, "extend.csv",
           _csv_text(["t", "sup_abs_Lu", "h_Q_t", "ratio"], rows))

    results = {"A": float(fit.A), "Q": float(fit.Q),
               "delta": float(sol.delta),
               "sup_ratio": float(fit.sup_ratio), "passed": True,
               "C_star": float(sol.C_star),
               "skipped_Q": [float(q) for q in fit.skipped_Q]}
    _write(args, "extend.json", _json_text(_report(cfg, results)) + "\n")
    return 0


def _fixture_grid(spec, seed: int):
    import numpy as np

    from . import fixtures
    from .fbi import GridFunction
    if "file" in spec:
        try:
            return GridFunction.load(spec["file"])
        except OSError as e:
            raise ConfigError(f"cannot read grid file {spec['file']}: {e}")
    name = spec.get("fixture")
    if name not in _FIXTURE_GRIDS:
        raise ConfigError(
            f"grid needs a file or a fixture name from {_FIXTURE_GRIDS}")
    kw = {}
    if "n" in spec:
        kw["n"] = int(spec["n"])
    if name in ("gaussian", "sign", "pole") and "half_width" in spec:
        kw["half_width"] = float(spec["half_width"])
    if name == "pole" and "offset" in spec:
        kw["offset"] = float(spec["offset"])
    gf = getattr(fixtures, f"{name}_grid")(**kw)
    amp = float(spec.get("noise", 0.0))
    if amp > 0.0:
        rng = np.random.default_rng(seed)
        scale = amp * float(np.max(np.abs(gf.values)))
        gf.values = gf.values + scale * (
            rng.standard_normal(gf.values.shape)
            + 1j * rng.standard_normal(gf.values.shape))
    return gf


def _scan_cfg(spec) -> "object":
    import numpy as np

    from .fbi import ScanConfig
    kw = {}
    if "n_directions" in spec:
        kw["n_directions"] = int(spec["n_directions"])
    if "lambdas" in spec:
        kw["lambdas"] = np.asarray(_grid1d(spec["lambdas"], "lambdas"))
    if "a_threshold" in spec:
        kw["a_threshold"] = float(spec["a_threshold"])
    if "floor_rel" in spec:
        kw["floor_rel"] = float(spec["floor_rel"])
    if "lambda_min" in spec and spec["lambda_min"] is not None:
        kw["lambda_min"] = float(spec["lambda_min"])
    if "certified" in spec:
        kw["certified"] = bool(spec["certified"])
    return ScanConfig(**kw)


def _scan_payload(scan, seq, a_threshold: float, floor_rel: float):
    import numpy as np

    from .weights import fbi_envelope
    env = np.maximum(
        fbi_envelope(seq, a_threshold, scan.lambdas, certified=False),
        floor_rel)
    rows = []
    failed = set(scan.failed_indices)
    for j in range(scan.directions.shape[0]):
        om = scan.directions[j] if scan.directions.ndim == 2 \
            else [scan.directions[j]]
        for li, lam in enumerate(scan.lambdas):
            rows.append((j, *[float(c) for c in om], float(lam),
                         float(scan.samples[j, li]), float(env[li]),
                         j not in failed))
    dim = scan.directions.shape[1] if scan.directions.ndim == 2 else 1
    header = (["direction_index"] + [f"omega_{d}" for d in range(dim)]
              + ["lambda", "abs_F", "envelope", "passed"])
    per_dir = [{"index": j, "A_fit": float(r.A_fit), "passed": bool(r.passed)}
               for j, r in enumerate(scan.reports)]
    summary = {"normalization": float(scan.normalization),
               "lambda_min": float(scan.lambda_min),
               "failed_indices": [int(j) for j in scan.failed_indices],
               "singular_indices": [int(j) for j in scan.singular_indices],
               "per_direction": per_dir}
    return header, rows, summary


def _cmd_fbi(args) -> int:
    from .fbi import ScanConfig, wavefront_scan
    cfg = _load_config(args)
    gf = _fixture_grid(cfg.get("grid", {}), args.seed)
    seq = _seq_cfg(cfg.get("seq", {"kind": "gevrey", "s": 2.0, "K_max": 64}))
    x0 = [float(v) for v in cfg.get("x0", [0.0] * gf.dim)]
    scfg = _scan_cfg(cfg.get("scan", {}))
    scan = wavefront_scan(gf, x0, seq, scfg)

    header, rows, summary = _scan_payload(scan, seq, scfg.a_threshold,
                                          scfg.floor_rel)
    _write(args, "fbi.csv", _csv_text(header, rows))
    _write(args, "fbi.json", _json_text(_report(cfg, summary)) + "\n")
    return 0


_WF_FIXTURES = {"conormal", "holomorphic"}


def _wf_fixture_pieces(name: str):
    import numpy as np

    from .jets import jet_scale, jet_variable
    from .pde import RhsModel
    z1 = jet_variable(2, 1, 2, 8)
    if name == "conormal":
        model = RhsModel(jet_scale(z1, -1.0), fn=lambda x, z0, z1: -z1)
        fn = lambda x, t: np.abs(x - t) ** 3
    elif name == "holomorphic":
        model = RhsModel(jet_scale(z1, 1j), fn=lambda x, z0, z1: 1j * z1)
        fn = lambda x, t: np.exp(x + 1j * t)
    else:
        raise ConfigError(
            f"unknown solution fixture {name!r}; have {sorted(_WF_FIXTURES)}")
    return model, fn


def _cmd_wf_experiment(args) -> int:
    from .pde import RhsModel, SolutionSamples, wf_inclusion_experiment
    if args.fixture is not None:
        cfg = {"solution": {"fixture": args.fixture}}
    else:
        cfg = _load_config(args)
    sol_spec = cfg.get("solution", {})
    name = sol_spec.get("fixture", "conormal")
    model, fn = _wf_fixture_pieces(name)
    if "model" in cfg:
        model = RhsModel(_jet_cfg(cfg["model"], "model"),
                         trust_radius=float(cfg.get("trust_radius",
                                                    float("inf"))))
    seq = _seq_cfg(cfg.get("seq", {"kind": "gevrey", "s": 2.0, "K_max": 64}))
    base = [float(v) for v in cfg.get("base", [0.0, 0.0])]
    radius = float(cfg.get("radius", 1.0))
    n = int(cfg.get("n", 2752))
    samples = SolutionSamples.from_function(fn, base[0] - radius,
                                            base[0] + radius, 41,
                                            base[1] - radius,
                                            base[1] + radius, 41)
    scfg = _scan_cfg(cfg.get("scan", {}))
    rep = wf_inclusion_experiment(model, samples, seq, base=base,
                                  radius=radius, n=n, config=scfg,
                                  convention=cfg.get("convention", "split"))

    header, rows, summary = _scan_payload(rep.scan, seq, scfg.a_threshold,
                                          scfg.floor_rel)
    ok = bool(rep.included.all())
    results = {"pass": ok,
               "a0": [[float(v.real), float(v.imag)] for v in rep.a0],
               "step": float(rep.step),
               "covectors": [[float(c) for c in row]
                             for row in rep.covectors],
               "char_distances": [float(d) for d in rep.distances],
               "included": [bool(v) for v in rep.included],
               "scan": summary}
    _write(args, "wf-experiment.csv", _csv_text(header, rows))
    _write(args, "wf-experiment.json",
           _json_text(_report(cfg, results)) + "\n")
    return 0 if ok else 1


def _cmd_acceptance(args) -> int:
    from . import acceptance
    if args.all:
        numbers = sorted(acceptance.CRITERIA)
    elif args.config is not None:
        cfg = _load_config(args)
        numbers = [int(n) for n in cfg.get("criteria", [])]
        if not numbers:
            raise ConfigError("acceptance config selects no criteria")
    else:
        raise ConfigError("acceptance needs --all or --config")
    try:
        results = acceptance.run_all(numbers)
    except ValueError as e:
        raise ConfigError(str(e))
    print(acceptance.format_results(results))

    payload = {"criteria": numbers,
               "results": [{"number": r.number, "name": r.name,
                            "passed": r.passed, "detail": r.detail}
                           for r in results]}
    _write(args, "acceptance.json",
           _json_text(_report({"criteria": numbers}, payload)) + "\n")
    return 0 if all(r.passed for r in results) else 1


# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--threads", type=int,
                        help="BLAS thread cap, applied before numpy loads")
    common.add_argument("--seed", type=int, default=0,
                        help="RNG seed for fixture noise")

    p = argparse.ArgumentParser(
        prog="carleman",
        description="numerical toolkit for Denjoy-Carleman microlocal "
                    "regularity experiments")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("weights", parents=[common],
                        help="associated functions and absorption fits")
    sp.set_defaults(handler=_cmd_weights)
    sp = sub.add_parser("jets", parents=[common],
                        help="formal solution and residual table")
    sp.set_defaults(handler=_cmd_jets)
    sp = sub.add_parser("extend", parents=[common],
                        help="almost analytic extension flatness")
    sp.set_defaults(handler=_cmd_extend)
    sp = sub.add_parser("fbi", parents=[common],
                        help="wave front scan of a grid function")
    sp.set_defaults(handler=_cmd_fbi)
    sp = sub.add_parser("wf-experiment", parents=[common],
                        help="wave front vs characteristic set experiment")
    sp.add_argument("--fixture", choices=sorted(_WF_FIXTURES),
                    help="run a named solution fixture without a config")
    sp.set_defaults(handler=_cmd_wf_experiment)
    sp = sub.add_parser("acceptance", parents=[common],
                        help="run the shipped acceptance criteria")
    sp.add_argument("--all", action="store_true", help="run all ten")
    sp.set_defaults(handler=_cmd_acceptance)
    return p


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.threads is not None:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS"):
            os.environ[var] = str(args.threads)
    try:
        return args.handler(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (CarlemanError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

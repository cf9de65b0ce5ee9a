"""``gibbsddrm`` command line: generate, restore, metrics, calibrate, reference-samplers."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import bench
from .ddrm import DdrmParams, run_ddrm
from .fileio import load_array, read_json, save_array, write_csv, write_json
from .metrics import compute_metrics, kernel_error
from .operators import CirculantConvOperator
from .pcgs import InitStrategy, PcgsConfig, run_blocked_gibbs, run_gibbsddrm, two_regime_m
from .phi_sampler import LangevinConfig, PhiPrior
from .priors import GaussianPrior, load_gmm_json, make_geometric_schedule, make_linear_schedule, save_gmm_json
from .result import RestorationResult, SamplingError, canonical_json
from .schemas import CALIBRATION_SCHEMA, CONFIG_SCHEMA, MANIFEST_SCHEMA, RESULT_SCHEMA, ConfigError, validate

__all__ = ["main", "build_parser", "load_config", "generate", "load_problem", "restore", "svg_plot"]

EXIT_OK, EXIT_RUNTIME, EXIT_INVALID = 0, 1, 2


# ---------------------------------------------------------------------------
# config handling


def load_config(path, seed=None, mode=None, out=None) -> dict:
    """Read, override and validate an experiment config."""
    try:
        cfg = read_json(path) if path is not None else {}
    except FileNotFoundError:
        raise ConfigError("--config", f"no such file: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("--config", f"not valid JSON: {exc}") from None
    if seed is not None:
        cfg["seeds"] = [int(seed)]
    if mode is not None:
        cfg["mode"] = mode
    if out is not None:
        cfg["output_dir"] = str(out)
    validate(cfg, CONFIG_SCHEMA)
    base = Path(path).parent if path is not None else Path(".")
    prob = cfg.get("problem", {})
    for key in ("signal", "kernel"):
        if prob.get(key):
            p = (base / prob[key]).resolve()
            if not p.exists():
                raise ConfigError(f"problem.{key}", f"file not found: {p}")
            prob[key] = str(p)
    prior = cfg.get("prior", {})
    if prior.get("file"):
        p = (base / prior["file"]).resolve()
        if not p.exists():
            raise ConfigError("prior.file", f"file not found: {p}")
        prior["file"] = str(p)
    # build the objects once so that numeric invariants fail before any sampling
    build_schedule(cfg)
    build_pcgs(cfg, t_count=build_schedule(cfg).T)
    build_prior(cfg, None)
    return cfg


def _wrap(field, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except (ValueError, TypeError) as exc:
        raise ConfigError(field, str(exc)) from None


def build_schedule(cfg: dict):
    sc = cfg.get("schedule")
    if sc is None:
        return bench.schedule_for(bench.BenchmarkSpec())
    if sc["kind"] == "linear":
        return _wrap("schedule", make_linear_schedule, sc["T"], sc["sigma_max"])
    if "sigma_min" not in sc:
        raise ConfigError("schedule.sigma_min", "required for a geometric schedule")
    return _wrap("schedule", make_geometric_schedule, sc["T"], sc["sigma_min"], sc["sigma_max"])


def build_prior(cfg: dict, problem_dir):
    pr = cfg.get("prior")
    if pr is None:
        if problem_dir is not None and (Path(problem_dir) / "prior.json").exists():
            return load_gmm_json(Path(problem_dir) / "prior.json")
        return None
    if pr["kind"] == "gmm":
        if "file" not in pr:
            if problem_dir is not None and (Path(problem_dir) / "prior.json").exists():
                return load_gmm_json(Path(problem_dir) / "prior.json")
            if problem_dir is None:
                return None
            raise ConfigError("prior.file", "a GMM prior needs a file (or a generated prior.json)")
        return _wrap("prior.file", load_gmm_json, pr["file"])
    if "variance" not in pr:
        raise ConfigError("prior.variance", "required for a Gaussian prior")
    return _wrap("prior", GaussianPrior, pr.get("mean", 0.0), pr["variance"])


def build_pcgs(cfg: dict, t_count: int) -> PcgsConfig:
    cal = bench.load_calibration()
    pc = cfg.get("pcgs", {})
    lv = pc.get("langevin", {})
    prior_doc = lv.get("prior", {"kind": "laplace", "lam": cal["laplace_lam"]})
    phi_prior = _wrap("pcgs.langevin.prior", PhiPrior, prior_doc["kind"], prior_doc.get("lam", 0.0))
    lang = _wrap(
        "pcgs.langevin",
        LangevinConfig,
        step_size=lv.get("step_size", cal["step_size"]),
        n_steps=lv.get("n_steps", cal["n_steps"]),
        noise_scale=float(lv.get("noise_scale", 1.0)),
        prior=phi_prior,
        project_simplex=lv.get("project_simplex", True),
        projection=lv.get("projection", cal.get("projection", "step")),
        refresh_xhat=lv.get("refresh_xhat", False),
    )
    m = pc.get("M", {"t_switch": min(cal["t_switch"], t_count), "m": cal["m_inner"]})
    if isinstance(m, dict):
        m_table = two_regime_m(t_count, m["t_switch"], m["m"])
    else:
        m_table = tuple(m)
        if len(m_table) != t_count:
            raise ConfigError("pcgs.M", f"has {len(m_table)} entries but the schedule has T={t_count}")
    init = pc.get("phi_init", {"kind": "heuristic", "name": "gaussian_kernel", "options": {"width": 1.0}})
    init_obj = _wrap("pcgs.phi_init", InitStrategy, init["kind"], init.get("phi0"), init.get("name"),
                     init.get("options", {}))
    ddrm = _wrap("pcgs", DdrmParams, pc.get("eta", cal.get("eta", 0.8)), pc.get("eta_b", cal.get("eta_b", 0.9)),
                 cfg.get("problem", {}).get("sigma_y", bench.BenchmarkSpec().sigma_y))
    return _wrap("pcgs", PcgsConfig, N=pc.get("N", cal.get("n_cycles", 1)), M=m_table, ddrm=ddrm, langevin=lang,
                 phi_init=init_obj, trace_granularity=pc.get("trace_granularity", "per_t"))


# ---------------------------------------------------------------------------
# generate


def _spec_from(prob: dict) -> bench.BenchmarkSpec:
    fields = dict(prob.get("benchmark", {}))
    if "sigma_y" in prob:
        fields["sigma_y"] = prob["sigma_y"]
    return _wrap("problem.benchmark", bench.BenchmarkSpec, **fields)


def generate(cfg: dict, out_dir) -> dict:
    """Write signal, kernel, measurement and a manifest to ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    prob = cfg.get("problem", {})
    seed = int(cfg.get("seeds", [prob.get("seed", 0)])[0])
    data_range = float(prob.get("data_range", 1.0))
    sigma_y = float(prob.get("sigma_y", bench.BenchmarkSpec().sigma_y))
    rng = np.random.default_rng([seed, 7])
    prior_doc = None
    width = float(prob.get("kernel_width", 1.0))
    if prob.get("signal"):
        x0 = load_array(prob["signal"], data_range)
        if prob.get("kernel"):
            kernel = load_array(prob["kernel"])
            if x0.ndim == 2 and kernel.ndim == 1:
                side = int(round(np.sqrt(kernel.size)))
                if side * side != kernel.size:
                    raise ConfigError("problem.kernel", "2-D signals need a square kernel in the CSV")
                kernel = kernel.reshape(side, side)
        else:
            support = tuple(prob.get("kernel_support", [5] * x0.ndim))
            if len(support) != x0.ndim:
                raise ConfigError("problem.kernel_support", f"needs {x0.ndim} entries for this signal")
            kernel = rng.dirichlet(np.full(int(np.prod(support)), 0.7)).reshape(support)
        op = CirculantConvOperator(kernel, x0.shape)
        y = op.apply(x0) + sigma_y * rng.standard_normal(x0.shape)
    else:
        spec = _spec_from(prob)
        p = bench.make_problem(seed, spec)
        x0, kernel, y = p.x0, p.kernel, p.y
        width = spec.init_width
        save_gmm_json(p.prior, out / "prior.json")
        prior_doc = {"kind": "gmm", "file": "prior.json", "benchmark": _jsonable_spec(spec)}
    files = {"signal": "signal.csv", "kernel": "kernel.csv", "measurement": "y.csv"}
    write_csv(out / files["signal"], x0.reshape(-1))
    write_csv(out / files["kernel"], np.asarray(kernel).reshape(-1))
    write_csv(out / files["measurement"], np.asarray(y).reshape(-1))
    if x0.ndim == 2:
        files["signal_preview"] = "signal.pgm"
        files["measurement_preview"] = "y.pgm"
        save_array(out / files["signal_preview"], x0, data_range)
        save_array(out / files["measurement_preview"], np.clip(y, 0, data_range), data_range)
    op = CirculantConvOperator(np.asarray(kernel, dtype=float), x0.shape)
    manifest = {
        "format_version": 1,
        "seed": seed,
        "sigma_y": sigma_y,
        "data_range": data_range,
        "signal_shape": list(x0.shape),
        "kernel_shape": list(np.shape(kernel)),
        "kernel_origin": list(op.origin),
        "init_kernel_width": width,
        "files": files,
        "prior": prior_doc,
        "config": cfg,
    }
    validate(manifest, MANIFEST_SCHEMA)
    write_json(out / "manifest.json", manifest)
    return manifest


def _jsonable_spec(spec) -> dict:
    from dataclasses import asdict

    return asdict(spec)


def load_problem(problem_dir) -> dict:
    """Read a generated problem back; with ``sigma_y = 0`` the measurement is re-verified."""
    d = Path(problem_dir)
    if not (d / "manifest.json").exists():
        raise FileNotFoundError(f"no manifest.json in {d}")
    man = read_json(d / "manifest.json")
    validate(man, MANIFEST_SCHEMA)
    shape = tuple(man["signal_shape"])
    kshape = tuple(man["kernel_shape"])
    x0 = load_array(d / man["files"]["signal"]).reshape(shape)
    kernel = load_array(d / man["files"]["kernel"]).reshape(kshape)
    y = load_array(d / man["files"]["measurement"]).reshape(shape)
    if man["sigma_y"] == 0:
        expect = CirculantConvOperator(kernel, shape).apply(x0)
        if not np.array_equal(expect, y):
            raise ValueError(f"{d}: noiseless measurement does not equal the circular convolution")
    prior = load_gmm_json(d / "prior.json") if (d / "prior.json").exists() else None
    return {"x0": x0, "kernel": kernel, "y": y, "manifest": man, "prior": prior, "dir": d}


# ---------------------------------------------------------------------------
# restore


def svg_plot(series: dict, path, title: str = "", width: int = 640, height: int = 360) -> None:
    """Self-contained SVG line plot; each series is scaled to its own range."""
    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"]
    pad = 40
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
        f'<text x="{width / 2}" y="20" text-anchor="middle" font-size="14">{title}</text>',
        f'<text x="{width / 2}" y="{height - 8}" text-anchor="middle" font-size="12">step</text>',
    ]
    for i, (name, values) in enumerate(series.items()):
        v = np.asarray([np.nan if x is None else x for x in values], dtype=float)
        ok = np.isfinite(v)
        if not ok.any():
            continue
        lo, hi = float(v[ok].min()), float(v[ok].max())
        span = hi - lo if hi > lo else 1.0
        n = max(len(v) - 1, 1)
        pts = []
        for j, val in enumerate(v):
            if np.isfinite(val):
                px = pad + (width - 2 * pad) * j / n
                py = height - pad - (height - 2 * pad) * (val - lo) / span
                pts.append(f"{px:.2f},{py:.2f}")
        color = colors[i % len(colors)]
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{" ".join(pts)}"/>')
        parts.append(f'<text x="{width - pad}" y="{pad + 16 * i}" text-anchor="end" font-size="12" '
                     f'fill="{color}">{name} [{lo:.3g}, {hi:.3g}]</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")


def _trace_rows(trace, kernel_ref):
    rows = []
    for i, rec in enumerate(trace):
        kerr = None
        if kernel_ref is not None and "phi" in rec:
            kerr = kernel_error(kernel_ref, np.asarray(rec["phi"]).reshape(np.shape(kernel_ref)))
        rows.append({
            "step": i,
            "cycle": rec.get("cycle", 1),
            "t": rec["t"],
            "m": rec.get("m", 0),
            "K": rec.get("K", 0),
            "denoiser_evals": rec["denoiser_evals"],
            "phi_updates": rec.get("phi_updates", 0),
            "residual": rec["residual"],
            "kernel_error": kerr,
        })
    return rows


def _write_trace_csv(rows, path):
    cols = ["step", "cycle", "t", "m", "K", "denoiser_evals", "phi_updates", "residual", "kernel_error"]
    lines = [",".join(cols)]
    for r in rows:
        lines.append(",".join("" if r[c] is None else repr(r[c]) for c in cols))
    Path(path).write_text("\n".join(lines) + "\n")


def restore_seed(cfg: dict, problem: dict, seed: int) -> RestorationResult:
    mode = cfg.get("mode", "gibbsddrm")
    schedule = build_schedule(cfg)
    cfg = dict(cfg)
    cfg.setdefault("problem", {})
    cfg["problem"] = dict(cfg["problem"], sigma_y=problem["manifest"]["sigma_y"])
    pcfg = build_pcgs(cfg, schedule.T)
    if "phi_init" not in cfg.get("pcgs", {}):
        width = problem["manifest"].get("init_kernel_width", 1.0)
        pcfg = PcgsConfig(pcfg.N, pcfg.M, pcfg.ddrm, pcfg.langevin,
                          InitStrategy.heuristic("gaussian_kernel", width=width), pcfg.trace_granularity)
    prior = build_prior(cfg, problem["dir"]) or problem["prior"]
    if prior is None:
        raise ConfigError("prior", "no prior given and the problem directory has no prior.json")
    x_true, k_true, y = problem["x0"], problem["kernel"], problem["y"]
    # the non-blind baseline keeps standard DDRM settings unless the config sets eta explicitly
    pc = cfg.get("pcgs", {})
    nb_params = bench.nonblind_params(bench.load_calibration(), pcfg.ddrm.sigma_y)
    if "eta" in pc or "eta_b" in pc:
        nb_params = pcfg.ddrm
    n_chains = int(cfg.get("n_chains", 1))
    runs = []
    for c in range(n_chains):
        rng = np.random.default_rng([seed, c])
        if mode == "ddrm":
            op = CirculantConvOperator(k_true, y.shape)
            runs.append(run_ddrm(op, y, schedule, nb_params, prior, rng))
        else:
            op = CirculantConvOperator(np.full(k_true.shape, 1.0 / k_true.size), y.shape)
            if mode == "blocked":
                runs.append(run_blocked_gibbs(op, y, schedule, prior, pcfg, rng,
                                              cfg.get("pcgs", {}).get("blocked_phi_updates")))
            else:
                runs.append(run_gibbsddrm(op, y, schedule, prior, pcfg, rng))
    res = runs[0]
    if n_chains > 1:
        res.x0, res.phi = bench.merge_chains(runs)
        res.denoiser_evals = sum(r.denoiser_evals for r in runs)
        res.phi_updates = sum(r.phi_updates for r in runs)
        res.timing = {"seconds": sum(r.timing.get("seconds", 0.0) for r in runs)}
    res.seed = seed
    kernel_est = np.asarray(res.phi, dtype=float).reshape(k_true.shape)
    res.metrics = compute_metrics(x_true, np.real(res.x0), k_true, kernel_est,
                                  problem["manifest"]["data_range"])
    res.config = dict(res.config, mode=mode, n_chains=n_chains)
    return res


def restore(cfg: dict, problem_dir, out_dir) -> list[dict]:
    problem = load_problem(problem_dir)
    out = Path(out_dir)
    summaries = []
    for seed in cfg.get("seeds", [0]):
        sd = out / f"seed_{seed}"
        sd.mkdir(parents=True, exist_ok=True)
        try:
            res = restore_seed(cfg, problem, int(seed))
            doc = res.to_dict()
            rows = _trace_rows(res.trace, problem["kernel"])
        except SamplingError as exc:
            doc = RestorationResult(x0=np.zeros(0), phi=np.zeros(0), seed=int(seed), status="error",
                                    error={"message": str(exc), "step": exc.step},
                                    config={"mode": cfg.get("mode", "gibbsddrm")}).to_dict()
            doc["x0_estimate"] = doc["phi_estimate"] = None
            rows = []
        doc = json.loads(canonical_json(doc))
        validate(doc, RESULT_SCHEMA)
        write_json(sd / "result.json", doc)
        if doc["status"] == "ok":
            write_csv(sd / "x0.csv", np.asarray(res.x0).reshape(-1))
            write_csv(sd / "phi.csv", np.asarray(res.phi).reshape(-1))
        _write_trace_csv(rows, sd / "trace.csv")
        svg_plot({"residual": [r["residual"] for r in rows], "kernel error": [r["kernel_error"] for r in rows]},
                 sd / "plot.svg", title=f"seed {seed}")
        summaries.append({"seed": int(seed), "status": doc["status"], "metrics": doc["metrics"]})
    write_json(out / "summary.json", summaries)
    return summaries


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gibbsddrm", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="experiment config JSON")
        sp.add_argument("--seed", type=int, help="run this seed only")
        sp.add_argument("--mode", choices=["gibbsddrm", "ddrm", "blocked"])
        sp.add_argument("--out", help="output directory")

    g = sub.add_parser("generate", help="write a synthetic or file-based problem")
    common(g)
    r = sub.add_parser("restore", help="restore a generated problem")
    common(r)
    r.add_argument("--problem", required=True, help="directory written by `generate`")
    m = sub.add_parser("metrics", help="PSNR / MSE / kernel error for stored arrays")
    m.add_argument("--ref", required=True)
    m.add_argument("--est", required=True)
    m.add_argument("--phi-ref")
    m.add_argument("--phi-est")
    m.add_argument("--range", type=float, default=1.0, dest="data_range")
    c = sub.add_parser("calibrate", help="derive benchmark constants on calibration seeds")
    c.add_argument("--out", help="write the constants JSON here (default: stdout)")
    c.add_argument("--seeds", type=int, default=40, help="number of calibration seeds (from 1000)")
    s = sub.add_parser("reference-samplers", help="compare exact-conditional samplers on the toy chain")
    s.add_argument("--sweeps", type=int, default=50)
    s.add_argument("--chains", type=int, default=2000)
    s.add_argument("--seed", type=int, default=0)
    return p


def _cmd_metrics(args) -> dict:
    ref = load_array(args.ref, args.data_range)
    est = load_array(args.est, args.data_range)
    k_ref = load_array(args.phi_ref) if args.phi_ref else None
    k_est = load_array(args.phi_est) if args.phi_est else None
    return compute_metrics(ref, np.real(est).reshape(ref.shape), k_ref, k_est, args.data_range)


def _cmd_reference(args) -> dict:
    from .oracle import ToyModel, tv_distance
    from .reference import VARIANTS, run_reference_samplers

    toy = ToyModel(prior_mean=0.5, prior_var=1.0, A=[[1.0]], sigma_y=0.5, sigmas=(0.0, 1.0, 2.0, 3.0),
                   phi_values=[0.5, 1.0, 1.5, 2.0], phi_weights=[1, 1, 1, 1], y=[1.2])
    rng = np.random.default_rng(args.seed)
    exact_x, exact_phi = toy.sample_posterior(args.sweeps * args.chains, rng)
    out = {"exact_phi_posterior": toy.exact_phi_posterior().tolist(), "variants": {}}
    edges = np.append(toy.phi_values - 0.25, toy.phi_values[-1] + 0.25)
    for v in VARIANTS:
        ch = run_reference_samplers(toy, v, args.sweeps, rng, n_chains=args.chains, burn_in=20)
        out["variants"][v] = {
            "tv_x0_vs_exact": tv_distance(ch.x0, exact_x),
            "tv_phi_vs_exact": tv_distance(ch.phi, exact_phi, bins=[edges]),
        }
    return out


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "generate":
            cfg = load_config(args.config, args.seed, args.mode, args.out)
            man = generate(cfg, cfg.get("output_dir", "problem"))
            print(json.dumps({"written": cfg.get("output_dir", "problem"), "files": man["files"]}))
        elif args.command == "restore":
            cfg = load_config(args.config, args.seed, args.mode, args.out)
            summaries = restore(cfg, args.problem, cfg.get("output_dir", "results"))
            print(json.dumps(summaries, indent=2))
            if any(s["status"] != "ok" for s in summaries):
                return EXIT_RUNTIME
        elif args.command == "metrics":
            print(json.dumps(compute_metrics_json(_cmd_metrics(args)), indent=2, sort_keys=True))
        elif args.command == "calibrate":
            consts = bench.calibrate(seeds=range(1000, 1000 + args.seeds))
            validate(consts, CALIBRATION_SCHEMA)
            text = json.dumps(consts, indent=2, sort_keys=True) + "\n"
            if args.out:
                Path(args.out).write_text(text)
            else:
                sys.stdout.write(text)
        elif args.command == "reference-samplers":
            print(json.dumps(_cmd_reference(args), indent=2))
    except ConfigError as exc:
        print(f"error: invalid config field '{exc.field}': {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID if args.command != "restore" else EXIT_RUNTIME
    return EXIT_OK


def compute_metrics_json(m: dict) -> dict:
    return json.loads(canonical_json(m))


if __name__ == "__main__":
    sys.exit(main())

"""Command-line pipeline: simulate, acquire, reconstruct, evaluate, and run
the theory-validation suites.

Every command validates its configuration before touching any output path,
writes artifacts in the binary format of :mod:`csmri.signal`, and drops a
JSON sidecar (``<artifact>.json``) recording the parameters that produced
the file. Exit codes: 0 success, 1 usage/configuration error, 2 numerical
failure (divergence, non-convergence, degenerate scale), 3 theory-assertion
failure.
"""

import argparse
import csv
import json
import math
import sys
import time
from importlib import resources
from pathlib import Path

import numpy as np

from . import (
    acquisition,
    estimators,
    kernels,
    metrics,
    priors,
    sampler,
    signal,
    theory,
)

_RENDERABLE = ("phantom", "mean", "std")


class CliError(Exception):
    """Usage or configuration problem; maps to exit code 1."""


class TheoryValidationError(Exception):
    """A theory suite produced a failing report; maps to exit code 3."""


class ReconstructionError(RuntimeError):
    """Numerical failure inside a reconstruction; maps to exit code 2."""


_NUMERICAL_ERRORS = (
    sampler.DivergenceError,
    estimators.StepSizeError,
    estimators.SingularOperatorError,
    priors.SingularCovarianceError,
    ReconstructionError,
    ArithmeticError,
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message)


# ---------------------------------------------------------------------------
# Small helpers
# ---------------------------------------------------------------------------


def _parse_size(text):
    try:
        h, w = text.lower().split("x")
        h, w = int(h), int(w)
    except ValueError as exc:
        raise CliError(f"--size expects HxW, got {text!r}") from exc
    if h < 1 or w < 1:
        raise CliError("--size dimensions must be >= 1")
    return h, w


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _load_json(path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise CliError(f"invalid JSON in {path}: {exc}") from exc


def _bundled_config(name):
    return json.loads(
        resources.files("csmri").joinpath("data", name).read_text()
    )


def _sidecar(out_path, params):
    _write_json(str(out_path) + ".json", params)


def _resolve_sigma(value, image, sens):
    if value == "auto":
        return acquisition.default_sigma(image, sens)
    try:
        sigma = float(value)
    except (TypeError, ValueError) as exc:
        raise CliError(f"--sigma expects a number or 'auto', got {value!r}") from exc
    if sigma < 0:
        raise CliError("--sigma must be >= 0")
    return sigma


def _load_model(coils_path, mask_path):
    sens = acquisition.load_coils(coils_path)
    mask = acquisition.load_mask(mask_path)
    return acquisition.AcquisitionModel(sens, mask)


# ---------------------------------------------------------------------------
# Artifact generation commands
# ---------------------------------------------------------------------------


def cmd_phantom(args):
    h, w = _parse_size(args.size)
    prior = None
    if args.kind == "gmm-sample":
        if args.prior is None:
            raise CliError("--kind gmm-sample requires --prior")
        prior = priors.from_config(_load_json(args.prior), dim=2 * h * w)
    img = acquisition.make_phantom(
        args.kind, h, w, seed=args.seed, phase_amplitude=args.phase_amplitude,
        prior=prior,
    )
    signal.write_image(img, args.out)
    _sidecar(args.out, {
        "command": "phantom", "kind": args.kind, "height": h, "width": w,
        "seed": args.seed, "phase_amplitude": args.phase_amplitude,
        "prior": args.prior,
    })


def cmd_coils(args):
    h, w = _parse_size(args.size)
    profile = acquisition.CoilProfile(kind=args.kind)
    sens = acquisition.simulate_coils(args.coils, h, w, profile, seed=args.seed)
    acquisition.save_coils(sens, args.out)
    _sidecar(args.out, {
        "command": "coils", "coils": args.coils, "height": h, "width": w,
        "kind": args.kind, "seed": args.seed,
    })


def cmd_mask(args):
    h, w = _parse_size(args.size)
    mask = acquisition.make_mask(args.kind, h, w, args.R, args.acs, seed=args.seed)
    acquisition.save_mask(mask, args.out)
    _sidecar(args.out, {
        "command": "mask", "kind": args.kind, "height": h, "width": w,
        "R": args.R, "acs": args.acs, "seed": args.seed,
        "achieved_acceleration": mask.acceleration,
    })


def cmd_acquire(args):
    img = signal.read_image(args.image)
    sens = acquisition.load_coils(args.coils)
    mask = acquisition.load_mask(args.mask)
    sigma = _resolve_sigma(args.sigma, img, sens)
    model = acquisition.AcquisitionModel(sens, mask, noise_sigma=sigma)
    ksp = acquisition.acquire(model, img, seed=args.seed)
    signal.write_kspace(ksp, args.out)
    _sidecar(args.out, {
        "command": "acquire", "image": args.image, "coils": args.coils,
        "mask": args.mask, "sigma": sigma, "seed": args.seed,
        "acceleration": model.mask.acceleration,
    })


# ---------------------------------------------------------------------------
# Reconstruction
# ---------------------------------------------------------------------------


def _reconstruct_langevin(args, model, ksp):
    if args.prior is None:
        raise CliError("--method langevin requires --prior")
    h, w = model.shape
    prior = priors.from_config(_load_json(args.prior), dim=2 * h * w)
    schedule = sampler.make_schedule(
        beta_begin=args.beta_begin, beta_end=args.beta_end, levels=args.levels,
        steps_per_level=args.steps_per_level, eta0=args.eta0,
        gamma_rule=args.gamma_rule,
    )
    if args.sigma == "auto":
        sidecar = Path(args.kspace + ".json")
        if not sidecar.exists():
            raise CliError(
                "--sigma auto needs the k-space sidecar "
                f"{sidecar} (write it with `csmri acquire`)"
            )
        sigma = float(_load_json(sidecar)["sigma"])
    else:
        sigma = _resolve_sigma(args.sigma, None, None)
    sampler_sigma = sigma / math.sqrt(2.0)
    started = time.perf_counter()
    ens = sampler.posterior_ensemble(
        model, ksp, prior, schedule, sampler_sigma,
        chains=args.chains, seed=args.seed, threads=args.threads,
    )
    elapsed = time.perf_counter() - started
    signal.write_image(ens.mean, args.out)
    std_out = args.std_out or (args.out + ".std.img")
    signal.write_image(signal.ComplexImage(ens.std.astype(complex)), std_out)
    _sidecar(args.out, {
        "command": "reconstruct", "method": "langevin", "chains": args.chains,
        "seed": args.seed, "sigma": sigma, "sampler_sigma": sampler_sigma,
        "schedule": {
            "beta_begin": args.beta_begin, "beta_end": args.beta_end,
            "levels": args.levels, "steps_per_level": args.steps_per_level,
            "eta0": args.eta0, "gamma_rule": args.gamma_rule,
        },
        "std_out": std_out,
    })
    if args.manifest:
        _write_json(args.manifest, {
            "chains": args.chains, "seconds": elapsed,
            "chain_seeds": sampler._derive_chain_seeds(args.seed, args.chains),
            "threads": args.threads,
            "versions": {
                "python": sys.version.split()[0], "numpy": np.__version__,
            },
        })


def cmd_reconstruct(args):
    model = _load_model(args.coils, args.mask)
    ksp = signal.read_kspace(args.kspace)
    if args.method == "langevin":
        _reconstruct_langevin(args, model, ksp)
        return
    if args.method == "zero-fill":
        img = estimators.zero_filled(model, ksp)
        extra = {}
    elif args.method == "mvue":
        res = estimators.mvue(
            model, ksp, estimators.CgSettings(args.max_iters, args.tol)
        )
        if not res.converged:
            raise ReconstructionError(
                f"normal-equation solver did not reach tol {args.tol:g} in "
                f"{res.iterations} iterations (final residual "
                f"{res.residuals[-1]:.3e})"
            )
        img = res.image
        extra = {"iterations": res.iterations, "residual": res.residuals[-1]}
    elif args.method == "l1-wavelet":
        levels = args.wavelet_levels
        if levels is None:
            levels = min(3, kernels.max_haar_levels(*model.shape))
        settings = estimators.WaveletSettings(
            levels=levels, lam=args.lam, iters=args.iters, step=args.step
        )
        res = estimators.l1_wavelet(model, ksp, settings)
        img = res.image
        extra = {"objective": res.objectives[-1], "levels": levels}
    else:  # argparse choices make this unreachable
        raise CliError(f"unknown method {args.method!r}")
    signal.write_image(img, args.out)
    _sidecar(args.out, {
        "command": "reconstruct", "method": args.method, "kspace": args.kspace,
        "coils": args.coils, "mask": args.mask, **extra,
    })


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


def _metric_pairs(ref, rec):
    ref_path, rec_path = Path(ref), Path(rec)
    if ref_path.is_dir() != rec_path.is_dir():
        raise CliError("--ref and --rec must both be files or both directories")
    if not ref_path.is_dir():
        return [(ref_path.name, ref_path, rec_path)]
    pairs = []
    for rpath in sorted(ref_path.glob("*.img")):
        other = rec_path / rpath.name
        if not other.exists():
            raise CliError(f"no matching reconstruction for {rpath.name}")
        pairs.append((rpath.name, rpath, other))
    if not pairs:
        raise CliError(f"no .img files in {ref_path}")
    return pairs


def _aggregate_finite(values):
    finite = [v for v in values if math.isfinite(v)]
    if not finite:
        return {"mean": None, "ci": None, "count": 0}
    mean, ci = metrics.aggregate(finite)
    return {"mean": mean, "ci": list(ci), "count": len(finite)}


def cmd_metrics(args):
    pairs = _metric_pairs(args.ref, args.rec)
    reports = {}
    for name, rpath, cpath in pairs:
        ref = signal.read_image(rpath)
        rec = signal.read_image(cpath)
        reports[name] = metrics.evaluate(ref, rec, mask_threshold=args.threshold)
    payload = {name: rep.to_dict() for name, rep in reports.items()}
    result = {"pairs": payload, "mask_threshold": args.threshold}
    if len(reports) > 1:
        result["aggregate"] = {
            field: _aggregate_finite([getattr(r, field) for r in reports.values()])
            for field in ("psnr", "ssim", "masked_psnr", "masked_ssim")
        }
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["name", "psnr", "ssim", "masked_psnr", "masked_ssim"]
            )
            for name, rep in reports.items():
                writer.writerow(
                    [name, rep.psnr, rep.ssim, rep.masked_psnr, rep.masked_ssim]
                )
    if args.out:
        _write_json(args.out, result)
    else:
        print(json.dumps(result, indent=2, sort_keys=True))


# ---------------------------------------------------------------------------
# Theory validation
# ---------------------------------------------------------------------------


def _finite_from_cfg(cfg, what):
    try:
        atoms = np.asarray(cfg["atoms"], dtype=np.float64)
        probs = np.asarray(cfg["probs"], dtype=np.float64)
    except KeyError as exc:
        raise CliError(f"{what} needs 'atoms' and 'probs'") from exc
    return priors.FiniteDistribution(atoms, probs)


def _theorem2_matrix(cfg, dim):
    a_cfg = cfg["a"]
    if isinstance(a_cfg, dict):
        rng = np.random.default_rng(a_cfg["seed"])
        return rng.standard_normal((int(a_cfg["rows"]), dim))
    return np.asarray(a_cfg, dtype=np.float64)


def run_theory_suites(cfg, suites, trials=None, record_trials=False):
    """Run the configured suites; returns (report dict, list of CSV rows)."""
    report = {}
    rows = []
    if "lemma1" in suites:
        params = dict(cfg["lemma1"])
        if trials is not None:
            params["trials"] = trials
        rep = theory.validate_lemma1(**params)
        report["lemma1"] = rep.to_dict()
    if "theorem2" in suites:
        params = dict(cfg["theorem2"])
        if trials is not None:
            params["trials"] = trials
        prior = priors.FiniteDistribution(
            np.asarray(params.pop("atoms"), dtype=np.float64),
            np.asarray(params.pop("probs"), dtype=np.float64),
        )
        a = _theorem2_matrix({"a": params.pop("a")}, prior.dim)
        rep = theory.validate_theorem2(
            prior, a, record_trials=record_trials, **params
        )
        report["theorem2"] = rep.to_dict()
        rows.extend(
            ["theorem2", "", metric, eps, t, "", err_alg, err_ps]
            for metric, eps, t, err_alg, err_ps in rep.trial_records
        )
    if "theorem1" in suites:
        params = dict(cfg["theorem1"])
        if trials is not None:
            params["trials"] = trials
        mu = _finite_from_cfg(params.pop("mu"), "theorem1.mu")
        nu = _finite_from_cfg(params.pop("nu"), "theorem1.nu")
        rep = theory.validate_theorem1(
            mu, nu, record_trials=record_trials, **params
        )
        report["theorem1"] = rep.to_dict()
        rows.extend(
            ["theorem1", m, "", "", t, err, "", ""]
            for m, t, err in rep.trial_records
        )
    report["ok"] = all(section["ok"] for section in report.values())
    return report, rows


def cmd_validate_theory(args):
    if args.config == "default":
        cfg = _bundled_config("theory_default.json")
    else:
        cfg = _load_json(args.config)
    if args.suite == "all":
        suites = [s for s in ("lemma1", "theorem2", "theorem1") if s in cfg]
        if not suites:
            raise CliError("config defines no known suite")
    else:
        if args.suite not in cfg:
            raise CliError(f"config has no section {args.suite!r}")
        suites = [args.suite]
    report, rows = run_theory_suites(
        cfg, suites, trials=args.trials, record_trials=bool(args.csv)
    )
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["suite", "m", "metric", "eps", "trial", "err", "err_alg",
                 "err_ps"]
            )
            writer.writerows(rows)
    if args.out:
        _write_json(args.out, report)
    else:
        print(json.dumps(report, indent=2, sort_keys=True))
    if not report["ok"]:
        failed = [s for s in suites if not report[s]["ok"]]
        raise TheoryValidationError(f"failed suites: {', '.join(failed)}")


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------


def _to_gray(img):
    normalized, scale = estimators.normalize_99(img)
    mag = np.clip(np.abs(normalized.data), 0.0, 1.0)
    return np.round(255.0 * mag).astype(np.uint8), scale


def _write_pgm(path, gray):
    header = f"P5\n{gray.shape[1]} {gray.shape[0]}\n255\n".encode()
    Path(path).write_bytes(header + gray.tobytes())


def _render(img, out_path):
    gray, scale = _to_gray(img)
    suffix = Path(out_path).suffix.lower()
    if suffix == ".pgm":
        _write_pgm(out_path, gray)
    elif suffix == ".png":
        from PIL import Image

        Image.fromarray(gray, mode="L").save(out_path)
    else:
        raise CliError(f"unsupported render format {suffix!r} (use .pgm or .png)")
    return scale


def cmd_render(args):
    img = signal.read_image(args.image)
    scale = _render(img, args.out)
    _sidecar(args.out, {
        "command": "render", "image": args.image, "normalization_scale": scale,
    })


# ---------------------------------------------------------------------------
# Pipeline
# ---------------------------------------------------------------------------


def _require(section, key, where):
    if key not in section:
        raise CliError(f"pipeline config: missing {where}.{key}")
    return section[key]


def _pipeline_plan(cfg):
    """Validate the whole config up front; no outputs are touched here."""
    plan = {}
    phantom = _require(cfg, "phantom", "config")
    h = int(_require(phantom, "height", "phantom"))
    w = int(_require(phantom, "width", "phantom"))
    plan["phantom"] = {
        "kind": _require(phantom, "kind", "phantom"),
        "height": h, "width": w,
        "seed": int(_require(phantom, "seed", "phantom")),
        "phase_amplitude": float(phantom.get("phase_amplitude", 0.0)),
        "prior": phantom.get("prior"),
    }
    coils = _require(cfg, "coils", "config")
    plan["coils"] = {
        "coils": int(_require(coils, "coils", "coils")),
        "kind": coils.get("kind", "gaussian-lobes"),
        "seed": int(_require(coils, "seed", "coils")),
    }
    acquisition.CoilProfile(kind=plan["coils"]["kind"])
    mask = _require(cfg, "mask", "config")
    plan["mask"] = {
        "kind": _require(mask, "kind", "mask"),
        "R": float(_require(mask, "R", "mask")),
        "acs": int(_require(mask, "acs", "mask")),
        "seed": int(_require(mask, "seed", "mask")),
    }
    if plan["mask"]["kind"] not in acquisition.MASK_KINDS:
        raise CliError(f"pipeline config: unknown mask kind {plan['mask']['kind']!r}")
    noise = _require(cfg, "noise", "config")
    plan["noise"] = {
        "sigma": _require(noise, "sigma", "noise"),
        "seed": int(_require(noise, "seed", "noise")),
    }
    recon = _require(cfg, "reconstruction", "config")
    method = _require(recon, "method", "reconstruction")
    if method != "langevin":
        raise CliError("pipeline supports method 'langevin' only")
    schedule_cfg = dict(_require(recon, "schedule", "reconstruction"))
    plan["reconstruction"] = {
        "method": method,
        "prior": _require(recon, "prior", "reconstruction"),
        "schedule": schedule_cfg,
        "chains": int(_require(recon, "chains", "reconstruction")),
        "seed": int(_require(recon, "seed", "reconstruction")),
        "sigma": recon.get("sigma", "matched"),
    }
    sampler.make_schedule(**schedule_cfg)  # validates
    priors.from_config(plan["reconstruction"]["prior"], dim=2 * h * w)
    plan["metrics"] = {
        "mask_threshold": float(cfg.get("metrics", {}).get("mask_threshold", 0.05)),
    }
    plan["render"] = list(cfg.get("render", []))
    for name in plan["render"]:
        if name not in _RENDERABLE:
            raise CliError(f"pipeline config: cannot render {name!r}")
    plan["name"] = cfg.get("name", "experiment")
    return plan


def cmd_pipeline(args):
    if args.config == "demo":
        cfg = _bundled_config("demo_config.json")
    else:
        cfg = _load_json(args.config)
    plan = _pipeline_plan(cfg)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    timings = {}
    h, w = plan["phantom"]["height"], plan["phantom"]["width"]

    t0 = time.perf_counter()
    ph = plan["phantom"]
    prior = None
    if ph["kind"] == "gmm-sample":
        prior = priors.from_config(ph["prior"], dim=2 * h * w)
    image = acquisition.make_phantom(
        ph["kind"], h, w, seed=ph["seed"],
        phase_amplitude=ph["phase_amplitude"], prior=prior,
    )
    signal.write_image(image, out_dir / "phantom.img")
    _sidecar(out_dir / "phantom.img", {**ph, "prior": None})
    timings["phantom"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    sens = acquisition.simulate_coils(
        plan["coils"]["coils"], h, w,
        acquisition.CoilProfile(kind=plan["coils"]["kind"]),
        seed=plan["coils"]["seed"],
    )
    acquisition.save_coils(sens, out_dir / "coils.img")
    _sidecar(out_dir / "coils.img", plan["coils"])
    timings["coils"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    mask = acquisition.make_mask(
        plan["mask"]["kind"], h, w, plan["mask"]["R"], plan["mask"]["acs"],
        seed=plan["mask"]["seed"],
    )
    acquisition.save_mask(mask, out_dir / "mask.msk")
    _sidecar(out_dir / "mask.msk",
             {**plan["mask"], "achieved_acceleration": mask.acceleration})
    timings["mask"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    sigma = plan["noise"]["sigma"]
    sigma = (
        acquisition.default_sigma(image, sens)
        if sigma == "auto"
        else float(sigma)
    )
    model = acquisition.AcquisitionModel(sens, mask, noise_sigma=sigma)
    ksp = acquisition.acquire(model, image, seed=plan["noise"]["seed"])
    signal.write_kspace(ksp, out_dir / "kspace.ksp")
    _sidecar(out_dir / "kspace.ksp",
             {"sigma": sigma, "seed": plan["noise"]["seed"],
              "acceleration": mask.acceleration})
    timings["acquire"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    rc = plan["reconstruction"]
    prior = priors.from_config(rc["prior"], dim=2 * h * w)
    schedule = sampler.make_schedule(**rc["schedule"])
    sampler_sigma = (
        sigma / math.sqrt(2.0) if rc["sigma"] == "matched" else float(rc["sigma"])
    )
    ens = sampler.posterior_ensemble(
        model, ksp, prior, schedule, sampler_sigma,
        chains=rc["chains"], seed=rc["seed"], threads=args.threads,
    )
    signal.write_image(ens.mean, out_dir / "recon_mean.img")
    signal.write_image(
        signal.ComplexImage(ens.std.astype(complex)), out_dir / "recon_std.img"
    )
    _sidecar(out_dir / "recon_mean.img", {
        "method": "langevin", "chains": rc["chains"], "seed": rc["seed"],
        "sigma": sigma, "sampler_sigma": sampler_sigma,
        "schedule": rc["schedule"],
    })
    timings["reconstruct"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    report = metrics.evaluate(
        image, ens.mean, mask_threshold=plan["metrics"]["mask_threshold"]
    )
    _write_json(out_dir / "metrics.json", report.to_dict())
    timings["metrics"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    sources = {
        "phantom": image,
        "mean": ens.mean,
        "std": signal.ComplexImage(ens.std.astype(complex)),
    }
    for name in plan["render"]:
        _render(sources[name], out_dir / f"{name}.pgm")
    timings["render"] = time.perf_counter() - t0

    _write_json(out_dir / "manifest.json", {
        "name": plan["name"], "seconds": timings,
        "chain_seeds": sampler._derive_chain_seeds(rc["seed"], rc["chains"]),
        "threads": args.threads,
        "versions": {"python": sys.version.split()[0], "numpy": np.__version__},
    })


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _build_parser():
    parser = _Parser(prog="csmri", description=__doc__)
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("phantom", help="write a synthetic ground-truth image")
    p.add_argument("--kind", required=True, choices=("shepp-logan", "gmm-sample"))
    p.add_argument("--size", required=True, help="HxW, e.g. 64x64")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--phase-amplitude", type=float, default=0.0)
    p.add_argument("--prior", help="prior config JSON (gmm-sample only)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_phantom)

    p = sub.add_parser("coils", help="simulate coil sensitivity maps")
    p.add_argument("--coils", required=True, type=int)
    p.add_argument("--size", required=True)
    p.add_argument("--kind", default="gaussian-lobes",
                   choices=("gaussian-lobes", "uniform"))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_coils)

    p = sub.add_parser("mask", help="generate an undersampling mask")
    p.add_argument("--kind", required=True, choices=acquisition.MASK_KINDS)
    p.add_argument("--size", required=True)
    p.add_argument("--R", required=True, type=float, help="target acceleration")
    p.add_argument("--acs", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_mask)

    p = sub.add_parser("acquire", help="simulate noisy undersampled k-space")
    p.add_argument("--image", required=True)
    p.add_argument("--coils", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--sigma", default="0.0",
                   help="total complex noise std, or 'auto'")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_acquire)

    p = sub.add_parser("reconstruct", help="reconstruct an image from k-space")
    p.add_argument("--method", required=True,
                   choices=("zero-fill", "mvue", "l1-wavelet", "langevin"))
    p.add_argument("--kspace", required=True)
    p.add_argument("--coils", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--max-iters", type=int, default=200, help="mvue")
    p.add_argument("--tol", type=float, default=1e-8, help="mvue")
    p.add_argument("--lam", type=float, default=0.01, help="l1-wavelet")
    p.add_argument("--iters", type=int, default=100, help="l1-wavelet")
    p.add_argument("--wavelet-levels", type=int, default=None, help="l1-wavelet")
    p.add_argument("--step", type=float, default=None, help="l1-wavelet")
    p.add_argument("--prior", help="prior config JSON (langevin)")
    p.add_argument("--chains", type=int, default=8, help="langevin")
    p.add_argument("--seed", type=int, default=0, help="langevin")
    p.add_argument("--sigma", default="auto",
                   help="acquisition noise std or 'auto' = k-space sidecar "
                        "(langevin; the sampler uses sigma/sqrt(2) per "
                        "real component)")
    p.add_argument("--beta-begin", type=float, default=232.0, help="langevin")
    p.add_argument("--beta-end", type=float, default=0.0066, help="langevin")
    p.add_argument("--levels", type=int, default=100, help="langevin")
    p.add_argument("--steps-per-level", type=int, default=3, help="langevin")
    p.add_argument("--eta0", type=float, default=1e-5, help="langevin")
    p.add_argument("--gamma-rule", default="beta", choices=("beta", "zero"),
                   help="langevin")
    p.add_argument("--std-out", help="langevin: path for the std image")
    p.add_argument("--manifest", help="langevin: path for the run manifest")
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("metrics", help="PSNR/SSIM report (files or directories)")
    p.add_argument("--ref", required=True)
    p.add_argument("--rec", required=True)
    p.add_argument("--threshold", type=float, default=0.05)
    p.add_argument("--out", help="report JSON path (default: stdout)")
    p.add_argument("--csv", help="per-image CSV path (batch mode)")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("validate-theory", help="run the theory suites")
    p.add_argument("--config", default="default",
                   help="suite config JSON, or 'default' for the bundled one")
    p.add_argument("--suite", default="all",
                   choices=("all", "lemma1", "theorem1", "theorem2"))
    p.add_argument("--trials", type=int, default=None,
                   help="override each suite's trial count")
    p.add_argument("--out", help="report JSON path (default: stdout)")
    p.add_argument("--csv", help="per-trial records CSV path")
    p.set_defaults(func=cmd_validate_theory)

    p = sub.add_parser("render", help="write an 8-bit grayscale view")
    p.add_argument("--image", required=True)
    p.add_argument("--out", required=True, help=".pgm or .png")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("pipeline", help="run a full experiment from one config")
    p.add_argument("--config", default="demo",
                   help="pipeline config JSON, or 'demo' for the bundled one")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_pipeline)

    return parser


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if not hasattr(args, "func"):
            parser.print_usage(sys.stderr)
            return 1
        args.func(args)
        return 0
    except TheoryValidationError as err:
        print(f"error: {err}", file=sys.stderr)
        return 3
    except _NUMERICAL_ERRORS as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except CliError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except (signal.FileFormatError, OSError, ValueError, KeyError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

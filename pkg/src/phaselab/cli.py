"""Command-line entry point.

    phaselab <experiment> [--config FILE] [--out DIR] [--jobs N] [--seed-base S] [--plots]

Experiments: validate-stats, isotropic-sweep, powerlaw-sweep, landscape,
ode-compare, surgery, texture-train. Exit status is 0 on success, 2 when the
validation battery fails and 1 on configuration or input errors.
"""
import argparse
import hashlib
import math
import os
import sys
import warnings

import numpy as np

from . import battery, data_model, fourier, sgd, shallow, special, surgery, theory
from .config import ResultBundle, build_spectrum, load
from .errors import ConfigError, PhaseLabError


def _plant(cfg):
    v = cfg.values
    if v.get("phase_shift", "sin") == "quarter_turn":
        return data_model.PlantSpec(v["epsilon"], v["k0"], "user", True, data_model.quarter_turn)
    return data_model.PlantSpec(v["epsilon"], v["k0"])


def _pyplot():
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        warnings.warn("matplotlib is not installed; skipping plots", RuntimeWarning)
        return None
    plt.rcParams["svg.hashsalt"] = "phaselab"
    plt.rcParams["svg.fonttype"] = "none"
    return plt


def _save(plt, fig, bundle, name):
    fig.savefig(bundle.path(name), format="svg", metadata={"Date": None})
    plt.close(fig)


# sweeps ---------------------------------------------------------------------

def _sweep_schedule(cfg):
    base = sgd.SgdConfig(steps=cfg["steps"], points_per_decade=cfg["points_per_decade"]).schedule()
    budgets = [b for b in cfg["budgets"] if 0 <= b <= cfg["steps"]]
    return tuple(int(s) for s in np.unique(np.concatenate([base, budgets]).astype(np.int64)))


def _run_sweep(cfg, bundle, jobs, plots):
    N = cfg["N"]
    spec = build_spectrum(cfg["spectrum"], N, cfg["k0"])
    plant = _plant(cfg)
    act = special.activation_by_name(cfg["activation"])
    scfg = sgd.SgdConfig(variant=cfg["variant"], delta_scale=cfg["delta_scale"], beta=cfg["beta"],
                         steps=cfg["steps"], ascent=cfg["ascent"], record_steps=_sweep_schedule(cfg))
    traces = sgd.run_seeds(spec, plant, act, scfg, cfg.seed_list(), jobs=jobs)
    sgd.write_traces_csv(bundle.path("traces.csv"), traces)
    summary = sgd.recovery_summary(traces, cfg["eta"])
    summary.to_csv(bundle.path("summary.csv"))
    with open(bundle.path("budgets.csv"), "w") as fh:
        fh.write("budget,phase_norm_q25,phase_norm_median,phase_norm_q75,"
                 "principal_norm_median,frac_recovered\n")
        for b in cfg["budgets"]:
            if b > cfg["steps"]:
                continue
            i = int(np.searchsorted(summary.steps, b))
            ph = summary.quantiles["phase_norm"][i]
            pr = summary.quantiles["principal_norm"][i]
            fh.write(f"{b},{float(ph[0])!r},{float(ph[1])!r},{float(ph[2])!r},{float(pr[1])!r},{float(summary.frac_recovered[i])!r}\n")
    if plots:
        plt = _pyplot()
        if plt is not None:
            fig, ax = plt.subplots(figsize=(6, 4))
            x = np.maximum(summary.steps, 1)
            for name in ("phase_norm", "principal_norm"):
                q = summary.quantiles[name]
                ax.plot(x, q[:, 1], label=name.replace("_", " "))
                ax.fill_between(x, q[:, 0], q[:, 2], alpha=0.25)
            ax.set_xscale("log")
            ax.set_xlabel("SGD steps")
            ax.set_ylabel("overlap norm (median, quartiles)")
            ax.legend()
            _save(plt, fig, bundle, "overlaps.svg")
    return traces, summary


def ordering_diagnostics(summary, eta=0.5):
    """Peak step of the median principal norm, first step the median phase norm
    reaches ``eta``, and whether the principal norm decays after that crossing."""
    prin = summary.median("principal_norm")
    phase = summary.median("phase_norm")
    steps = summary.steps
    peak = int(np.argmax(prin))
    cross = np.nonzero(phase >= eta)[0]
    cross_step = float(steps[cross[0]]) if cross.size else math.inf
    decays = bool(cross.size and prin[-1] < prin[peak] and steps[peak] < cross_step)
    return {"principal_peak_step": float(steps[peak]), "principal_peak": float(prin[peak]),
            "phase_cross_step": cross_step, "principal_final": float(prin[-1]), "forgets": decays}


def run_isotropic_sweep(cfg, bundle, jobs=1, plots=False):
    _run_sweep(cfg, bundle, jobs, plots)
    return 0


def run_powerlaw_sweep(cfg, bundle, jobs=1, plots=False):
    _, summary = _run_sweep(cfg, bundle, jobs, plots)
    diag = ordering_diagnostics(summary, cfg["eta"])
    with open(bundle.path("ordering.csv"), "w") as fh:
        fh.write(",".join(diag) + "\n")
        fh.write(",".join(repr(v) if isinstance(v, float) else str(v) for v in diag.values()) + "\n")
    return 0


# landscape ------------------------------------------------------------------

def run_landscape(cfg, bundle, jobs=1, plots=False):
    spec = build_spectrum(cfg["spectrum"], cfg["N"], cfg["k0"])
    plant = _plant(cfg)
    act = special.activation_by_name(cfg["activation"])
    rng = np.random.default_rng(cfg["seed_base"])
    land = theory.empirical_landscape(spec, plant, act, cfg["grid"], cfg["n_mc"], rng, method=cfg["method"])
    land.to_csv(bundle.path("landscape.csv"))
    minima = theory.landscape_minima(land)
    chi2, dof, p = theory.landscape_symmetry(land)
    with open(bundle.path("minima.csv"), "w") as fh:
        fh.write("angle\n")
        for a in minima:
            fh.write(f"{float(a)!r}\n")
    with open(bundle.path("symmetry.csv"), "w") as fh:
        fh.write("chi2,dof,pvalue\n")
        fh.write(f"{float(chi2)!r},{int(dof)},{float(p)!r}\n")
    if plots:
        plt = _pyplot()
        if plt is not None:
            fig, ax = plt.subplots(figsize=(5, 4.5))
            g = land.grid
            im = ax.imshow(land.loss_mean.T, origin="lower", extent=(g[0], g[-1], g[0], g[-1]), cmap="viridis")
            fig.colorbar(im, ax=ax, label="loss")
            ax.set_xlabel("alpha_u")
            ax.set_ylabel("alpha_v")
            _save(plt, fig, bundle, "landscape.svg")
    return 0


# ODE versus SGD -------------------------------------------------------------

def _principal_eigs(spec, k0):
    lam = spec.eigenvalues
    return np.array([lam[k] for k in spec.nonunit_modes()
                     if k not in (0, k0) and not (spec.N % 2 == 0 and k == spec.N // 2)])


def run_ode_compare(cfg, bundle, jobs=1, plots=False):
    N = cfg["N"]
    spec = build_spectrum(cfg["spectrum"], N, cfg["k0"])
    plant = _plant(cfg)
    act = special.activation_by_name(cfg["activation"])
    scfg = sgd.SgdConfig(variant=cfg["variant"], delta_scale=cfg["delta_scale"], beta=cfg["beta"],
                         steps=cfg["steps"], points_per_decade=cfg["points_per_decade"])
    traces = sgd.run_seeds(spec, plant, act, scfg, cfg.seed_list(), jobs=jobs)
    delta = scfg.learning_rate(N)
    like = theory.likelihood_coeffs(cfg["epsilon"], convention=cfg["convention"])
    c4, c6 = special.hermite_coeff(act, 4), special.hermite_coeff(act, 6)
    lam_m = _principal_eigs(spec, cfg["k0"])
    params = theory.RescaledParams.from_eigenvalues(N, spec.eigenvalues[cfg["k0"]], lam_m, c4, c6, like,
                                                    cfg["beta"], regime=cfg["regime"])
    M = len(lam_m)
    drift = theory.vector_drift(theory.rescaled_drift, params, M, cfg["convention"])
    t_end = cfg["steps"] * delta
    n_ode = max(1, int(math.ceil(t_end / cfg["ode_dt"])))
    dt = t_end / n_ode if t_end > 0 else cfg["ode_dt"]
    sq = math.sqrt(N)
    grid_t = traces[0].steps * delta
    ode_phase, ode_prin, sgd_phase, sgd_prin = [], [], [], []
    blowups = []
    for tr in traces:
        p0 = tr.projections[0]
        m0 = np.concatenate([sq * p0, [tr.omega_perp[0]]])
        times, traj = theory.integrate_ode(drift, m0, dt, n_ode if t_end > 0 else 0,
                                           limit=sq, on_blowup="truncate")
        blowups.append(times[-1] if times[-1] < t_end - 1e-12 else math.inf)
        ph = np.hypot(traj[:, 0], traj[:, 1])
        pr = np.sqrt(np.sum(traj[:, 2:2 + 2 * M] ** 2, axis=1))
        ode_phase.append(np.interp(grid_t, times, ph, right=np.nan))
        ode_prin.append(np.interp(grid_t, times, pr, right=np.nan))
        sgd_phase.append(sq * tr.phase_norm)
        sgd_prin.append(sq * tr.principal_norm)
    med = lambda a: np.nanmedian(np.array(a), axis=0) if np.any(np.isfinite(a)) else np.full(len(grid_t), np.nan)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        cols = [med(sgd_phase), med(ode_phase), med(sgd_prin), med(ode_prin)]
    with open(bundle.path("ode_compare.csv"), "w") as fh:
        fh.write("step,t,sgd_phase_m,ode_phase_m,sgd_principal_m,ode_principal_m\n")
        for i, st in enumerate(traces[0].steps):
            fh.write(f"{int(st)},{float(grid_t[i])!r}," + ",".join(repr(float(c[i])) for c in cols) + "\n")
    with open(bundle.path("ode_blowup.csv"), "w") as fh:
        fh.write("seed,blowup_t\n")
        for tr, b in zip(traces, blowups):
            fh.write(f"{tr.seed},{float(b)!r}\n")
    if plots:
        plt = _pyplot()
        if plt is not None:
            fig, ax = plt.subplots(figsize=(6, 4))
            x = np.maximum(grid_t, delta)
            ax.plot(x, cols[0], label="SGD phase m")
            ax.plot(x, cols[1], "--", label="ODE phase m")
            ax.plot(x, cols[2], label="SGD principal m")
            ax.plot(x, cols[3], "--", label="ODE principal m")
            ax.set_xscale("log")
            ax.set_xlabel("t = step * delta")
            ax.legend()
            _save(plt, fig, bundle, "ode_compare.svg")
    return 0


# statistics battery ---------------------------------------------------------

def run_validate_stats(cfg, bundle, jobs=1, plots=False):
    spec = build_spectrum(cfg["spectrum"], cfg["N"], cfg["k0"])
    reports = battery.run_battery(cfg["N"], cfg["epsilon"], cfg["k0"], cfg["n_samples"],
                                  np.random.default_rng(cfg["seed_base"]), spectrum=spec,
                                  strong_epsilon=cfg["strong_epsilon"])
    with open(bundle.path("report.txt"), "w") as fh:
        fh.write(battery.battery_text(reports))
    with open(bundle.path("checks.csv"), "w") as fh:
        fh.write("report,check,estimate,stderr,target,threshold,passed,expected_pass\n")
        for row in battery.battery_rows(reports):
            title, name, est, se, tgt, thr, passed, exp = row
            fh.write(f"\"{title}\",\"{name}\",{float(est)!r},{float(se)!r},{float(tgt)!r},{float(thr)!r},{int(passed)},{int(exp)}\n")
    return 0 if battery.battery_ok(reports) else 2


# surgery and training -------------------------------------------------------

def _corpus(cfg, rng):
    """(X, y, shape, class names, extra hash bytes)."""
    if cfg["corpus"] == "synthetic":
        spec = build_spectrum(cfg["spectrum"], cfg["N"], cfg["k0"])
        X, y = shallow.phase_corpus(spec, _plant(cfg), cfg["n_per_class"], rng)
        return X, y, (cfg["N"],), ["baseline", "planted"], b""
    root = cfg["corpus"]
    if not os.path.isdir(root):
        raise ConfigError(f"corpus directory {root!r} does not exist")
    try:
        names, patches = surgery.read_corpus(root)
    except OSError as exc:
        raise ConfigError(f"cannot read corpus {root!r}: {exc}") from exc
    if len(names) != 2:
        raise ConfigError(f"need exactly two classes, manifest lists {len(names)}")
    if not patches:
        raise ConfigError("corpus is empty")
    shape = patches[0].shape
    if any(p.shape != shape for p in patches):
        raise ConfigError("all patches must share their dimensions")
    X = np.array([p.flat() for p in patches])
    y = shallow.labels_from_classes([p.class_label for p in patches])
    digest = hashlib.sha1()
    for dirpath, _, files in sorted(os.walk(root)):
        for f in sorted(files):
            with open(os.path.join(dirpath, f), "rb") as fh:
                digest.update(f.encode() + b"\0" + fh.read())
    return X, y, shape, names, digest.digest()


def _write_variant_csv(path, X, y):
    with open(path, "w") as fh:
        fh.write("sample_id,label," + ",".join(f"x_{i}" for i in range(X.shape[1])) + "\n")
        for i, (row, lab) in enumerate(zip(X, y)):
            fh.write(f"{i},{int(lab)}," + ",".join(repr(float(v)) for v in row) + "\n")


def run_surgery(cfg, bundle, jobs=1, plots=False):
    rng = np.random.default_rng(cfg["seed_base"])
    X, y, shape, names, extra = _corpus(cfg, rng)
    bundle.extra_hash = extra
    variants = shallow.dataset_variants(X, y, rng, shape)
    for vname, D in variants.items():
        for lab, cname in zip((-1.0, 1.0), names):
            rows = [r.reshape(shape) for r in D[y == lab]]
            surgery.radial_spectrum(rows).to_csv(bundle.path(f"spectrum_{vname}_{cname}.csv"))
        if len(shape) == 2:
            patches = [surgery.ImagePatch(r.reshape(shape), int(lab > 0)) for r, lab in zip(D, y)]
            root = os.path.join(bundle.out, vname)
            surgery.write_corpus(root, names, patches)
            for dirpath, _, files in sorted(os.walk(root)):
                for f in sorted(files):
                    bundle.files.append(os.path.relpath(os.path.join(dirpath, f), bundle.out))
        else:
            _write_variant_csv(bundle.path(f"variant_{vname}.csv"), D, y)
    return 0


def run_texture_train(cfg, bundle, jobs=1, plots=False):
    rng = np.random.default_rng(cfg["seed_base"])
    X, y, shape, names, extra = _corpus(cfg, rng)
    bundle.extra_hash = extra
    variants = shallow.dataset_variants(X, y, rng, shape)
    res = shallow.amplitude_phase_signature(
        variants, y, cfg.seed_list(), k=cfg["hidden"], lr=cfg["lr"], epochs=cfg["epochs"],
        evals_per_epoch=cfg["evals_per_epoch"], shape=shape, test_frac=cfg["test_frac"],
        activation=cfg["activation"], jobs=jobs)
    for vname, reps in res.reports.items():
        path = bundle.path(f"train_{vname}.csv")
        for i, rep in enumerate(reps):
            rep.to_csv(path, header=(i == 0), mode="w" if i == 0 else "a")
    with open(bundle.path("drop_steps.csv"), "w") as fh:
        fh.write("variant,seed,drop_step\n")
        for vname, arr in res.drop_steps.items():
            for s, d in zip(cfg.seed_list(), arr):
                fh.write(f"{vname},{s},{float(d)!r}\n")
    with open(bundle.path("signature.csv"), "w") as fh:
        fh.write("seed,gap_first_decile,gap_last_decile\n")
        for s, a, b in zip(cfg.seed_list(), res.first_gaps, res.last_gaps):
            fh.write(f"{s},{float(a)!r},{float(b)!r}\n")
        fh.write(f"# p_first_two_sided={float(res.p_first)!r} p_last_one_sided={float(res.p_last)!r}\n")
    if plots:
        plt = _pyplot()
        if plt is not None:
            fig, ax = plt.subplots(figsize=(6, 4))
            for vname, reps in res.reports.items():
                steps = reps[0].column("step")
                ax.plot(steps, np.median([r.column("loss_orig") for r in reps], axis=0), label=vname)
            orig = res.reports["original"]
            ax.plot(orig[0].column("step"), np.median([r.column("loss_swapped") for r in orig], axis=0),
                    "--", label="original, phase-swapped test")
            ax.set_xlabel("training examples seen")
            ax.set_ylabel("test loss (median over seeds)")
            ax.legend()
            _save(plt, fig, bundle, "loss_curves.svg")
    return 0


RUNNERS = {
    "validate-stats": ("validate_stats", run_validate_stats),
    "isotropic-sweep": ("isotropic_sweep", run_isotropic_sweep),
    "powerlaw-sweep": ("powerlaw_sweep", run_powerlaw_sweep),
    "landscape": ("landscape", run_landscape),
    "ode-compare": ("ode_compare", run_ode_compare),
    "surgery": ("surgery", run_surgery),
    "texture-train": ("texture_train", run_texture_train),
}


def build_parser():
    ap = argparse.ArgumentParser(prog="phaselab", description=__doc__.split("\n\n")[0])
    ap.add_argument("experiment", choices=sorted(RUNNERS))
    ap.add_argument("--config", help="key = value config file")
    ap.add_argument("--out", default="results", help="output directory (default: results)")
    ap.add_argument("--jobs", type=int, default=os.cpu_count() or 1, help="concurrent seeds")
    ap.add_argument("--seed-base", type=int, default=None, help="first seed (overrides the config)")
    ap.add_argument("--plots", action="store_true", help="also write SVG plots (needs matplotlib)")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    kind, runner = RUNNERS[args.experiment]
    try:
        overrides = {"seed_base": str(args.seed_base)} if args.seed_base is not None else None
        cfg = load(kind, args.config, overrides)
        os.makedirs(args.out, exist_ok=True)
        bundle = ResultBundle(args.out, cfg)
        code = runner(cfg, bundle, jobs=max(1, args.jobs), plots=args.plots)
        listing = bundle.finish()
    except (ConfigError, OSError) as exc:
        print(f"phaselab: error: {exc}", file=sys.stderr)
        return 1
    except PhaseLabError as exc:
        print(f"phaselab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {len(bundle.files)} files to {args.out} ({os.path.basename(listing)})")
    if code == 2:
        print("validation battery: NOT OK", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end.

Subcommands: ``model``, ``decay``, ``bell``, ``simulate``, ``swap``.  Each reads
an optional JSON config (one section per module, unknown keys rejected);
command-line flags override config values.

Exit codes: 0 success, 2 input or validation error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import bell, entangle, fitter, memory, qstate, reference, sequencer, swapnet
from .entangle import VisibilityPair
from .memory import DecayParams
from .sequencer import SequenceConfig

SCHEMA_VERSION = 1
EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3

log = logging.getLogger("cavmem")


class ConfigError(ValueError):
    pass


class NumericalFailure(RuntimeError):
    def __init__(self, message: str, partial: dict | None = None):
        super().__init__(message)
        self.partial = partial


_DECAY_KEYS = {"A1", "A2", "tau1", "tau2"}
_SEQ_KEYS = {
    "loading_time", "write_period", "p_writeout", "max_attempts", "storage_time",
    "relock_pause", "detector_efficiency", "dark_count_prob", "settings",
}
_NODE_KEYS = {"ideal", "decay", "visibility", "sequence", "link_transmission"}
SCHEMA = {
    "seed": None,
    "trials": None,
    "out": None,
    "memory": {"finesse", "cooperativity"},
    "model": {"r_sg_min", "r_sg_max", "r_sg_step"},
    "decay": _DECAY_KEYS,
    "fit": {"input", "synthetic", "sigma", "n_points", "t_min", "t_max", "init"},
    "visibility": {"v_hv", "v_da"},
    "noise": {"p", "d", "phi0", "sigma_phi"},
    "bell": {"state", "grid_step", "mc_counts_per_setting", "s", "sigma_s"},
    "sequence": _SEQ_KEYS,
    "swap": {"node_a", "node_b", "t_store", "bsm_efficiency", "interference_visibility", "include_loading", "outcome"},
}


def _check_keys(section: dict, allowed: set, where: str) -> None:
    if not isinstance(section, dict):
        raise ConfigError(f"{where} must be a JSON object")
    unknown = set(section) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {sorted(unknown)}")


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    validate_config(cfg)
    return cfg


def validate_config(cfg: dict) -> None:
    _check_keys(cfg, set(SCHEMA), "config")
    for name, allowed in SCHEMA.items():
        if allowed is None or name not in cfg:
            continue
        _check_keys(cfg[name], allowed, name)
    if "fit" in cfg and "init" in cfg["fit"]:
        _check_keys(cfg["fit"]["init"], _DECAY_KEYS, "fit.init")
    for node in ("node_a", "node_b"):
        spec = cfg.get("swap", {}).get(node)
        if spec is None:
            continue
        _check_keys(spec, _NODE_KEYS, f"swap.{node}")
        for sub, allowed in (("decay", _DECAY_KEYS), ("visibility", {"v_hv", "v_da"}), ("sequence", _SEQ_KEYS)):
            if sub in spec:
                _check_keys(spec[sub], allowed, f"swap.{node}.{sub}")


def _decay(section: dict | None, default: DecayParams) -> DecayParams:
    if not section:
        return default
    merged = {**default.to_dict(), **section}
    merged.pop("covariance", None)
    return DecayParams(**{k: float(merged[k]) for k in _DECAY_KEYS})


def _visibility(section: dict | None) -> VisibilityPair:
    section = section or {}
    return VisibilityPair(float(section.get("v_hv", reference.V_HV)), float(section.get("v_da", reference.V_DA)))


def _settings(value):
    if value is None:
        return "HV"
    if isinstance(value, str):
        return value
    if isinstance(value, dict):
        return bell.ChshSettings.from_dict(value)
    raise ConfigError("sequence.settings must be a basis name or a CHSH settings object")


def _sequence(section: dict | None, decay: DecayParams, visib: VisibilityPair, seed: int) -> SequenceConfig:
    section = dict(section or {})
    settings = _settings(section.pop("settings", None))
    if "max_attempts" in section:
        section["max_attempts"] = int(section["max_attempts"])
    return SequenceConfig(decay=decay, visib=visib, settings=settings, seed=seed, **section)


def _seed(cfg: dict, args) -> int:
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    if not isinstance(seed, int) or not 0 <= seed < 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    return seed


def _report(command: str, cfg: dict, seed: int, body: dict) -> dict:
    return {"schema_version": SCHEMA_VERSION, "command": command, "config": cfg, "seed": seed, **body}


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _emit(text: str, out: Path | None, name: str) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text(text)


def cmd_model(cfg: dict, args) -> int:
    finesse = args.finesse if args.finesse is not None else cfg.get("memory", {}).get("finesse")
    if finesse is None:
        raise ConfigError("finesse is required (memory.finesse or --finesse)")
    finesse = float(finesse)
    sec = cfg.get("model", {})
    step = float(sec.get("r_sg_step", 0.001))
    lo = float(sec.get("r_sg_min", step))
    hi = float(sec.get("r_sg_max", 1.0 - step))
    if not 0 < lo <= hi < 1 or step <= 0:
        raise ConfigError("model grid must satisfy 0 < r_sg_min <= r_sg_max < 1 and r_sg_step > 0")
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    grid = np.round(lo + step * np.arange(n), 12)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["r_sg", "r_db", "slope_half", "slope_one"])
    for r in map(float, grid):
        w.writerow([repr(r), repr(memory.double_from_single(r, finesse)), repr(0.5 * r), repr(r)])
    _emit(buf.getvalue(), args.out, "model.csv")
    return EXIT_OK


def _load_dataset(cfg: dict, args, seed: int) -> fitter.DecayDataset:
    sec = cfg.get("fit", {})
    synthetic = args.synthetic or sec.get("synthetic")
    path = args.input or sec.get("input")
    if synthetic:
        params = {"dual": reference.DUAL_MODE_DECAY, "single": reference.SINGLE_MODE_DECAY}.get(synthetic)
        if params is None:
            raise ConfigError("fit.synthetic must be 'dual' or 'single'")
        t = fitter.log_times(float(sec.get("t_min", 0.005)), float(sec.get("t_max", 2000.0)), int(sec.get("n_points", 20)))
        sigma = float(sec.get("sigma", 0.01))
        rng = np.random.default_rng(seed) if sigma > 0 and not args.noiseless else None
        return fitter.synthesize(params, t, sigma, rng)
    if path is None:
        raise ConfigError("decay needs an input CSV (positional, fit.input) or --synthetic")
    try:
        return fitter.DecayDataset.from_csv(path)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed CSV {path}: {exc}") from exc


def cmd_decay(cfg: dict, args) -> int:
    seed = _seed(cfg, args)
    data = _load_dataset(cfg, args, seed)
    init_sec = cfg.get("fit", {}).get("init")
    init = _decay(init_sec, fitter.initial_guess(data)) if init_sec else fitter.initial_guess(data)
    try:
        result = fitter.fit_double_exponential(data, init)
    except fitter.FitError as exc:
        raise NumericalFailure(str(exc)) from exc
    p = result.params
    eta100 = memory.efficiency_at(100.0, p)
    body = {
        "n_points": len(data),
        "params": p.to_dict(),
        "errors": dict(zip(("A1", "A2", "tau1", "tau2"), p.errors.tolist())),
        "pinned": list(result.pinned),
        "initial_efficiency": p.initial,
        "lifetime_1e_ms": memory.one_over_e_lifetime(p),
        "efficiency_100ms": eta100,
        "chi2": result.chi2,
        "chi2_per_dof": result.reduced_chi2 if result.dof > 0 else None,
        "iterations": result.iterations,
        "converged": result.converged,
        "comparison": {
            "headline_efficiency_100ms": reference.HEADLINE_EFFICIENCY_100MS,
            "efficiency_100ms_discrepancy": eta100 - reference.HEADLINE_EFFICIENCY_100MS,
            "reported_lifetime_dual_ms": list(reference.LIFETIME_DUAL_MS),
            "reported_lifetime_single_ms": list(reference.LIFETIME_SINGLE_MS),
        },
    }
    if args.synthetic or cfg.get("fit", {}).get("synthetic"):
        body["dataset"] = {"t_ms": data.t.tolist(), "eta": data.eta.tolist(), "sigma": data.sigma.tolist()}
    report = _report("decay", cfg, seed, body)
    if not result.converged:
        raise NumericalFailure("fit did not converge within the iteration limit", partial=report)
    _emit(_dumps(report), args.out, "decay_report.json")
    return EXIT_OK


def _bell_state(cfg: dict, args) -> np.ndarray:
    sec = cfg.get("bell", {})
    if "state" in sec:
        st = sec["state"]
        try:
            rho = np.array(st["real"], dtype=float) + 1j * np.array(st.get("imag", np.zeros((4, 4))), dtype=float)
        except (KeyError, TypeError) as exc:
            raise ConfigError("bell.state needs 'real' (and optionally 'imag') 4x4 arrays") from exc
        return qstate.check_density_matrix(rho)
    if "noise" in cfg:
        noise = entangle.NoiseParams(**{k: float(v) for k, v in cfg["noise"].items()})
        return qstate.apply_noise(qstate.make_entangled_pair(0.0), noise)
    vis = dict(cfg.get("visibility", {}))
    if args.v_hv is not None:
        vis["v_hv"] = args.v_hv
    if args.v_da is not None:
        vis["v_da"] = args.v_da
    return entangle.state_at(0.0, _visibility(vis))


def cmd_bell(cfg: dict, args) -> int:
    seed = _seed(cfg, args)
    sec = cfg.get("bell", {})
    rho = _bell_state(cfg, args)
    opt = bell.optimal_chsh(rho)
    grid_step = float(sec.get("grid_step", 0.02))
    brute = bell.brute_force_chsh(rho, grid_step)
    vis = entangle.visibilities(rho)
    body = {
        "s_max": opt.s,
        "settings": opt.settings.to_dict(),
        "brute_force": {"grid_step": grid_step, "s": brute.s},
        "visibilities": {"v_hv": vis.v_hv, "v_da": vis.v_da, "v_rl": vis.v_rl},
        "fidelity_estimate": entangle.fidelity_estimate(vis.pair),
        "fidelity_exact": entangle.fidelity_exact(rho),
    }
    n_counts = args.mc_counts if args.mc_counts is not None else sec.get("mc_counts_per_setting")
    if n_counts:
        rng = np.random.default_rng(seed)
        counts = bell.simulate_chsh_counts(rho, opt.settings, int(n_counts), rng)
        res = bell.chsh_result_from_counts(counts, opt.settings)
        body["monte_carlo"] = {
            "counts_per_setting": int(n_counts),
            "counts": counts.tolist(),
            "s": res.s,
            "sigma_s": res.sigma_s,
            "significance": bell.violation_significance(res.s, res.sigma_s) if res.sigma_s > 0 else None,
        }
    s_in = args.s if args.s is not None else sec.get("s")
    sigma_in = args.sigma_s if args.sigma_s is not None else sec.get("sigma_s")
    if s_in is not None:
        if sigma_in is None:
            raise ConfigError("a measured S needs its sigma_s")
        body["measured"] = {
            "s": float(s_in),
            "sigma_s": float(sigma_in),
            "significance": bell.violation_significance(float(s_in), float(sigma_in)),
        }
    _emit(_dumps(_report("bell", cfg, seed, body)), args.out, "bell_report.json")
    return EXIT_OK


def cmd_simulate(cfg: dict, args) -> int:
    seed = _seed(cfg, args)
    trials = args.trials if args.trials is not None else cfg.get("trials", 10_000)
    if not isinstance(trials, int) or trials < 1:
        raise ConfigError("trials must be a positive integer")
    decay = _decay(cfg.get("decay"), reference.DUAL_MODE_DECAY)
    seq = _sequence(cfg.get("sequence"), decay, _visibility(cfg.get("visibility")), seed)
    log_ = sequencer.run_trials(seq, trials)
    table = sequencer.tally_coincidences(log_)
    rho = entangle.state_at(seq.storage_time, seq.visib)
    analytic = {}
    for lab, (a, b) in zip(table.labels, seq.setting_pairs()):
        analytic[lab] = abs(qstate.correlation(rho, a, b))
    summary = sequencer.summary(log_)
    summary["visibility_analytic"] = analytic
    summary["production_rate_expected_hz"] = sequencer.expected_production_rate(seq)
    summary["production_rate_with_loading_expected_hz"] = sequencer.expected_production_rate(seq, True)
    report = _report("simulate", cfg, seed, {"summary": summary, "sequence": seq.to_dict()})
    if args.out is None:
        sys.stdout.write(_dumps(report))
        return EXIT_OK
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "summary.json").write_text(_dumps(report))
    (args.out / "event_log.json").write_text(_dumps(log_.to_json()))
    (args.out / "coincidences.json").write_text(_dumps(table.to_json()))
    log_.write_csv(args.out / "trials.csv")
    return EXIT_OK


def _node(spec: dict | None, seed: int) -> swapnet.NodeSpec:
    spec = spec or {}
    if spec.get("ideal"):
        base = swapnet.ideal_node()
    else:
        base = swapnet.NodeSpec()
    decay = _decay(spec.get("decay"), base.decay)
    visib = _visibility({"v_hv": base.visib.v_hv, "v_da": base.visib.v_da, **spec.get("visibility", {})})
    seq_over = {k: getattr(base.seq, k) for k in _SEQ_KEYS - {"settings"}}
    seq_over.update(spec.get("sequence", {}))
    seq = _sequence(seq_over, decay, visib, seed)
    return swapnet.NodeSpec(
        decay=decay, visib=visib, seq=seq, link_transmission=float(spec.get("link_transmission", base.link_transmission))
    )


def cmd_swap(cfg: dict, args) -> int:
    seed = _seed(cfg, args)
    sec = cfg.get("swap", {})
    a = _node(sec.get("node_a"), seed)
    b = _node(sec.get("node_b"), seed)
    t_store = args.t_store if args.t_store is not None else float(sec.get("t_store", 0.005))
    outcome = swapnet.swap(
        a,
        b,
        t_store,
        bsm_efficiency=float(sec.get("bsm_efficiency", swapnet.LINEAR_OPTICS_BSM)),
        interference_visibility=float(sec.get("interference_visibility", 1.0)),
        outcome=sec.get("outcome", "psi-"),
        include_loading=bool(sec.get("include_loading", False)),
    )
    body = {
        "t_store_ms": t_store,
        "node_a": a.to_dict(),
        "node_b": b.to_dict(),
        "outcome": outcome.to_json(),
        "extension": True,
    }
    _emit(_dumps(_report("swap", cfg, seed, body)), args.out, "swap_report.json")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--seed", type=int, help="unsigned 64-bit seed")
    common.add_argument("--out", type=Path, help="output directory (default: stdout)")
    common.add_argument("--trials", type=int, help="number of simulated loading cycles")

    parser = argparse.ArgumentParser(prog="cavmem", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("model", parents=[common], help="dual- vs single-mode efficiency curve (CSV)")
    p.add_argument("--finesse", type=float)
    p.set_defaults(func=cmd_model)

    p = sub.add_parser("decay", parents=[common], help="fit a storage-decay dataset (JSON)")
    p.add_argument("input", nargs="?", help="CSV with columns t_ms,eta,sigma")
    p.add_argument("--synthetic", choices=["dual", "single"], help="synthesize data from the reported fit")
    p.add_argument("--noiseless", action="store_true", help="no noise on synthetic data")
    p.set_defaults(func=cmd_decay)

    p = sub.add_parser("bell", parents=[common], help="CHSH analysis (JSON)")
    p.add_argument("--v-hv", type=float)
    p.add_argument("--v-da", type=float)
    p.add_argument("--s", type=float, help="measured S value")
    p.add_argument("--sigma-s", type=float, help="uncertainty of the measured S")
    p.add_argument("--mc-counts", type=int, help="simulate this many coincidences per setting")
    p.set_defaults(func=cmd_bell)

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo of the experiment sequence")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("swap", parents=[common], help="two-node entanglement swapping (JSON)")
    p.add_argument("--t-store", type=float, help="storage time in ms")
    p.set_defaults(func=cmd_swap)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
        if args.out is None and cfg.get("out") is not None:
            args.out = Path(cfg["out"])
        return args.func(cfg, args)
    except NumericalFailure as exc:
        log.error("numerical failure: %s", exc)
        if exc.partial is not None:
            _emit(_dumps(exc.partial), args.out, f"{args.command}_report.partial.json")
        return EXIT_NUMERIC
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERIC
    except (ValueError, TypeError) as exc:
        log.error("invalid input: %s", exc)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

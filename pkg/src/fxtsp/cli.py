"""Command-line entry point: ``fxtsp <command> [options]``.

Every command prints a JSON document on stdout.  ``--out`` additionally
writes the command's main artifact (JSON, or CSV for simulate and sweep).
Option values come from flags, then the ``--config`` file, then defaults.

Exit status: 0 success, 1 bad input, 2 infeasible certificate,
3 integration failure, 4 oracle or monitor violations.
"""

import argparse
import json
import sys

import numpy as np

from . import certify as cert
from . import gradflow as gf
from . import highorder as ho
from . import oracle_suite, serialize, sim
from .errors import CapabilityError, ConfigError, FxtspError, IntegrationError

COMMANDS = ("certify", "simulate", "sweep", "check-inequalities", "monitor", "reproduce")
BUILTIN_SYSTEMS = ("gradflow", "highorder")
EXIT_VIOLATIONS = 4

DEFAULTS = {
    "system": "gradflow",
    "system_file": None,
    "eps": None,
    "theta": None,
    "mu": None,
    "q": None,
    "seed": sim.DEFAULT_SEED,
    "samples": None,
    "out": None,
    "magnitudes": [1.0, 10.0, 100.0, 1e3, 1e4, 1e6],
    "directions": 8,
    "rate_mode": False,
    "x0": None,
    "z0": None,
    "gradient": "as_written",
    "integrator": {},
}
CONFIG_FIELDS = frozenset(DEFAULTS) - {"system_file"}

SIM_EPS = 1e-3
GRADFLOW_MU = 0.1
GRADFLOW_X0 = (1.0, 1.0)
GRADFLOW_Z0 = (0.0, 0.0)
ORACLE_SAMPLES = 100_000
RATE_SAMPLES = 10_000

CONSTANT_FIELDS = ("k1", "k2", "a1", "a2", "kappa1", "kappa2", "b1", "b2",
                   "chi1", "delta1", "c1", "chi2", "delta2", "c2")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # argparse would exit with 2, which is reserved for infeasible certificates.
        raise ConfigError(f"usage error: {message}")


def _magnitudes(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of numbers, got {text!r}")


def _seed(text):
    try:
        return int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer seed, got {text!r}")


def build_parser():
    p = _Parser(prog="fxtsp", description="Fixed-time singular perturbation toolkit.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("system_file", nargs="?", default=None,
                   help="system JSON file when --system custom is used")
    p.add_argument("--system", default=None, help="gradflow, highorder, custom, or a path to a system JSON file")
    p.add_argument("--config", default=None, help="JSON file with option values")
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--theta", type=float, default=None)
    p.add_argument("--mu", type=float, default=None)
    p.add_argument("--q", type=float, default=None)
    p.add_argument("--seed", type=_seed, default=None)
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--magnitudes", type=_magnitudes, default=None)
    p.add_argument("--directions", type=int, default=None)
    p.add_argument("--rate-mode", dest="rate_mode", action="store_const", const=True, default=None)
    p.add_argument("--rel-tol", dest="rel_tol", type=float, default=None)
    p.add_argument("--abs-tol", dest="abs_tol", type=float, default=None)
    p.add_argument("--t-max", dest="t_max", type=float, default=None)
    return p


def _load_json(path, what):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {what} {path}: {exc.strerror}")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}")


def _reject_unknown(rec, allowed, where):
    if not isinstance(rec, dict):
        raise ConfigError(f"{where}: expected a JSON object")
    unknown = sorted(set(rec) - set(allowed))
    if unknown:
        raise ConfigError(f"{where}: unknown field(s) {', '.join(unknown)}; allowed: {', '.join(sorted(allowed))}")


def resolve_options(args):
    """Merge flags over the config file over defaults."""
    opts = {k: (dict(v) if isinstance(v, dict) else v) for k, v in DEFAULTS.items()}
    if args.config:
        rec = _load_json(args.config, "config")
        _reject_unknown(rec, CONFIG_FIELDS, args.config)
        integ = rec.get("integrator", {})
        _reject_unknown(integ, sim.IntegratorConfig.__dataclass_fields__, f"{args.config}: integrator")
        opts.update(rec)
    for key in ("system", "system_file", "eps", "theta", "mu", "q", "seed", "samples", "out",
                "magnitudes", "directions", "rate_mode"):
        v = getattr(args, key)
        if v is not None:
            opts[key] = v
    for key in ("rel_tol", "abs_tol", "t_max"):
        v = getattr(args, key)
        if v is not None:
            opts["integrator"][key] = v
    return opts


def _integrator_config(opts):
    return sim.IntegratorConfig(**opts["integrator"])


class SystemSpec:
    """A resolved ``--system``: a built-in benchmark or a constants-only certificate."""

    def __init__(self, kind, params=None, constants=None, theta=None):
        self.kind = kind
        self.params = params
        self.constants = constants
        self.theta = theta


def load_system(opts):
    name = opts["system"]
    if name in BUILTIN_SYSTEMS:
        raw = {}
        kind = name
        path = None
    else:
        path = opts["system_file"] if name == "custom" else name
        if not path:
            raise ConfigError("--system custom needs a system JSON file argument")
        raw = _load_json(path, "system file")
        if not isinstance(raw, dict) or "kind" not in raw:
            raise ConfigError(f"{path}: missing field 'kind' (constants, gradflow or highorder)")
        kind = raw["kind"]
    try:
        if kind == "constants":
            _reject_unknown(raw, set(CONSTANT_FIELDS) | {"kind", "theta"}, path)
            missing = [k for k in CONSTANT_FIELDS if k not in raw]
            if missing:
                raise ConfigError(f"{path}: missing field(s) {', '.join(missing)}")
            return SystemSpec("constants", constants={k: float(raw[k]) for k in CONSTANT_FIELDS},
                              theta=raw.get("theta"))
        if kind == "gradflow":
            if path:
                _reject_unknown(raw, {"kind", "params"}, path)
            return SystemSpec("gradflow", params=gf.GradFlowParams.from_record(raw.get("params", {})))
        if kind == "highorder":
            if path:
                _reject_unknown(raw, {"kind", "params"}, path)
            params = ho.HighOrderParams.from_record(raw.get("params", {}))
            if opts["mu"] is not None or opts["q"] is not None:
                rec = params.to_record()
                rec.update({k: opts[k] for k in ("mu", "q") if opts[k] is not None})
                params = ho.HighOrderParams.from_record(rec)
            return SystemSpec("highorder", params=params)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, FxtspError):
            raise
        raise ConfigError(f"{path}: {exc}")
    raise ConfigError(f"unknown system kind {kind!r}")


def certificate_parts(spec, opts):
    """(model or None, reduced cert, boundary cert, interconnection bounds)."""
    if spec.kind == "constants":
        c = spec.constants
        rc = cert.PowerLawCertificate(c["k1"], c["k2"], c["a1"], c["a2"])
        bc = cert.BoundaryCertificate(c["kappa1"], c["kappa2"], c["b1"], c["b2"])
        bounds = cert.InterconnectionBounds(*(c[k] for k in ("chi1", "delta1", "c1", "chi2", "delta2", "c2")))
        return None, rc, bc, bounds
    if spec.kind == "gradflow":
        p = spec.params
        model = gf.build_system(p)
        rc = gf.reduced_certificate(p, opts["gradient"])
        bc = gf.boundary_certificate(p, opts["gradient"])
        mu = GRADFLOW_MU if opts["mu"] is None else opts["mu"]
        return model, rc, bc, gf.interconnection_bounds(p, mu, q=opts["q"])
    model = ho.build_system(spec.params)
    rc, bc = ho.certificates(spec.params)
    return model, rc, bc, ho.interconnection_bounds(spec.params)


def _theta(spec, opts):
    return opts["theta"] if opts["theta"] is not None else spec.theta


def _model(spec):
    if spec.kind == "gradflow":
        return gf.build_system(spec.params)
    if spec.kind == "highorder":
        return ho.build_system(spec.params)
    raise CapabilityError("a constants-only system has no vector field to simulate")


def _initial_state(spec, opts):
    if spec.kind == "highorder":
        x0, z0 = ho.REFERENCE_X0, ho.REFERENCE_Z0
    else:
        n = spec.params.dim
        x0 = GRADFLOW_X0 if n == 2 else (1.0,) * n
        z0 = GRADFLOW_Z0 if n == 2 else (0.0,) * n
    x0 = opts["x0"] if opts["x0"] is not None else x0
    z0 = opts["z0"] if opts["z0"] is not None else z0
    return np.asarray(x0, dtype=float), np.asarray(z0, dtype=float)


def _sim_eps(opts):
    return SIM_EPS if opts["eps"] is None else opts["eps"]


def cmd_certify(spec, opts):
    _, rc, bc, bounds = certificate_parts(spec, opts)
    c = cert.certify(rc, bc, bounds, theta=_theta(spec, opts), eps=opts["eps"])
    rec = c.to_record()
    return rec, serialize.dumps(rec), 0


def cmd_simulate(spec, opts):
    model = _model(spec)
    cfg = _integrator_config(opts)
    eps = _sim_eps(opts)
    x0, z0 = _initial_state(spec, opts)
    traj = sim.integrate(model, eps, x0, z0, cfg)
    summary = {
        "system": spec.kind, "eps": eps, "x0": x0, "z0": z0, "integrator": cfg.to_record(),
        "settle_time": traj.settle_time, "steps": traj.steps, "step_rejections": traj.step_rejections,
        "samples": len(traj.times), "final_time": traj.times[-1], "final_state": traj.states[-1],
    }
    return summary, serialize.trajectory_csv(traj), 0


def cmd_sweep(spec, opts):
    model = _model(spec)
    cfg = _integrator_config(opts)
    eps = _sim_eps(opts)
    table = sim.sweep(model, eps, opts["magnitudes"], int(opts["directions"]), cfg, seed=opts["seed"])
    failures = [{"magnitude": m, "direction_index": j, "error": e} for m, j, _, e in table["rows"] if e]
    summary = {
        "system": spec.kind, "eps": eps, "seed": opts["seed"], "directions": int(opts["directions"]),
        "max_by_magnitude": [{"magnitude": m, "max_settle_time": v} for m, v in table["max_by_magnitude"].items()],
        "failures": failures,
    }
    return summary, serialize.sweep_csv(table), (IntegrationError.exit_code if failures else 0)


def cmd_check_inequalities(spec, opts):
    samples = ORACLE_SAMPLES if opts["samples"] is None else int(opts["samples"])
    report = oracle_suite.run_suite(samples=samples, seed=opts["seed"])
    return report, serialize.dumps(report), (EXIT_VIOLATIONS if report["total_violations"] else 0)


def cmd_monitor(spec, opts):
    model, rc, bc, bounds = certificate_parts(spec, opts)
    if model is None:
        raise CapabilityError("monitoring needs a built-in system")
    theta = _theta(spec, opts)
    if opts["rate_mode"]:
        # Pointwise check at sampled states, at an eps covered by the certificate.
        c = cert.certify(rc, bc, bounds, theta=theta, eps=opts["eps"])
        samples = RATE_SAMPLES if opts["samples"] is None else int(opts["samples"])
        x, y = sim.random_states(model, samples, seed=opts["seed"])
        rep = sim.decrease_report(model, rc, bc, c.theta, c.gamma1, c.gamma2, c.lambda_min, c.eps_ref, x, y)
        report = {"mode": "rate", "eps": c.eps_ref, "theta": c.theta, "lambda_min": c.lambda_min,
                  "seed": opts["seed"], **rep}
    else:
        c = cert.certify(rc, bc, bounds, theta=theta)
        eps = _sim_eps(opts)
        cfg = _integrator_config(opts)
        x0, z0 = _initial_state(spec, opts)
        traj = sim.integrate(model, eps, x0, z0, cfg)
        rep = sim.monitor_lyapunov(model, rc, bc, c.theta, c.gamma1, c.gamma2, c.lambda_min, traj, eps=eps)
        report = {"mode": "monotonicity", "eps": eps, "theta": c.theta, "certified": eps < c.eps_star,
                  "settle_time": traj.settle_time, **rep}
    return report, serialize.dumps(report), (EXIT_VIOLATIONS if report["violations"] else 0)


def cmd_reproduce(spec, opts):
    if spec.kind == "gradflow":
        kwargs = {k: opts[k] for k in ("mu", "q", "theta") if opts[k] is not None}
        rec = gf.reproduce_reference_example(**kwargs)
    elif spec.kind == "highorder":
        rec = ho.reproduce_reference_example(cfg=_integrator_config(opts), theta=opts["theta"])
    else:
        raise CapabilityError("reproduce is defined for the gradflow and highorder systems only")
    return rec, serialize.dumps(rec), 0


HANDLERS = {
    "certify": cmd_certify,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "check-inequalities": cmd_check_inequalities,
    "monitor": cmd_monitor,
    "reproduce": cmd_reproduce,
}


def run(argv=None, stdout=None, stderr=None):
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        args = build_parser().parse_intermixed_args(argv)
        opts = resolve_options(args)
        spec = load_system(opts) if args.command != "check-inequalities" else None
        summary, artifact, status = HANDLERS[args.command](spec, opts)
    except FxtspError as exc:
        stderr.write(f"fxtsp: error: {exc}\n")
        return exc.exit_code
    except (ValueError, TypeError) as exc:
        stderr.write(f"fxtsp: error: {exc}\n")
        return ConfigError.exit_code
    if opts["out"]:
        serialize.write_text(opts["out"], artifact)
    stdout.write(serialize.dumps(summary))
    return status


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()

"""Command-line entry point.

Subcommands: ``trial``, ``sweep``, ``nstar``, ``verify-bounds``,
``verify-separation``, ``bounds-eval`` and ``generate``. Configuration
comes from an INI-style file with sections; unknown sections or keys are
hard errors so that typos cannot silently change an experiment. Every CSV
artifact starts with a ``#``-prefixed block echoing the fully resolved
configuration.

Exit codes: 0 success, 1 verification failure, 2 configuration error,
3 I/O failure.
"""

from __future__ import annotations

import argparse
import configparser
import math
import sys
from pathlib import Path

from . import montecarlo
from .bounds import (
    BoundConstants,
    chisq_cube_central_moment_bound,
    chisq_mean_lower_tail,
    chisq_mean_upper_tail,
    max_sq_norm_tail,
    norm4_mean_tail,
    norm6_mean_tail,
    rosenthal_sum_moment,
    sample_complexity_upper,
)
from .model import ConfigError, ProblemConfig, generate_instance, save_instance

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_CONFIG = 2
EXIT_IO = 3


def _parse_int(raw: str) -> int:
    return int(raw.strip())


def _parse_float(raw: str) -> float:
    return float(raw.strip())


def _parse_str(raw: str) -> str:
    return raw.strip()


def _parse_int_list(raw: str) -> tuple[int, ...]:
    return tuple(int(tok) for tok in raw.replace(",", " ").split())


def _parse_float_list(raw: str) -> tuple[float, ...]:
    return tuple(float(tok) for tok in raw.replace(",", " ").split())


def _parse_str_list(raw: str) -> tuple[str, ...]:
    return tuple(tok for tok in raw.replace(",", " ").split())


_SCHEMA = {
    "problem": {
        "d": _parse_int,
        "k": _parse_int,
        "m": _parse_int,
        "n": _parse_int,
        "x_min": _parse_float,
        "x_max": _parse_float,
        "sigma2": _parse_float,
        "signal_mode": _parse_str,
        "support_mode": _parse_str,
        "support_indices": _parse_int_list,
        "signal_values": _parse_float_list,
        "seed": _parse_int,
    },
    "experiment": {
        "delta": _parse_float,
        "trials": _parse_int,
        "n_max": _parse_int,
    },
    "sweep": {
        "m_list": _parse_int_list,
        "slope_window": _parse_float_list,
    },
    "constants": {
        "c_heavy": _parse_float,
        "c_sample": _parse_float,
        "rosenthal_c": _parse_float,
    },
    "verify_bounds": {
        "lemmas": _parse_str_list,
        "n_list": _parse_int_list,
        "m_list": _parse_int_list,
        "t_grid": _parse_float_list,
        "mu_list": _parse_float_list,
        "replications": _parse_int,
    },
}


def load_config_file(path: str) -> dict[str, dict[str, object]]:
    """Parse and validate the INI config; unknown keys are hard errors."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        with open(path, "r", encoding="utf-8") as fh:
            parser.read_file(fh, source=path)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    values: dict[str, dict[str, object]] = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        values[section] = {}
        for key, raw in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown config key {section}.{key}")
            try:
                values[section][key] = _SCHEMA[section][key](raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for {section}.{key}: {raw!r} ({exc})") from exc
    return values


def _require(values, section: str, key: str):
    try:
        return values[section][key]
    except KeyError:
        raise ConfigError(f"missing required config key {section}.{key}") from None


def _problem_config(values, seed_override: int | None, require_n: bool = True) -> ProblemConfig:
    sect = values.get("problem", {})
    for key in ("d", "k", "m") + (("n",) if require_n else ()):
        if key not in sect:
            raise ConfigError(f"missing required config key problem.{key}")
    kwargs = dict(sect)
    if not require_n:
        kwargs.setdefault("n", 1)
    if seed_override is not None:
        kwargs["seed"] = seed_override
    return ProblemConfig(**kwargs)


def _delta(values) -> float:
    delta = _require(values, "experiment", "delta")
    if not (0.0 < delta < 1.0):
        raise ConfigError(f"experiment.delta must lie in (0, 1), got {delta}")
    return delta


def _trials(values) -> int:
    trials = _require(values, "experiment", "trials")
    if trials < 1:
        raise ConfigError(f"experiment.trials must be positive, got {trials}")
    return trials


def _constants(values) -> BoundConstants:
    sect = values.get("constants", {})
    try:
        return BoundConstants(**sect)
    except ValueError as exc:
        raise ConfigError(f"constants: {exc}") from exc


def fmt_real(x: float) -> str:
    """Locale-independent, round-trippable real formatting."""
    return "%.17g" % float(x)


def _fmt_value(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return fmt_real(value)
    if isinstance(value, (tuple, list)):
        return ",".join(_fmt_value(v) for v in value)
    if value is None:
        return ""
    return str(value)


class _Output:
    """A CSV sink: a file path or standard output."""

    def __init__(self, path: str | None, to_stdout: bool):
        if to_stdout and path:
            raise ConfigError("choose either --out or --stdout, not both")
        if not to_stdout and not path:
            raise ConfigError("an output is required: pass --out PATH or --stdout")
        self.path = path
        self.to_stdout = to_stdout

    def write_lines(self, lines) -> None:
        text = "\n".join(lines) + "\n"
        if self.to_stdout:
            sys.stdout.write(text)
        else:
            with open(self.path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)

    def sibling(self, suffix: str) -> "_Output":
        if self.to_stdout:
            return self
        p = Path(self.path)
        return _Output(str(p.with_name(p.stem + suffix + p.suffix)), False)


def _config_echo(resolved: dict[str, object]) -> list[str]:
    lines = ["# resolved-config"]
    for key, value in resolved.items():
        lines.append(f"# {key} = {_fmt_value(value)}")
    return lines


def _echo_problem(cfg: ProblemConfig, include_n: bool = True) -> dict[str, object]:
    out = {
        "problem.d": cfg.d,
        "problem.k": cfg.k,
        "problem.m": cfg.m,
    }
    if include_n:
        out["problem.n"] = cfg.n
    out.update(
        {
            "problem.x_min": cfg.x_min,
            "problem.x_max": cfg.x_max,
            "problem.sigma2": cfg.sigma2,
            "problem.signal_mode": cfg.signal_mode.value,
            "problem.support_mode": cfg.support_mode.value,
            "problem.support_indices": cfg.support_indices,
            "problem.signal_values": cfg.signal_values,
            "problem.seed": cfg.seed,
        }
    )
    return out


def _progress(message: str) -> None:
    print(message, file=sys.stderr, flush=True)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_trial(args) -> int:
    values = load_config_file(args.config)
    cfg = _problem_config(values, args.seed)
    trials = _trials(values)
    est = montecarlo.estimate_success(cfg, trials, args.threads)
    resolved = _echo_problem(cfg)
    resolved["experiment.trials"] = trials
    header = "d,k,m,n,sigma2,x_min,x_max,signal_mode,trials,successes,rate,ci_low,ci_high,master_seed"
    row = ",".join(
        [
            str(cfg.d),
            str(cfg.k),
            str(cfg.m),
            str(cfg.n),
            fmt_real(cfg.sigma2),
            fmt_real(cfg.x_min),
            fmt_real(cfg.x_max),
            cfg.signal_mode.value,
            str(est.trials),
            str(est.successes),
            fmt_real(est.rate),
            fmt_real(est.ci_low),
            fmt_real(est.ci_high),
            str(cfg.seed),
        ]
    )
    _Output(args.out, args.stdout).write_lines(_config_echo(resolved) + [header, row])
    return EXIT_OK


def cmd_nstar(args) -> int:
    values = load_config_file(args.config)
    cfg = _problem_config(values, args.seed, require_n=False)
    delta = _delta(values)
    trials = _trials(values)
    n_max = values.get("experiment", {}).get("n_max", 100_000)
    res = montecarlo.find_nstar(cfg, delta, trials, n_max, args.threads, progress=_progress)
    resolved = _echo_problem(cfg, include_n=False)
    resolved.update(
        {"experiment.delta": delta, "experiment.trials": trials, "experiment.n_max": n_max}
    )
    header = "d,k,m,delta,nstar,found,trials,last_rate,master_seed"
    row = ",".join(
        [
            str(cfg.d),
            str(cfg.k),
            str(cfg.m),
            fmt_real(delta),
            "" if res.nstar is None else str(res.nstar),
            "1" if res.found else "0",
            str(trials),
            fmt_real(res.last_rate),
            str(cfg.seed),
        ]
    )
    _Output(args.out, args.stdout).write_lines(_config_echo(resolved) + [header, row])
    return EXIT_OK


def cmd_sweep(args) -> int:
    values = load_config_file(args.config)
    m_list = _require(values, "sweep", "m_list")
    if not m_list:
        raise ConfigError("sweep.m_list must be nonempty")
    window = values.get("sweep", {}).get("slope_window", (0.0, math.inf))
    if len(window) != 2 or window[0] > window[1]:
        raise ConfigError(f"sweep.slope_window must be 'low,high', got {window}")
    base_values = dict(values)
    if "m" not in values.get("problem", {}):
        base_values = {**values, "problem": {**values.get("problem", {}), "m": int(m_list[0])}}
    cfg = _problem_config(base_values, args.seed, require_n=False)
    delta = _delta(values)
    trials = _trials(values)
    n_max = values.get("experiment", {}).get("n_max", 100_000)
    records = montecarlo.sweep_phase_transition(
        cfg, m_list, delta, trials, n_max, args.threads, progress=_progress
    )
    resolved = _echo_problem(cfg, include_n=False)
    del resolved["problem.m"]  # swept below
    resolved.update(
        {
            "experiment.delta": delta,
            "experiment.trials": trials,
            "experiment.n_max": n_max,
            "sweep.m_list": m_list,
            "sweep.slope_window": window,
        }
    )
    header = "d,k,m,k_over_m,delta,nstar,found,trials,master_seed"
    lines = _config_echo(resolved) + [header]
    for rec in records:
        lines.append(
            ",".join(
                [
                    str(rec.d),
                    str(rec.k),
                    str(rec.m),
                    "%.6f" % (rec.k / rec.m),
                    fmt_real(rec.delta),
                    "" if rec.nstar is None else str(rec.nstar),
                    "1" if rec.found else "0",
                    str(rec.trials),
                    str(rec.master_seed),
                ]
            )
        )
    out = _Output(args.out, args.stdout)
    out.write_lines(lines)
    summary_header = "window_low,window_high,points,slope,intercept"
    try:
        fit = montecarlo.fit_loglog_slope(records, tuple(window))
        summary_row = ",".join(
            [
                fmt_real(window[0]),
                fmt_real(window[1]),
                str(fit.points),
                fmt_real(fit.slope),
                fmt_real(fit.intercept),
            ]
        )
    except ValueError:
        summary_row = ",".join([fmt_real(window[0]), fmt_real(window[1]), "0", "", ""])
    summary_lines = [summary_header, summary_row]
    if out.to_stdout:
        sys.stdout.write("\n" + "\n".join(summary_lines) + "\n")
    else:
        out.sibling("_summary").write_lines(summary_lines)
    return EXIT_OK


_DEFAULT_LEMMAS = ("heavy_q2", "heavy_q3", "max_chisq", "chisq_lower", "chisq_upper")


def cmd_verify_bounds(args) -> int:
    values = load_config_file(args.config)
    sect = values.get("verify_bounds", {})
    lemmas = sect.get("lemmas", _DEFAULT_LEMMAS)
    for lemma in lemmas:
        if lemma not in montecarlo.BOUND_SELECTORS:
            raise ConfigError(
                f"verify_bounds.lemmas: unknown selector {lemma!r}; "
                f"valid: {', '.join(montecarlo.BOUND_SELECTORS)}"
            )
    n_list = sect.get("n_list", (10, 100))
    m_list = sect.get("m_list", (4, 16))
    t_grid = sect.get("t_grid", (0.1, 0.3, 1.0))
    mu_list = sect.get("mu_list", (0.0, 1.0))
    replications = sect.get("replications", 100_000)
    constants = _constants(values)
    seed = args.seed if args.seed is not None else values.get("problem", {}).get("seed", 0)
    resolved = {
        "problem.seed": seed,
        "verify_bounds.lemmas": lemmas,
        "verify_bounds.n_list": n_list,
        "verify_bounds.m_list": m_list,
        "verify_bounds.t_grid": t_grid,
        "verify_bounds.mu_list": mu_list,
        "verify_bounds.replications": replications,
        "constants.c_heavy": constants.c_heavy,
        "constants.c_sample": constants.c_sample,
        "constants.rosenthal_c": constants.rosenthal_c,
    }
    lines = _config_echo(resolved) + ["lemma,n,m,t,empirical,std_err,analytic,pass"]
    all_ok = True
    index = 0
    for lemma in lemmas:
        stat, side = montecarlo.selector_requirements(lemma)
        if stat == "noncentral_mean":
            probes = [
                montecarlo.TailProbe(
                    stat,
                    n=n,
                    t_grid=t_grid,
                    replications=replications,
                    side=side,
                    mu=(mu,) * n,
                    sigma2=(1.0,) * n,
                )
                for n in n_list
                for mu in mu_list
            ]
        else:
            probes = [
                montecarlo.TailProbe(stat, n=n, m=m, t_grid=t_grid, replications=replications)
                for n in n_list
                for m in m_list
            ]
        for probe in probes:
            report = montecarlo.verify_bound(
                probe, lemma, constants, montecarlo.derive_probe_seed(seed, index)
            )
            index += 1
            all_ok = all_ok and report.passed
            for row in report.rows:
                lines.append(
                    ",".join(
                        [
                            lemma,
                            str(probe.n),
                            str(probe.m),
                            fmt_real(row.t),
                            fmt_real(row.empirical),
                            fmt_real(row.std_err),
                            fmt_real(row.analytic),
                            "1" if row.ok else "0",
                        ]
                    )
                )
    _Output(args.out, args.stdout).write_lines(lines)
    return EXIT_OK if all_ok else EXIT_VERIFY_FAILED


def cmd_verify_separation(args) -> int:
    values = load_config_file(args.config)
    cfg = _problem_config(values, args.seed)
    delta = _delta(values)
    trials = _trials(values)
    summary = montecarlo.verify_separation(cfg, delta, trials, args.threads)
    resolved = _echo_problem(cfg)
    resolved.update({"experiment.delta": delta, "experiment.trials": trials})
    header = "d,k,m,n,delta,instances,satisfied,fraction,master_seed"
    row = ",".join(
        [
            str(cfg.d),
            str(cfg.k),
            str(cfg.m),
            str(cfg.n),
            fmt_real(delta),
            str(summary.instances),
            str(summary.satisfied),
            fmt_real(summary.fraction),
            str(cfg.seed),
        ]
    )
    _Output(args.out, args.stdout).write_lines(_config_echo(resolved) + [header, row])
    return EXIT_OK if summary.fraction >= 1.0 - delta else EXIT_VERIFY_FAILED


def _kv_args(tokens) -> dict[str, str]:
    out = {}
    for token in tokens:
        if "=" not in token:
            raise ConfigError(f"bounds-eval arguments must look like key=value, got {token!r}")
        key, _, value = token.partition("=")
        out[key.strip()] = value.strip()
    return out


def _kv_get(kv, key, parse, default=None):
    if key not in kv:
        if default is None:
            raise ConfigError(f"missing argument {key}=...")
        return default
    try:
        return parse(kv.pop(key))
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {exc}") from exc


_BOUND_NAMES = (
    "sample_complexity_upper",
    "chisq_lower_tail",
    "chisq_upper_tail",
    "heavy_q2",
    "heavy_q3",
    "max_chisq",
    "rosenthal",
    "chisq_cube_moment",
)


def cmd_bounds_eval(args) -> int:
    name = args.name
    if name not in _BOUND_NAMES:
        raise ConfigError(f"unknown bound {name!r}; valid names: {', '.join(_BOUND_NAMES)}")
    kv = _kv_args(args.params)
    flag = ""
    if name == "sample_complexity_upper":
        k = _kv_get(kv, "k", _parse_int)
        m = _kv_get(kv, "m", _parse_int)
        d = _kv_get(kv, "d", _parse_int)
        delta = _kv_get(kv, "delta", _parse_float)
        x_min = _kv_get(kv, "x_min", _parse_float, 1.0)
        x_max = _kv_get(kv, "x_max", _parse_float, 1.0)
        sigma2 = _kv_get(kv, "sigma2", _parse_float, 0.0)
        c = _kv_get(kv, "c_sample", _parse_float, 1.0)
        result = sample_complexity_upper(
            k, m, d, delta, x_min, x_max, sigma2, BoundConstants(c_sample=c)
        )
        value = str(result.n)
        flag = "" if result.in_regime else "below_measurement_regime"
    elif name in ("chisq_lower_tail", "chisq_upper_tail"):
        n = _kv_get(kv, "n", _parse_int)
        sigma = _kv_get(kv, "sigma", _parse_float_list, (1.0,))
        mu = _kv_get(kv, "mu", _parse_float_list, (0.0,))
        t = _kv_get(kv, "t", _parse_float)
        sigma2 = tuple(s * s for s in sigma) * (n if len(sigma) == 1 else 1)
        mus = tuple(mu) * (n if len(mu) == 1 else 1)
        if len(sigma2) != n or len(mus) != n:
            raise ConfigError("sigma and mu must be scalars or length-n lists")
        fn = chisq_mean_lower_tail if name == "chisq_lower_tail" else chisq_mean_upper_tail
        value = fmt_real(fn(mus, sigma2, t))
    elif name in ("heavy_q2", "heavy_q3"):
        n = _kv_get(kv, "n", _parse_int, 1)
        m = _kv_get(kv, "m", _parse_int, 1)
        t = _kv_get(kv, "t", _parse_float)
        c = _kv_get(kv, "c_heavy", _parse_float, 1.0)
        fn = norm4_mean_tail if name == "heavy_q2" else norm6_mean_tail
        value = fmt_real(fn(n, m, t, BoundConstants(c_heavy=c)))
    elif name == "max_chisq":
        n = _kv_get(kv, "n", _parse_int)
        m = _kv_get(kv, "m", _parse_int)
        mu_max = _kv_get(kv, "mu_max", _parse_float)
        t = _kv_get(kv, "t", _parse_float)
        value = fmt_real(max_sq_norm_tail(n, m, mu_max, t))
    elif name == "rosenthal":
        p = _kv_get(kv, "p", _parse_float)
        n = _kv_get(kv, "n", _parse_int)
        lp = _kv_get(kv, "lp_norm", _parse_float)
        l2 = _kv_get(kv, "l2_norm", _parse_float)
        c = _kv_get(kv, "rosenthal_c", _parse_float, 1.0)
        value = fmt_real(rosenthal_sum_moment(p, n, lp, l2, BoundConstants(rosenthal_c=c)))
    else:  # chisq_cube_moment
        p = _kv_get(kv, "p", _parse_float)
        m = _kv_get(kv, "m", _parse_int)
        value = fmt_real(chisq_cube_central_moment_bound(p, m))
    if kv:
        raise ConfigError(f"unknown arguments for {name}: {', '.join(sorted(kv))}")
    arg_text = " ".join(args.params)
    resolved = {"bounds_eval.name": name, "bounds_eval.args": arg_text}
    lines = _config_echo(resolved) + ["name,args,value,flag", f"{name},{arg_text},{value},{flag}"]
    _Output(args.out, args.stdout or args.out is None).write_lines(lines)
    return EXIT_OK


def cmd_generate(args) -> int:
    values = load_config_file(args.config)
    cfg = _problem_config(values, args.seed)
    if args.stdout or not args.out:
        raise ConfigError("generate writes a binary dump; pass --out PATH")
    instance = generate_instance(cfg)
    save_instance(instance, args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Argument parsing and dispatch
# ---------------------------------------------------------------------------


def _add_common(sub, config_required=True):
    if config_required:
        sub.add_argument("--config", required=True, help="path to the INI config file")
    sub.add_argument("--out", help="output path")
    sub.add_argument("--stdout", action="store_true", help="write machine output to stdout")
    sub.add_argument("--seed", type=int, default=None, help="override the master seed")
    sub.add_argument(
        "--threads", type=int, default=0, help="worker count; 0 = auto (never changes results)"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="supprec",
        description="Support recovery experiments: trials, sweeps, and bound verification.",
    )
    subs = parser.add_subparsers(dest="command", required=True)
    for name, fn in (
        ("trial", cmd_trial),
        ("nstar", cmd_nstar),
        ("sweep", cmd_sweep),
        ("verify-bounds", cmd_verify_bounds),
        ("verify-separation", cmd_verify_separation),
        ("generate", cmd_generate),
    ):
        sub = subs.add_parser(name)
        _add_common(sub)
        sub.set_defaults(fn=fn)
    be = subs.add_parser("bounds-eval")
    be.add_argument("name", help="bound name, e.g. sample_complexity_upper")
    be.add_argument("params", nargs="*", help="key=value arguments")
    be.add_argument("--out", help="output path (default stdout)")
    be.add_argument("--stdout", action="store_true")
    be.set_defaults(fn=cmd_bounds_eval, seed=None, threads=0, config=None)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()

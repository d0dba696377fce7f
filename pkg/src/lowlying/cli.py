"""Command-line front end: verification suites and table output.

Subcommands: verify-petersson, bessel-check, density, averaged-density,
expansion, constants.  Flags override the JSON config file.  CSV output is
comma separated with a header row, LF line endings and 15 significant digits.
When --out is given, a PNG figure is written next to the CSV.

Exit codes: 0 success, 1 a check failed, 2 configuration error, 3 budget exceeded.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import plotting
from .density import BudgetExceeded

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_BUDGET = 0, 1, 2, 3
COMMANDS = ("verify-petersson", "bessel-check", "density", "averaged-density", "expansion", "constants")
IDENTITY_TOL = 1e-6
OMEGA_BAND_MIN_K = 4 * math.pi * math.e  # the 2^-k regime starts at k > 4 pi e
EXPANSION_TOL = 0.05

DEFAULT_K = {
    "verify-petersson": [12, 16, 18, 20, 22, 24, 26, 28],
    "density": list(range(12, 62, 2)),
}
DEFAULT_BIG_K = {
    "bessel-check": [20, 40, 80, 160],
    "averaged-density": [100, 200, 400],
    "expansion": [100, 200, 400],
}
DEFAULT_SIGMA = {"density": 0.8, "averaged-density": 1.4, "expansion": 1.4}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    precision: int = 30
    prime_limit: int = 10**7
    K: list = field(default_factory=list)
    k: list = field(default_factory=list)
    sigma: float | None = None
    family: str = "smoothed_bump"
    h_support: list = field(default_factory=lambda: [1.0, 2.0])
    J: int = 3
    signs: list = field(default_factory=lambda: ["+", "-", "mixed"])
    m_max: int = 20
    samples: int = 10_000
    seed: int = 0
    out: str | None = None
    cache: str | None = None
    threads: int = 1
    format: str = "csv"
    plot: bool = True

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if not 5 <= self.precision <= 200:
            raise ConfigError("precision must be in 5..200 digits")
        if self.prime_limit < 1000:
            raise ConfigError("prime_limit must be >= 1000")
        if any((not isinstance(k, int)) or k < 4 or k % 2 for k in self.k):
            raise ConfigError("weights k must be even integers >= 4")
        if any(float(K) < 2 for K in self.K):
            raise ConfigError("K values must be >= 2")
        if self.sigma is not None and not self.sigma > 0:
            raise ConfigError("sigma must be positive")
        if self.family not in ("fejer", "smoothed_bump"):
            raise ConfigError("family must be 'fejer' or 'smoothed_bump'")
        if len(self.h_support) != 2 or not 0 < self.h_support[0] < self.h_support[1]:
            raise ConfigError("h_support must be [a, b] with 0 < a < b")
        if not 1 <= self.J <= 4:
            raise ConfigError("J must be in 1..4")
        if any(s not in ("+", "-", "mixed") for s in self.signs):
            raise ConfigError("signs must be drawn from '+', '-', 'mixed'")
        if self.m_max < 1 or self.samples < 1 or self.threads < 1:
            raise ConfigError("m_max, samples and threads must be positive")
        if self.format not in ("csv", "json"):
            raise ConfigError("format must be 'csv' or 'json'")

    def weight(self):
        from .testfn import WeightFunction

        return WeightFunction(tuple(self.h_support))

    def test_function(self):
        from .testfn import make_test_function

        return make_test_function(self.family, self.sigma)


CONFIG_KEYS = {f.name for f in fields(RunConfig)} - {"command"}


def load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config file must hold a JSON object")
    unknown = set(doc) - CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return doc


def build_config(args: argparse.Namespace) -> RunConfig:
    values = load_config_file(args.config)
    for key in ("precision", "threads", "out", "cache", "format", "sigma", "J", "m_max", "samples", "seed"):
        val = getattr(args, key, None)
        if val is not None:
            values[key] = val
    if args.k is not None:
        values["k"] = args.k
    if args.K is not None:
        values["K"] = args.K
    if args.signs is not None:
        values["signs"] = args.signs
    if args.no_plot:
        values["plot"] = False
    cmd = args.command
    values.setdefault("k", list(DEFAULT_K.get(cmd, [])))
    values.setdefault("K", list(DEFAULT_BIG_K.get(cmd, [])))
    if values.get("sigma") is None:
        values["sigma"] = DEFAULT_SIGMA.get(cmd)
    try:
        cfg = RunConfig(command=cmd, **values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    cfg.validate()
    return cfg


# ---------------------------------------------------------------------------
# output


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.15g}"
    return str(v)


def rows_to_csv(rows: list[dict], columns: list[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r.get(c)) for c in columns])
    return buf.getvalue()


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return float(f"{float(v):.15g}")
    return v


def emit(cfg: RunConfig, rows: list[dict], columns: list[str], extra: dict | None = None) -> None:
    """Write the report to --out (or stdout); --out also gets a figure."""
    if cfg.format == "json":
        doc = {"command": cfg.command, "columns": columns,
               "rows": [{c: _jsonable(r.get(c)) for c in columns} for r in rows]}
        if extra:
            doc.update(_jsonable(extra))
        text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    else:
        text = rows_to_csv(rows, columns)
    if cfg.out is None:
        sys.stdout.write(text)
        return
    Path(cfg.out).write_text(text, encoding="utf-8", newline="\n")
    if cfg.plot and cfg.format == "csv":
        plotting.render(cfg.command, rows, cfg.out)


def side_path(out: str | None, suffix: str) -> Path | None:
    if out is None:
        return None
    p = Path(out)
    return p.with_name(p.stem + suffix + ".csv")


def _pool_map(fn, items, threads: int):
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# verify-petersson


def _petersson_row(job) -> tuple[dict, list]:
    from .modforms import cusp_dimension, eigen_basis
    from .petersson import (exponential_majorant, exponential_regime_pairs, identity_residuals, omega_total,
                            petersson_error_survey, petersson_rhs)

    k, m_max, precision, cache = job
    d = cusp_dimension(k)
    omega = float(omega_total(k, 1e-30, max(precision, 40)))
    band = abs(omega - 1) <= 10 * 2.0 ** (-k)
    row = {"k": k, "dimension": d, "omega": omega, "omega_minus_1": omega - 1, "omega_band": band,
           "band_asserted": k >= OMEGA_BAND_MIN_K}
    if d == 0:
        row.update(status="empty space", max_identity_residual=0.0, max_tail_bound=0.0,
                   exp_regime_pairs=0, exp_regime_max_ratio=0.0)
        return row, []
    basis = eigen_basis(k, max(50, m_max), precision, cache_dir=cache)
    res = identity_residuals(k, m_max, basis)
    row["max_identity_residual"] = max(v[0] for v in res.values())
    row["max_tail_bound"] = max(v[1].tail_bound for v in res.values())
    ratios = []
    for m, n in exponential_regime_pairs(k):
        val = petersson_rhs(m, n, k, 1e-30, max(precision, 30)).kloosterman_sum_value
        ratios.append(float(abs(val)) / exponential_majorant(m, n, k))
    row["exp_regime_pairs"] = len(ratios)
    row["exp_regime_max_ratio"] = max(ratios, default=0.0)
    ok = (row["max_identity_residual"] < IDENTITY_TOL and row["max_tail_bound"] < 1e-20
          and (band or not row["band_asserted"]) and row["exp_regime_max_ratio"] <= 1)
    row["status"] = "ok" if ok else "FAIL"
    survey = [asdict(r) for r in petersson_error_survey(k)]
    return row, survey


def cmd_verify_petersson(cfg: RunConfig) -> int:
    jobs = [(k, cfg.m_max, cfg.precision, cfg.cache) for k in cfg.k]
    results = _pool_map(_petersson_row, jobs, cfg.threads)
    rows = [r for r, _ in results]
    columns = ["k", "dimension", "omega", "omega_minus_1", "omega_band", "band_asserted", "max_identity_residual",
               "max_tail_bound", "exp_regime_pairs", "exp_regime_max_ratio", "status"]
    emit(cfg, rows, columns)
    survey_file = side_path(cfg.out, "_survey")
    if survey_file is not None:
        survey = [s for _, ss in results for s in ss]
        survey_file.write_text(rows_to_csv(survey, ["m", "n", "k", "actual", "majorant1", "majorant2", "ratio"]),
                               encoding="utf-8", newline="\n")
    failing = [r for r in rows if r["status"] == "FAIL"]
    for r in failing:
        print(f"failing row: {r}", file=sys.stderr)
    return EXIT_FAIL if failing else EXIT_OK


# ---------------------------------------------------------------------------
# bessel-check


def bessel_bound_sample(samples: int, seed: int) -> float:
    """max |J_{k-1}(x)| / certificate over random k <= 300, x <= 1e5."""
    from .bessel import bessel_bound_certificate_array, bessel_j_float

    rng = np.random.default_rng(seed)
    orders = rng.integers(1, 300, size=samples)  # order k - 1 with 2 <= k <= 300
    xs = rng.uniform(1e-3, 1e5, size=samples)
    vals = bessel_j_float(orders, xs)
    return float(np.max(np.abs(vals) / bessel_bound_certificate_array(orders, xs)))


def bessel_recurrence_sample(samples: int, seed: int, precision: int) -> float:
    """max |J_{n-1} + J_{n+1} - (2n/x) J_n| at ``precision`` digits over random (n, x)."""
    import mpmath as mp

    from .bessel import bessel_j

    rng = np.random.default_rng(seed + 1)
    worst = 0.0
    for n, x in zip(rng.integers(1, 300, size=samples).tolist(), rng.uniform(0.5, 400, size=samples).tolist()):
        x = float(round(x, 6))
        j = [bessel_j(n + d, x, precision).value for d in (-1, 0, 1)]
        with mp.workdps(precision + 10):
            worst = max(worst, float(abs(j[0] + j[2] - 2 * n / mp.mpf(x) * j[1])))
    return worst


def averaged_bessel_table(h, Ks, ratios=None) -> list[dict]:
    """max over x/K in [0.5, 3] of |2 sum_k h((k-1)/K) J_{k-1}(x) - h(x/K)| K^3 / x, per K."""
    from .bessel import averaged_bessel_even

    ratios = np.linspace(0.5, 3.0, 26) if ratios is None else ratios
    out = []
    for K in Ks:
        worst = 0.0
        worst_res = 0.0
        for r in ratios:
            x = float(r * K)
            res = abs(averaged_bessel_even(h, K, x) - h(x / K))
            worst = max(worst, res * K**3 / x)
            worst_res = max(worst_res, res / x)
        out.append({"K": K, "C": worst, "max_residual_over_x": worst_res})
    return out


def regression_slope(xs, ys) -> float:
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


def cmd_bessel_check(cfg: RunConfig) -> int:
    h = cfg.weight()
    rows = []
    ratio = bessel_bound_sample(cfg.samples, cfg.seed)
    rows.append({"check": "bound_certificate", "parameter": cfg.samples, "value": ratio, "limit": 10.0,
                 "passed": ratio <= 10})
    n_rec = max(1, cfg.samples // 10)
    resid = bessel_recurrence_sample(n_rec, cfg.seed, cfg.precision)
    lim = 10.0 ** (-cfg.precision + 5)
    rows.append({"check": "recurrence_residual", "parameter": n_rec, "value": resid, "limit": lim,
                 "passed": resid < lim})
    table = averaged_bessel_table(h, [float(K) for K in cfg.K])
    for t in table:
        rows.append({"check": "averaged_even", "parameter": t["K"], "value": t["C"], "limit": None, "passed": None})
    if len(table) >= 2:
        slope = regression_slope([t["K"] for t in table], [t["max_residual_over_x"] for t in table])
        rows.append({"check": "averaged_even_slope", "parameter": len(table), "value": slope, "limit": -2.5,
                     "passed": -3.5 <= slope <= -2.5})
    emit(cfg, rows, ["check", "parameter", "value", "limit", "passed"])
    return EXIT_FAIL if any(r["passed"] is False for r in rows) else EXIT_OK


# ---------------------------------------------------------------------------
# density


def _density_row(job) -> dict:
    from .density import density_eigenform_route, prime_term_scale
    from .modforms import cusp_dimension, eigen_basis
    from .testfn import ks_prediction, make_test_function

    k, family, sigma, precision, cache = job
    phi = make_test_function(family, sigma)
    X = float(k * k)
    basis = None
    if cusp_dimension(k):
        basis = eigen_basis(k, max(50, math.ceil(X**sigma)), precision, cache_dir=cache)
    rep = density_eigenform_route(k, X, phi, basis=basis, precision=precision)
    row = rep.to_dict()
    row.pop("tail_bounds")
    row["displayed_terms"] = rep.displayed_terms
    row["ks_prediction"] = ks_prediction(phi, "+" if k % 4 == 0 else "-")
    row["prime_term_scale"] = prime_term_scale(k)
    return row


DENSITY_COLUMNS = ["k", "X", "gamma_term", "gamma_surrogate", "pi_term", "prime_square_term", "prime_term",
                   "prime_power_term", "prime_term_geometric", "omega_total", "total", "displayed_terms",
                   "ks_prediction", "prime_term_scale"]


def cmd_density(cfg: RunConfig) -> int:
    jobs = [(k, cfg.family, cfg.sigma, cfg.precision, cfg.cache) for k in cfg.k]
    rows = _pool_map(_density_row, jobs, cfg.threads)
    emit(cfg, rows, DENSITY_COLUMNS)
    return EXIT_OK


# ---------------------------------------------------------------------------
# averaged-density and expansion


def cmd_averaged_density(cfg: RunConfig) -> int:
    from .density import averaged_density_kloosterman
    from .testfn import ks_prediction

    h, phi = cfg.weight(), cfg.test_function()
    rows = []
    for K in cfg.K:
        for sign in cfg.signs:
            d = averaged_density_kloosterman(float(K), sign, h, phi, budget=cfg.prime_limit * 10)
            rows.append({"K": K, "sign": sign, "H": d.H_pm, "value": d.value,
                         "kloosterman_term": d.breakdown["kloosterman_term"],
                         "s_cancellation_residual": d.breakdown.get("s_cancellation_residual"),
                         "ks_prediction": ks_prediction(phi, sign)})
    emit(cfg, rows, ["K", "sign", "H", "value", "kloosterman_term", "s_cancellation_residual", "ks_prediction"])
    return EXIT_OK


def expansion_rows(Ks, signs, h, phi, J: int, budget: int) -> list[dict]:
    from .density import averaged_density_kloosterman
    from .expansion import expansion_coefficients, theorem_expansion

    coeffs = expansion_coefficients(h, J)
    rows = []
    for K in Ks:
        for sign in signs:
            direct = averaged_density_kloosterman(float(K), sign, h, phi, budget=budget)
            exp = theorem_expansion(float(K), sign, h, phi, J, coeffs)
            rows.append({"K": K, "sign": sign, "direct": direct.value, "expansion": exp.value,
                         "difference": direct.value - exp.value, "transition": exp.transition,
                         "direct_transition": direct.breakdown["kloosterman_term"],
                         "scaled_difference": (direct.value - exp.value) * math.log(K) ** (J + 1)})
    return rows


def expansion_passes(rows: list[dict], tol: float = EXPANSION_TOL) -> bool:
    ok = True
    for sign in {r["sign"] for r in rows}:
        diffs = [abs(r["difference"]) for r in sorted((r for r in rows if r["sign"] == sign), key=lambda r: r["K"])]
        ok &= all(d <= tol for d in diffs) and all(b < a for a, b in zip(diffs, diffs[1:]))
    return ok


def cmd_expansion(cfg: RunConfig) -> int:
    if cfg.sigma >= 2:
        raise ConfigError("expansion needs sigma < 2")
    h, phi = cfg.weight(), cfg.test_function()
    rows = expansion_rows(cfg.K, cfg.signs, h, phi, cfg.J, cfg.prime_limit * 10)
    emit(cfg, rows, ["K", "sign", "direct", "expansion", "difference", "transition", "direct_transition"])
    plot_file = side_path(cfg.out, "_plotdata")
    if plot_file is not None:
        plot_file.write_text(rows_to_csv(rows, ["K", "sign", "scaled_difference"]), encoding="utf-8", newline="\n")
    return EXIT_OK if expansion_passes(rows) else EXIT_FAIL


# ---------------------------------------------------------------------------
# constants


def constants_rows(h, J: int, prime_limit: int) -> list[dict]:
    from .arith import prime_reciprocal_log_sum
    from .expansion import S1_closed_form, Z_of_s, expansion_coefficients, mertens_theta_constant, z_direct_sum

    rows = []
    for s in (1.0, 2.0):
        z, err = Z_of_s(s)
        rows.append({"name": f"Z({s:g})", "value": z, "error_bar": err})
        rows.append({"name": f"Z({s:g}) direct sum", "value": z_direct_sum(s, prime_limit), "error_bar": 1.0 / prime_limit})
    co = expansion_coefficients(h, J, prime_limit)
    for name in ("C", "S", "c", "R"):
        start = 0 if name == "C" else 1
        for j, (v, e) in enumerate(zip(getattr(co, name), co.error_bars[name])):
            rows.append({"name": f"{name}_{j + start}", "value": v, "error_bar": e})
    prime_sum, bound = prime_reciprocal_log_sum(prime_limit)
    rows.append({"name": "sum_p log p/(p(p-1))", "value": prime_sum, "error_bar": bound})
    rows.append({"name": "S_1 closed form", "value": S1_closed_form(h, prime_limit), "error_bar": bound})
    rows.append({"name": "theta integral closed form", "value": mertens_theta_constant(prime_limit), "error_bar": bound})
    rows.append({"name": "R_1 - S_1", "value": co.R[0] - co.S[0], "error_bar": co.error_bars["R"][0]})
    return rows


def cmd_constants(cfg: RunConfig) -> int:
    rows = constants_rows(cfg.weight(), cfg.J, cfg.prime_limit)
    emit(cfg, rows, ["name", "value", "error_bar"])
    return EXIT_OK


HANDLERS = {
    "verify-petersson": cmd_verify_petersson,
    "bessel-check": cmd_bessel_check,
    "density": cmd_density,
    "averaged-density": cmd_averaged_density,
    "expansion": cmd_expansion,
    "constants": cmd_constants,
}


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _float_list(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lowlying", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--precision", type=int, help="working precision in digits")
        p.add_argument("--threads", type=int, help="worker processes")
        p.add_argument("--out", help="output file (CSV or JSON); stdout if omitted")
        p.add_argument("--cache", help="directory for cached eigenbases")
        p.add_argument("--format", choices=["csv", "json"])
        p.add_argument("--no-plot", action="store_true", help="skip the PNG figure")
        p.add_argument("--k", type=_int_list, help="comma-separated weights")
        p.add_argument("--K", type=_float_list, help="comma-separated averaging scales")
        p.add_argument("--signs", type=lambda s: s.split(","), help="comma-separated from +,-,mixed")
        p.add_argument("--sigma", type=float)
        p.add_argument("--J", type=int)
        p.add_argument("--m-max", dest="m_max", type=int)
        p.add_argument("--samples", type=int)
        p.add_argument("--seed", type=int)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        cfg = build_config(args)
        return HANDLERS[cfg.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BudgetExceeded as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET


if __name__ == "__main__":
    sys.exit(main())

"""
Command line front end: ``nakagami-sum <command> [options]``.

Every command writes one table (CSV or JSON) to ``--out`` or stdout. Module
errors produce a JSON error record on stderr and exit status 1; usage errors
exit with status 2.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import sys
from dataclasses import dataclass, field

import numpy as np

from . import approx, egc, mcsim
from .moments import ScenarioConfig, moment_pair

COMMANDS = ("fit", "pdf", "outage", "ber", "simulate", "compare")
SWEEP_VARS = ("snr_db", "threshold", "rho", "L")
DEFAULT_SNR_SWEEP = ("snr_db", 0.0, 20.0, 21)
DEFAULT_THRESHOLD_SWEEP = ("threshold", -10.0, 20.0, 31)
PDF_POINTS = 200
DEFAULT_N = 1_000_000
KS_MAX_N = 1_000_000
# which sweep variables each command accepts
_ALLOWED = {
    "fit": {"rho", "L"},
    "pdf": set(),
    "outage": {"threshold"},
    "ber": {"snr_db", "rho", "L"},
    "simulate": {"rho", "L"},
    "compare": {"snr_db", "threshold"},
}


class UsageError(ValueError):
    """Invalid combination of command line options."""


@dataclass(frozen=True)
class Sweep:
    var: str
    lo: float
    hi: float
    points: int

    @classmethod
    def parse(cls, text: str) -> "Sweep":
        parts = text.split(":")
        if len(parts) != 4:
            raise UsageError(f"sweep must look like var:min:max:points, got {text!r}")
        var, lo, hi, pts = parts
        if var not in SWEEP_VARS:
            raise UsageError(f"sweep variable must be one of {SWEEP_VARS}, got {var!r}")
        try:
            sw = cls(var, float(lo), float(hi), int(pts))
        except ValueError as exc:
            raise UsageError(f"bad sweep {text!r}: {exc}") from None
        if sw.points < 1 or sw.hi < sw.lo or (sw.points > 1 and sw.hi == sw.lo):
            raise UsageError(f"sweep range must be non-empty and ordered, got {text!r}")
        return sw

    @property
    def values(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.points)


@dataclass
class Table:
    columns: list[str]
    rows: list[list] = field(default_factory=list)
    footer: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# scenario assembly
# ---------------------------------------------------------------------------

def _load_config_file(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise UsageError("scenario file must hold a JSON object")
    known = {"L", "m", "m_z", "rho", "powers", "omega1", "delta", "n0", "noise_density"}
    unknown = set(data) - known
    if unknown:
        raise UsageError(f"unknown scenario keys: {sorted(unknown)}")
    if "powers" in data and ("omega1" in data or "delta" in data):
        raise UsageError("scenario gives both powers and omega1/delta; use one or the other")
    out = dict(data)
    if "m_z" in out:
        out["m"] = out.pop("m_z")
    if "noise_density" in out:
        out["n0"] = out.pop("noise_density")
    return out


def _scenario_fields(args) -> dict:
    fields = _load_config_file(args.config) if args.config else {}
    for key in ("L", "m", "rho", "omega1", "delta", "n0"):
        val = getattr(args, key)
        if val is not None:
            fields[key] = val
    if "powers" in fields and ("omega1" in fields or "delta" in fields):
        raise UsageError("explicit powers cannot be combined with --omega1/--delta")
    for key in ("L", "m", "rho"):
        if key not in fields:
            raise UsageError(f"scenario needs {key} (flag --{key} or config file)")
    return fields


def _build(fields: dict, **override) -> ScenarioConfig:
    f = {**fields, **override}
    L, m, rho = int(f["L"]), f["m"], float(f["rho"])
    if int(m) != m:
        raise ValueError(f"m must be an integer, got {m}")
    n0 = float(f.get("n0", 1.0))
    if "powers" in f:
        powers = tuple(float(v) for v in f["powers"])
        if len(powers) != L:
            raise ValueError(f"{len(powers)} powers given for L={L}")
        return ScenarioConfig(L, int(m), rho, powers, n0)
    return ScenarioConfig.from_profile(L, int(m), rho, float(f.get("omega1", 1.0)),
                                       float(f.get("delta", 0.0)), n0)


def _omega1(cfg: ScenarioConfig) -> float:
    return float(cfg.powers[0])


def _n0_for_db(cfg: ScenarioConfig, db: float) -> float:
    # the swept SNR is branch 1's average SNR, Omega_1 / N0
    return _omega1(cfg) / 10.0 ** (db / 10.0)


def _scenarios(fields: dict, sweep: Sweep | None):
    """Yield ``(swept value or None, config)`` for rho/L sweeps or the single scenario."""
    if sweep is None or sweep.var not in ("rho", "L"):
        yield None, _build(fields)
        return
    if sweep.var == "L" and "powers" in fields:
        raise UsageError("cannot sweep L with an explicit power list")
    for v in sweep.values:
        if sweep.var == "L":
            if v != int(v):
                raise UsageError(f"L sweep produced non-integer {v}")
            yield int(v), _build(fields, L=int(v))
        else:
            yield float(v), _build(fields, rho=float(v))


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_fit(fields, sweep, args) -> Table:
    # L and rho are always columns, so rho and L sweeps need no extra one
    t = Table(["L", "m", "rho", "omega_R", "m_R", "ez2", "ez4"])
    for _, cfg in _scenarios(fields, sweep):
        mp = moment_pair(cfg)
        p = approx.fit(cfg)
        t.rows.append([cfg.L, cfg.m_z, cfg.rho, p.omega_R, p.m_R, mp.ez2, mp.ez4])
    return t


def _pdf_grid(ez2: float) -> np.ndarray:
    return np.linspace(0.0, 4.0 * math.sqrt(ez2), PDF_POINTS)


def _empirical_density(z: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Histogram density at grid points, bins centred on the points."""
    h = r[1] - r[0]
    edges = np.concatenate(([max(r[0] - h / 2, 0.0)], (r[:-1] + r[1:]) / 2, [r[-1] + h / 2]))
    counts, _ = np.histogram(z, bins=edges)
    return counts / (z.size * np.diff(edges))


def cmd_pdf(fields, sweep, args) -> Table:
    cfg = _build(fields)
    p = approx.fit(cfg)
    r = _pdf_grid(moment_pair(cfg).ez2)
    f = approx.pdf_envelope(r, p)
    cols = ["r", "f_approx"]
    emp = None
    if args.n is not None:
        batch = mcsim.generate(cfg, args.n, args.seed, args.workers)
        emp = _empirical_density(batch.z, r)
        cols.append("f_empirical")
    t = Table(cols)
    for i, ri in enumerate(r):
        t.rows.append([ri, f[i]] + ([emp[i]] if emp is not None else []))
    return t


def _threshold_values(sweep: Sweep | None) -> np.ndarray:
    return (sweep or Sweep(*DEFAULT_THRESHOLD_SWEEP)).values


def cmd_outage(fields, sweep, args) -> Table:
    cfg = _build(fields)
    e = egc.to_egc_params(approx.fit(cfg), cfg.noise_density)
    t = Table(["threshold_db", "p_out"])
    for db in _threshold_values(sweep):
        t.rows.append([db, egc.outage(10.0 ** (db / 10.0), e)])
    return t


def _ber(e: egc.EgcParams, modulation: str) -> tuple[float, bool]:
    if modulation == "coherent-bpsk":
        res = egc.ber_coherent_bpsk(e)
        return res.value, res.fallback
    return egc.ber_noncoherent_bfsk(e), False


def cmd_ber(fields, sweep, args) -> Table:
    if sweep is not None and sweep.var in ("rho", "L"):
        t = Table([sweep.var, "snr_db", "ber", "fallback"])
        for v, cfg in _scenarios(fields, sweep):
            p = approx.fit(cfg)
            db = 10.0 * math.log10(_omega1(cfg) / cfg.noise_density)
            val, fb = _ber(egc.to_egc_params(p, cfg.noise_density), args.modulation)
            t.rows.append([v, db, val, int(fb)])
        return t
    cfg = _build(fields)
    p = approx.fit(cfg)
    t = Table(["snr_db", "ber", "fallback"])
    for db in (sweep or Sweep(*DEFAULT_SNR_SWEEP)).values:
        val, fb = _ber(egc.to_egc_params(p, _n0_for_db(cfg, db)), args.modulation)
        t.rows.append([db, val, int(fb)])
    return t


def _n(args) -> int:
    return DEFAULT_N if args.n is None else args.n


def cmd_simulate(fields, sweep, args) -> Table:
    cols = ["L", "m", "rho", "n", "seed", "ez2_hat", "ez2_se", "ez4_hat", "ez4_se",
            "rho_hat", "rho_se"]
    t = Table(cols)
    for _, cfg in _scenarios(fields, sweep):
        batch = mcsim.generate(cfg, _n(args), args.seed, args.workers)
        st = mcsim.empirical_stats(batch)
        rho = st.rho_hat or mcsim.Estimate(math.nan, math.nan)
        t.rows.append([cfg.L, cfg.m_z, cfg.rho, batch.n, args.seed, st.ez2_hat.value,
                       st.ez2_hat.se, st.ez4_hat.value, st.ez4_hat.se, rho.value, rho.se])
    return t


def cmd_compare(fields, sweep, args) -> Table:
    cfg = _build(fields)
    p = approx.fit(cfg)
    mp = moment_pair(cfg)
    n = _n(args)
    batch = mcsim.generate(cfg, min(n, KS_MAX_N), args.seed, args.workers)
    st = mcsim.empirical_stats(batch)
    footer = {
        "ks_distance": mcsim.ks_distance(batch, p),
        "ks_n": batch.n,
        "seed": args.seed,
        "omega_R": p.omega_R,
        "m_R": p.m_R,
        "ez2": mp.ez2,
        "ez2_hat": st.ez2_hat.value,
        "ez2_se": st.ez2_hat.se,
        "ez4": mp.ez4,
        "ez4_hat": st.ez4_hat.value,
        "ez4_se": st.ez4_hat.se,
    }
    if sweep is not None and sweep.var == "snr_db":
        t = Table(["snr_db", "ber_analytic", "fallback", "ber_mc", "ber_se"], footer=footer)
        for db in sweep.values:
            c = _build(fields, n0=_n0_for_db(cfg, db))
            val, fb = _ber(egc.to_egc_params(p, c.noise_density), args.modulation)
            est = mcsim.simulate_ber(c, args.modulation, n, args.seed, args.workers)
            t.rows.append([db, val, int(fb), est.value, est.se])
        return t
    if sweep is not None and sweep.var == "threshold":
        e = egc.to_egc_params(p, cfg.noise_density)
        ths = 10.0 ** (sweep.values / 10.0)
        probs, se = mcsim.simulate_outage(cfg, n, args.seed, ths, args.workers)
        t = Table(["threshold_db", "p_out_analytic", "p_out_mc", "p_out_se"], footer=footer)
        for db, th, pm, s in zip(sweep.values, ths, probs, se):
            t.rows.append([db, egc.outage(th, e), pm, s])
        return t
    r = _pdf_grid(mp.ez2)
    z = np.sort(batch.z)
    emp_cdf = np.searchsorted(z, r, side="right") / z.size
    t = Table(["r", "cdf_approx", "cdf_empirical", "cdf_se", "pdf_approx", "pdf_empirical"],
              footer=footer)
    f = approx.pdf_envelope(r, p)
    fe = _empirical_density(z, r)
    for i, ri in enumerate(r):
        c = approx.cdf_power(float(ri * ri), p)
        se = math.sqrt(emp_cdf[i] * (1 - emp_cdf[i]) / z.size)
        t.rows.append([ri, c, emp_cdf[i], se, f[i], fe[i]])
    return t


_HANDLERS = {
    "fit": cmd_fit,
    "pdf": cmd_pdf,
    "outage": cmd_outage,
    "ber": cmd_ber,
    "simulate": cmd_simulate,
    "compare": cmd_compare,
}


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    return format(v, ".12g")


def _json_value(v):
    if isinstance(v, (bool, np.bool_, int, np.integer)):
        return int(v)
    v = float(v)
    return None if math.isnan(v) else float(format(v, ".12g"))


def render(table: Table, fmt: str, command: str) -> str:
    if fmt == "json":
        doc = {
            "command": command,
            "columns": table.columns,
            "rows": [[_json_value(v) for v in row] for row in table.rows],
            "footer": {k: _json_value(v) for k, v in table.footer.items()},
        }
        return json.dumps(doc, indent=1) + "\n"
    buf = io.StringIO()
    buf.write(",".join(table.columns) + "\n")
    for row in table.rows:
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    for k, v in table.footer.items():
        buf.write(f"# {k},{_fmt(v)}\n")
    return buf.getvalue()


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="nakagami-sum",
        description="Moment-matched approximation of sums of correlated Nakagami envelopes.",
    )
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="JSON scenario file")
    ap.add_argument("--L", type=int, help="number of branches")
    ap.add_argument("--m", type=int, help="Nakagami fading parameter m_z (integer)")
    ap.add_argument("--rho", type=float, help="equal pairwise power correlation")
    ap.add_argument("--omega1", type=float, help="power of branch 1")
    ap.add_argument("--delta", type=float, help="power decay factor of the exponential profile")
    ap.add_argument("--n0", type=float, help="noise power spectral density")
    ap.add_argument("--sweep", type=Sweep.parse, help="var:min:max:points")
    ap.add_argument("--modulation", choices=mcsim.MODULATIONS, default="coherent-bpsk")
    ap.add_argument("--n", type=int, help="Monte-Carlo sample or bit count")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1, help="threads for Monte-Carlo blocks")
    ap.add_argument("--out", help="output file (default stdout)")
    ap.add_argument("--format", choices=("csv", "json"), default="csv")
    return ap


def _error_record(command: str | None, exc: BaseException) -> str:
    return json.dumps({"error": type(exc).__name__, "message": str(exc), "command": command})


def run(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.sweep is not None and args.sweep.var not in _ALLOWED[args.command]:
            raise UsageError(f"{args.command} does not accept a {args.sweep.var} sweep")
        if args.n is not None and args.n < 1:
            raise UsageError("--n must be positive")
        table = _HANDLERS[args.command](_scenario_fields(args), args.sweep, args)
        text = render(table, args.format, args.command)
        if args.out:
            with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
    except UsageError as exc:
        sys.stderr.write(_error_record(args.command, exc) + "\n")
        return 2
    except (ValueError, ArithmeticError, RuntimeError, OSError) as exc:
        sys.stderr.write(_error_record(args.command, exc) + "\n")
        return 1
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()

"""Command-line front end: ``qpspec COMMAND CONFIG [--out DIR]``.

Config files hold ``key = value`` lines and ``coeff n1 [n2 ...] re im``
lines; ``#`` starts a comment. Exit codes: 0 all checks pass, 1 a check
failed (or the verdict is only advisory), 2 input or usage error,
3 numerical non-convergence.
"""

from __future__ import annotations

import argparse
import hashlib
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dispersion import dispersion_at
from .errors import (AmbiguousSelectionError, CertificationInconclusiveError, ConfigError,
                     ConstantsTooWeakError, DegenerateFrequencyError, IllConditionedError,
                     NonConvergenceError, QPSpecError)
from .gaps import (build_catalog, catalog_from_csv, catalog_to_csv, verify_bottom_separation,
                   verify_gap_decay, verify_gap_separation, verify_total_length)
from .homogeneity import certify_catalog, proof_replay
from .oracle import gap_label_check
from .potential import (FourierPotential, FrequencyVector, diophantine_scan, validate_potential)
from .resonance import resonant_indices

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3

_REQUIRED = ("nu", "omega", "a0", "b0", "eps", "kappa0")
_INT_KEYS = {"nu", "M", "N", "threads"}
_FLOAT_KEYS = {"a0", "b0", "eps", "kappa0", "sigma_min", "sigma_max", "tau", "a", "b", "eps0", "L", "h"}
_KEYS = set(_REQUIRED) | _INT_KEYS | _FLOAT_KEYS


@dataclass(frozen=True)
class ProblemConfig:
    nu: int
    omega: tuple[float, ...]
    a0: float
    b0: float
    eps: float
    kappa0: float
    coeffs: dict = field(default_factory=dict)
    M: int = 4
    N: int = 6
    sigma_min: float = 1e-3
    sigma_max: float = 10.0
    tau: float = 0.5
    a: float | None = None  # None: fitted from the catalog
    b: float = 0.0  # 0: use 4 b0
    eps0: float = 1e-2
    L: float = 2000.0
    h: float = 0.02
    threads: int = 1
    digest: str = ""

    @property
    def potential(self) -> FourierPotential:
        return FourierPotential(FrequencyVector(self.omega, self.a0, self.b0), self.coeffs, self.eps, self.kappa0)

    def canonical_lines(self) -> list[str]:
        out = [f"nu = {self.nu}", "omega = " + " ".join(repr(w) for w in self.omega)]
        for key in ("a0", "b0", "eps", "kappa0", "M", "N", "sigma_min", "sigma_max", "tau", "a", "b",
                    "eps0", "L", "h", "threads"):
            value = getattr(self, key)
            out.append(f"{key} = {'fit' if value is None else repr(value)}")
        for n, c in sorted(self.coeffs.items()):
            out.append(f"coeff {' '.join(map(str, n))} {c.real!r} {c.imag!r}")
        return out


def _number(text: str, kind, key: str, line: int):
    try:
        return kind(text)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {text!r} as {kind.__name__}", line) from None


def parse_config(text: str) -> ProblemConfig:
    values: dict[str, object] = {}
    where: dict[str, int] = {}
    coeffs: dict[tuple[int, ...], complex] = {}
    coeff_lines = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("coeff") and (len(line) == 5 or line[5].isspace()):
            coeff_lines.append((lineno, line.split()[1:]))
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key or not value:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        if key not in _KEYS:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if key in values:
            raise ConfigError(f"duplicate key {key!r}", lineno)
        where[key] = lineno
        if key == "omega":
            values[key] = tuple(_number(v, float, key, lineno) for v in value.split())
        elif key == "a" and value == "fit":
            values[key] = None
        elif key in _INT_KEYS:
            values[key] = _number(value, int, key, lineno)
        else:
            values[key] = _number(value, float, key, lineno)
    missing = [k for k in _REQUIRED if k not in values]
    if missing:
        raise ConfigError(f"missing required keys: {', '.join(missing)}")
    nu = values["nu"]
    if nu < 1:
        raise ConfigError("nu must be >= 1", where["nu"])
    if len(values["omega"]) != nu:
        raise ConfigError(f"omega has {len(values['omega'])} components, nu = {nu}", where["omega"])
    if not values["b0"] > nu:
        raise ConfigError(f"standing assumption nu < b0 violated (b0 = {values['b0']!r}, nu = {nu})",
                          where["b0"])
    for lineno, parts in coeff_lines:
        if len(parts) != nu + 2:
            raise ConfigError(f"coeff needs {nu} indices and re im, got {len(parts)} fields", lineno)
        n = tuple(_number(v, int, "coeff", lineno) for v in parts[:nu])
        c = complex(_number(parts[nu], float, "coeff", lineno), _number(parts[nu + 1], float, "coeff", lineno))
        if not any(n):
            raise ConfigError("coefficient at origin forbidden", lineno)
        if n in coeffs:
            raise ConfigError(f"duplicate coefficient {n}", lineno)
        coeffs[n] = c
    M = values.get("M", 4)
    N = values.get("N", M + 2)
    if M < 1:
        raise ConfigError("M must be >= 1", where.get("M"))
    if N < M + 2:
        raise ConfigError(f"N = {N} must be >= M + 2 = {M + 2}", where.get("N"))
    b = values.get("b", 4.0 * values["b0"])
    cfg = ProblemConfig(
        nu=nu, omega=values["omega"], a0=values["a0"], b0=values["b0"], eps=values["eps"],
        kappa0=values["kappa0"], coeffs=coeffs, M=M, N=N,
        sigma_min=values.get("sigma_min", 1e-3), sigma_max=values.get("sigma_max", 10.0),
        tau=values.get("tau", 0.5), a=values.get("a"), b=b, eps0=values.get("eps0", 1e-2),
        L=values.get("L", 2000.0), h=values.get("h", 0.02), threads=values.get("threads", 1),
    )
    checks = [
        (cfg.eps >= 0, "eps", "eps >= 0"),
        (0 < cfg.kappa0 <= 1, "kappa0", "0 < kappa0 <= 1"),
        (0 < cfg.sigma_min < cfg.sigma_max, "sigma_min", "0 < sigma_min < sigma_max"),
        (cfg.tau > 0, "tau", "tau > 0"),
        (cfg.a is None or cfg.a > 0, "a", "a > 0"),
        (cfg.b > 0, "b", "b > 0"),
        (cfg.eps0 > 0, "eps0", "eps0 > 0"),
        (cfg.L > 0 and cfg.h > 0, "L", "L > 0 and h > 0"),
        (cfg.threads >= 1, "threads", "threads >= 1"),
    ]
    for ok, key, what in checks:
        if not ok:
            raise ConfigError(f"{what} violated", where.get(key))
    try:
        cfg.potential
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    digest = hashlib.sha256("\n".join(cfg.canonical_lines()).encode()).hexdigest()
    return ProblemConfig(**{**cfg.__dict__, "digest": digest})


# -- commands ------------------------------------------------------------------

class _Run:
    """Collects report lines and the exit code of one command."""

    def __init__(self, command: str, cfg: ProblemConfig, out: Path):
        self.command, self.cfg, self.out = command, cfg, out
        self.lines: list[str] = []
        self.code = EXIT_OK

    def flag(self, code: int):
        # input errors dominate, then non-convergence, then failed checks
        rank = {EXIT_OK: 0, EXIT_FAIL: 1, EXIT_NUMERIC: 2, EXIT_INPUT: 3}
        if rank[code] > rank[self.code]:
            self.code = code

    def section(self, title: str, body: list[str]):
        self.lines.append(f"[{title}]")
        self.lines.extend(body)

    def write(self, name: str, text: str):
        self.out.mkdir(parents=True, exist_ok=True)
        with open(self.out / name, "w", newline="\n") as fh:
            fh.write(text)

    def report(self) -> str:
        head = [f"qpspec report: {self.command}", f"config_sha256: {self.cfg.digest}"]
        head += [f"config: {line}" for line in self.cfg.canonical_lines()]
        return "\n".join(head + self.lines + [f"exit_code: {self.code}"]) + "\n"


def _validate(run: _Run) -> bool:
    p = run.cfg.potential
    body, ok = [], True
    violations = validate_potential(p)
    body.append(f"violations: {len(violations)}")
    for v in violations:
        body.append(f"violation: {v.message}")
        ok = False
    try:
        scan = diophantine_scan(p.freq, run.cfg.N)
        body += [f"diophantine_box: {run.cfg.N}", f"worst_ratio: {scan.worst_ratio!r}",
                 f"worst_n: {scan.worst_n}", f"min_divisor: {scan.min_divisor!r}",
                 f"min_divisor_n: {scan.min_divisor_n}"]
        if scan.worst_ratio < p.freq.a0:
            body.append(f"violation: |n.omega| |n|^b0 = {scan.worst_ratio!r} < a0 at n = {scan.worst_n}")
            ok = False
    except DegenerateFrequencyError as exc:
        body.append(f"violation: {exc}")
        ok = False
    run.section("validate", body)
    if not ok:
        run.flag(EXIT_FAIL)
    return ok


def _dispersion(run: _Run, kmin: float, kmax: float, nk: int):
    p, N = run.cfg.potential, run.cfg.N
    ks = np.linspace(kmin, kmax, nk)
    rows = ["k,E,trunc_error,resonant,status"]
    ambiguous = 0
    for k in ks:
        res = int(len(resonant_indices(float(k), p.freq, N)) > 0)
        try:
            s = dispersion_at(p, float(k), N)
            rows.append(f"{float(k)!r},{s.E!r},{s.trunc_error!r},{res},ok")
        except AmbiguousSelectionError:
            ambiguous += 1
            rows.append(f"{float(k)!r},nan,nan,{res},ambiguous")
    run.write("dispersion.csv", "\n".join(rows) + "\n")
    run.section("dispersion", [f"points: {nk}", f"kmin: {kmin!r}", f"kmax: {kmax!r}",
                               f"ambiguous: {ambiguous}"])
    if ambiguous:
        run.flag(EXIT_NUMERIC)


def _catalog(run: _Run, path: str | None):
    if path:
        cat = catalog_from_csv(Path(path).read_text())
        run.section("catalog", [f"source: {path}"])
        return cat
    cfg = run.cfg
    cat = build_catalog(cfg.potential, cfg.M, cfg.N, threads=cfg.threads)
    run.write("gaps.csv", catalog_to_csv(cat))
    return cat


def _gaps(run: _Run, cat):
    body = [f"labels: {len(cat.gaps) + len(cat.unresolved)}", f"open: {sum(not g.closed for g in cat.gaps)}",
            f"bottom: {cat.bottom!r}", f"tail_bound: {cat.tail_bound!r}"]
    body += [f"defect: {d}" for d in cat.defects()]
    run.section("gaps", body)
    if cat.unresolved:
        run.flag(EXIT_NUMERIC)
        return
    if cat.defects():
        run.flag(EXIT_FAIL)
    for rep in (verify_gap_decay(cat), verify_gap_separation(cat, run.cfg.a, run.cfg.b),
                verify_bottom_separation(cat, run.cfg.a, run.cfg.b), verify_total_length(cat)):
        run.section(rep.name, rep.lines())
        if not rep.passed:
            run.flag(EXIT_FAIL)


def _certify(run: _Run, cat):
    cfg = run.cfg
    try:
        cert = certify_catalog(cat, cfg.tau, cfg.sigma_min, cfg.sigma_max)
    except CertificationInconclusiveError as exc:
        run.section("certify", ["verdict: inconclusive", f"reason: {exc}",
                                f"INCONCLUSIVE nan {cfg.tau!r} {cfg.sigma_min!r} {cfg.sigma_max!r}"])
        run.flag(EXIT_NUMERIC)
        return
    run.section("certify", cert.lines() + [cert.summary()])
    if cert.verdict != "pass":
        run.flag(EXIT_FAIL)


def _replay(run: _Run, cat):
    if cat.unresolved:
        run.section("proof_replay", ["skipped: catalog has unresolved labels"])
        run.flag(EXIT_NUMERIC)
        return
    try:
        rep = proof_replay(cat, run.cfg.a, run.cfg.b)
    except ConstantsTooWeakError as exc:
        run.section("proof_replay", [f"constants too weak: {exc}"])
        run.flag(EXIT_FAIL)
        return
    run.section(rep.name, rep.lines())
    if not rep.passed:
        run.flag(EXIT_FAIL)


def _oracle(run: _Run, cat):
    if cat.unresolved:
        run.section("gap_labels", ["skipped: catalog has unresolved labels"])
        run.flag(EXIT_NUMERIC)
        return
    rep = gap_label_check(cat, run.cfg.potential, run.cfg.L, run.cfg.h)
    run.section(rep.name, rep.lines())
    if not rep.passed:
        run.flag(EXIT_FAIL)


COMMANDS = ("validate", "dispersion", "gaps", "certify", "replay", "oracle", "all")


def run(command: str, cfg: ProblemConfig, out: str | Path = ".", *, catalog: str | None = None,
        kmin: float = 0.0, kmax: float = 2.0, nk: int = 101) -> int:
    """Execute one command, write its artifacts under ``out`` and return the exit code."""
    if command not in COMMANDS:
        raise ValueError(f"unknown command {command!r}")
    r = _Run(command, cfg, Path(out))
    try:
        if command in ("validate", "gaps", "all"):
            valid = _validate(r)
            if command == "gaps" and not valid:
                r.write("gaps.txt", r.report())
                return r.code
        if command == "dispersion":
            _dispersion(r, kmin, kmax, nk)
        if command in ("gaps", "certify", "replay", "oracle", "all"):
            cat = _catalog(r, catalog)
            if command in ("gaps", "all"):
                _gaps(r, cat)
            if command in ("certify", "all"):
                _certify(r, cat)
            if command in ("replay", "all"):
                _replay(r, cat)
            if command in ("oracle", "all"):
                _oracle(r, cat)
    except IllConditionedError as exc:
        r.section("error", [f"input: {exc}"])
        r.flag(EXIT_INPUT)
    except (NonConvergenceError, QPSpecError) as exc:
        r.section("error", [f"{type(exc).__name__}: {exc}"])
        r.flag(EXIT_NUMERIC)
    r.write(f"{command}.txt", r.report())
    return r.code


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="qpspec", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("config", help="problem configuration file")
    parser.add_argument("--out", default=".", help="directory for reports and CSV files")
    parser.add_argument("--catalog", help="reuse a gap catalog CSV instead of rebuilding it")
    parser.add_argument("--kmin", type=float, default=0.0)
    parser.add_argument("--kmax", type=float, default=2.0)
    parser.add_argument("--nk", type=int, default=101)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        cfg = parse_config(Path(args.config).read_text())
    except OSError as exc:
        print(f"qpspec: cannot read config: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ConfigError as exc:
        print(f"qpspec: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if args.nk < 1 or not math.isfinite(args.kmin) or not math.isfinite(args.kmax):
        print("qpspec: need nk >= 1 and finite k range", file=sys.stderr)
        return EXIT_INPUT
    try:
        code = run(args.command, cfg, args.out, catalog=args.catalog,
                   kmin=args.kmin, kmax=args.kmax, nk=args.nk)
    except (OSError, ValueError) as exc:
        print(f"qpspec: {exc}", file=sys.stderr)
        return EXIT_INPUT
    report = Path(args.out) / f"{args.command}.txt"
    print(report.read_text(), end="")
    return code


if __name__ == "__main__":
    sys.exit(main())

"""Level-1 Maass-form spectral data: model, file format, validation.

File format (``MAASS1 v1``), UTF-8 text::

    MAASS1 v1
    N_max=<int> precision=<int> source=<free text>
    t=<decimal> parity=<+1|-1> L1sym2=<decimal|NA> lambda=<comma separated, n=2..N_max>
    ...

``sym2_L1`` is stored in the completed normalisation

    L(1, sym^2 u) = zeta(2) * sum_n lambda(n^2)/n
                  = prod_p [(1 - alpha_p^2/p)(1 - 1/p)(1 - beta_p^2/p)]^(-1),

which is exactly the quantity whose reciprocal appears in the spectral
weights 2/L(1, sym^2 u_j); the bundled values were computed from Petersson
norms and are validated against the trace formulas downstream.

Loading validates soft invariants (Hecke recursion, multiplicativity,
Kim--Sarnak-size screen) into a report and fails hard on structural ones
(lambda(1) = 1 by construction, sortedness, duplicates).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from .arith import factorize, divisor_d, primes_up_to
from .result import EvalResult

__all__ = [
    "MaassForm", "SpectralDataset", "DatasetError", "ValidationIssue",
    "load_dataset", "save_dataset", "default_dataset_path",
    "sym2_L1_complete", "weyl_count", "window_select",
]


class DatasetError(ValueError):
    """Parse failure or hard invariant violation (carries line/form info)."""


@dataclass(frozen=True)
class ValidationIssue:
    form_index: int
    rule: str
    detail: str


@dataclass(frozen=True)
class MaassForm:
    """One spectral datum: Laplace eigenvalue 1/4 + t^2, parity, Hecke data."""

    t: float
    parity: int                   # +1 even, -1 odd
    hecke: np.ndarray             # hecke[n-1] = lambda(n) for n = 1..N_max
    sym2_L1: Optional[float]
    precision: int

    @property
    def n_max(self) -> int:
        return len(self.hecke)

    def lam(self, n: int) -> float:
        """lambda(n); indices beyond N_max are reconstructed via the Hecke
        relations from the stored prime values (every prime factor of n must
        be <= N_max)."""
        if n < 1:
            raise ValueError("n must be >= 1")
        if n <= self.n_max:
            return float(self.hecke[n - 1])
        out = 1.0
        for p, e in factorize(n).primes:
            if p ** e <= self.n_max:
                out *= float(self.hecke[p ** e - 1])
                continue
            if p > self.n_max:
                raise ValueError(f"prime {p} outside stored range {self.n_max}")
            lp = float(self.hecke[p - 1])
            a, b = 1.0, lp
            for _ in range(e - 1):
                a, b = b, lp * b - a
            out *= b
        return out


@dataclass(frozen=True)
class SpectralDataset:
    forms: List[MaassForm]
    t_max: float
    n_max: int
    source: str
    precision: int
    issues: List[ValidationIssue] = field(default_factory=list)

    @property
    def complete_to(self) -> float:
        return self.t_max

    def count_upto(self, T: float) -> int:
        return sum(1 for f in self.forms if f.t <= T)


def _validate_form(idx: int, f: MaassForm, issues: List[ValidationIssue]):
    tol = 10.0 * 10.0 ** (-f.precision)
    lam = f.hecke
    # Hecke recursion at stored prime powers
    for p in primes_up_to(f.n_max):
        lp = lam[p - 1]
        a, b = 1.0, lp
        k = 1
        while p ** (k + 1) <= f.n_max:
            nxt = lp * b - a
            got = lam[p ** (k + 1) - 1]
            if abs(nxt - got) > tol:
                issues.append(ValidationIssue(
                    idx, "hecke-recursion",
                    f"p={p} k={k}: |{got:.3e} - {nxt:.3e}| > {tol:.1e}"))
            a, b = b, nxt
            k += 1
    # multiplicativity on coprime splits
    for n in range(2, f.n_max + 1):
        fac = factorize(n).primes
        if len(fac) < 2:
            continue
        p, e = fac[0]
        m1 = p ** e
        m2 = n // m1
        if abs(lam[n - 1] - lam[m1 - 1] * lam[m2 - 1]) > tol:
            issues.append(ValidationIssue(
                idx, "multiplicativity",
                f"lambda({n}) != lambda({m1})*lambda({m2})"))
    # size screen (heuristic, Kim-Sarnak exponent)
    for n in range(1, f.n_max + 1):
        cap = divisor_d(n) * n ** (7.0 / 64.0) * 1.01
        if abs(lam[n - 1]) > cap:
            issues.append(ValidationIssue(
                idx, "size-screen", f"|lambda({n})| = {abs(lam[n-1]):.4f} > {cap:.4f}"))


def load_dataset(path, validate: bool = True) -> SpectralDataset:
    """Parse and validate a MAASS1 v1 file."""
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"no such dataset file: {path}")
    lines = path.read_text().splitlines()
    if not lines or lines[0].strip() != "MAASS1 v1":
        raise DatasetError(f"{path}:1: unrecognised version header")
    if len(lines) < 2:
        raise DatasetError(f"{path}:2: missing metadata line")
    meta = lines[1]
    try:
        fields = dict(kv.split("=", 1) for kv in meta.split(" ", 2))
        n_max = int(fields["N_max"])
        precision = int(fields["precision"])
        source = fields.get("source", "")
    except (ValueError, KeyError) as e:
        raise DatasetError(f"{path}:2: bad metadata line ({e})")
    forms = []
    issues: List[ValidationIssue] = []
    for ln, line in enumerate(lines[2:], start=3):
        if not line.strip():
            continue
        try:
            parts = dict(kv.split("=", 1) for kv in line.split(" "))
            t = float(parts["t"])
            parity = int(parts["parity"])
            l1 = None if parts["L1sym2"] == "NA" else float(parts["L1sym2"])
            lam_tail = np.array([float(v) for v in parts["lambda"].split(",")]) \
                if parts["lambda"] else np.empty(0)
        except (ValueError, KeyError) as e:
            raise DatasetError(f"{path}:{ln}: parse error ({e})")
        if parity not in (+1, -1):
            raise DatasetError(f"{path}:{ln}: parity must be +1 or -1")
        if len(lam_tail) != n_max - 1:
            raise DatasetError(
                f"{path}:{ln}: expected {n_max - 1} lambda values, got {len(lam_tail)}")
        hecke = np.concatenate([[1.0], lam_tail])
        forms.append(MaassForm(t=t, parity=parity, hecke=hecke,
                               sym2_L1=l1, precision=precision))
    # hard invariants: sorted, no duplicates
    for i in range(1, len(forms)):
        if forms[i].t < forms[i - 1].t:
            raise DatasetError(f"form {i}: t values not sorted")
        if abs(forms[i].t - forms[i - 1].t) < 10.0 ** (-precision):
            raise DatasetError(f"form {i}: duplicate spectral parameter")
    if validate:
        for i, f in enumerate(forms):
            _validate_form(i, f, issues)
    t_max = forms[-1].t if forms else 0.0
    return SpectralDataset(forms=forms, t_max=t_max, n_max=n_max,
                           source=source, precision=precision, issues=issues)


def save_dataset(ds: SpectralDataset, path) -> None:
    """Write the canonical MAASS1 v1 form (round-trips byte-identically)."""
    lines = ["MAASS1 v1",
             f"N_max={ds.n_max} precision={ds.precision} source={ds.source}"]
    for f in ds.forms:
        lam_txt = ",".join(f"{v:.10f}" for v in f.hecke[1:])
        l1 = "NA" if f.sym2_L1 is None else f"{f.sym2_L1:.10f}"
        lines.append(f"t={f.t:.10f} parity={f.parity:+d} L1sym2={l1} lambda={lam_txt}")
    Path(path).write_text("\n".join(lines) + "\n")


def default_dataset_path() -> Path:
    """Path of the bundled level-1 dataset (t <= 40)."""
    return Path(resources.files("maassmoments").joinpath("data/level1_t40.dat"))


def sym2_L1_complete(f: MaassForm, P: int) -> EvalResult:
    """Euler-product completion of L(1, sym^2) from lambda(p), p <= P.

    Local factors use the Satake parameters (alpha + beta = lambda(p),
    alpha beta = 1):

        [(1 - alpha^2/p) (1 - 1/p) (1 - beta^2/p)]^(-1)
            = [(1 - (lambda(p)^2 - 2)/p + 1/p^2) (1 - 1/p)]^(-1).

    The tail estimate 5 * 6/(P log P) is a heuristic (the remaining primes
    contribute sum_{p>P} lambda(p^2)/p + O(1/p^2), a conditionally convergent
    series with no effective bound); the error is reported, not certified.
    """
    if P < 2:
        raise ValueError("prime cutoff must be >= 2")
    if P > f.n_max:
        raise ValueError(f"need lambda(p) for p <= {P}, stored range is {f.n_max}")
    val = 1.0
    for p in primes_up_to(P):
        c = f.lam(p) ** 2 - 2.0
        val /= (1.0 - c / p + 1.0 / p ** 2) * (1.0 - 1.0 / p)
    tail = 5.0 * 6.0 / (P * math.log(P))
    return EvalResult(val, abs(val) * tail)


def weyl_count(T: float):
    """Main terms of the eigenvalue counting function, T^2/12 - T log T/(2 pi).

    The linear term c0*T is omitted (its constant is not pinned down here);
    the returned flag records that.  Empirical comparisons should allow
    slack of the size of the omitted terms.
    """
    value = T * T / 12.0 - T * math.log(max(T, 1.0)) / (2.0 * math.pi)
    return value, "linear-term-constant-omitted"


def window_select(ds: SpectralDataset, T: float, M: float) -> List[MaassForm]:
    """Forms with |t_j - T| <= M (out-of-range windows yield a warning flag
    via the dataset's t_max; callers compare T + M against it)."""
    return [f for f in ds.forms if abs(f.t - T) <= M]

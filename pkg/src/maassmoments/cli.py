"""Command-line surface: runs each verification with a JSON report.

Commands (exit 0 iff all asserted tolerances pass; 1 on assertion failure;
2 on invalid configuration; 3 on computation-budget errors):

  dataset-validate <path>      validation report for a MAASS1 v1 file
  zeta-afe --t ...             AFE residual for |zeta(1/2+it)|^2
  lvalue --form IDX | --t ...  central values from the bundled dataset
  trace-verify --m --n --sign  one Kuznetsov instance (TraceReport JSON)
  moto-verify --n              one Motohashi instance
  moments first|second|neg|holder
  nonvanish-count              window count of nonvanishing central values
  barnes-check                 expansion-vs-remainder certificate grid
  kbound-scan                  |K_it| uniform-bound certificate grid (CSV)

Reports carry schema "report/v1"; everything outside the "metadata" field is
a deterministic function of the configuration and dataset, so two runs with
the same inputs are byte-identical after dropping "metadata".  Configuration
comes from flags, optionally overridden by a plain `key = value` file via
--config (no environment variables).
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional

import numpy as np

EXIT_OK = 0
EXIT_ASSERT = 1
EXIT_CONFIG = 2
EXIT_BUDGET = 3

DELTA_CAP = {"first": 0.3, "second": 0.25, "neg": 0.5, "holder": 0.5}


@dataclass
class RunConfig:
    T: float = 16.0
    M: float = 4.0
    delta: float = 0.2
    eta: float = 0.35
    dataset_path: str = ""
    tolerances: Dict[str, float] = field(default_factory=dict)
    truncation_overrides: Dict[str, float] = field(default_factory=dict)
    seed: int = 0
    output_path: str = "report.json"

    def validate(self, command: str):
        if not (0 < self.eta < 1):
            raise ConfigError("eta must lie in (0, 1)")
        needs_window = command.split(":")[0] in (
            "trace-verify", "moto-verify", "moments", "nonvanish-count")
        if needs_window and not (self.T ** self.eta < self.M < self.T / math.log(self.T)):
            raise ConfigError(
                f"window violates T^eta < M < T/log T: ({self.T}, {self.M})")
        cap = DELTA_CAP.get(command.split(":")[-1], 0.5)
        if not (0.0 < self.delta < cap + 1e-12):
            raise ConfigError(f"delta = {self.delta} outside (0, {cap}] for {command}")


class ConfigError(ValueError):
    pass


def _load_config_file(path: str) -> Dict[str, str]:
    out = {}
    for ln, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{ln}: expected 'key = value'")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _write_report(path: str, command: str, config: Dict, results: Dict,
                  passed: bool) -> None:
    body = dict(schema="report/v1", command=command, config=config,
                results=results)
    body["pass"] = bool(passed)
    body["metadata"] = dict(timestamp=time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()))
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        json.dump(body, fh, sort_keys=True, indent=1)
        fh.write("\n")
    os.replace(tmp, path)


def _dataset(cfg: RunConfig):
    from .spectral_data import load_dataset, default_dataset_path
    path = cfg.dataset_path or str(default_dataset_path())
    return load_dataset(path, validate=False)


# ----------------------------------------------------------------------------
# command implementations (each returns (results_dict, passed_bool))
# ----------------------------------------------------------------------------

def _cmd_dataset_validate(cfg: RunConfig, args):
    from .spectral_data import load_dataset
    ds = load_dataset(args.path)
    results = dict(
        path=str(args.path), n_forms=len(ds.forms), n_max=ds.n_max,
        t_max=ds.t_max, precision=ds.precision, source=ds.source,
        issues=[dict(form=i.form_index, rule=i.rule, detail=i.detail)
                for i in ds.issues])
    return results, len(ds.issues) == 0


def _cmd_zeta_afe(cfg: RunConfig, args):
    from .lvalue import zeta_afe_identity
    from . import specfun
    results = {"points": []}
    ok = True
    for t in args.t:
        z2 = abs(specfun.zeta(0.5 + 1j * t).value) ** 2
        resid = zeta_afe_identity(t, m_max=int(args.m_max))
        tol = cfg.tolerances.get("zeta_afe", 1e-6) * (1.0 + z2)
        ok &= resid <= tol
        results["points"].append(dict(t=t, residual=resid, budget=tol,
                                      zeta_sq=z2))
    return results, ok


def _cmd_lvalue(cfg: RunConfig, args):
    from .lvalue import central_L
    ds = _dataset(cfg)
    rows = []
    if args.form is not None:
        forms = [ds.forms[i] for i in args.form]
    else:
        forms = [f for f in ds.forms if any(abs(f.t - t) < 0.5 for t in args.t)]
    for f in forms:
        L = central_L(f)
        rows.append(dict(t=f.t, parity=f.parity, value=L.value.real, err=L.err))
    return dict(values=rows), True


def _cmd_trace_verify(cfg: RunConfig, args):
    from .lvalue import TestFunction
    from .kuznetsov import trace_verify
    ds = _dataset(cfg)
    win = TestFunction(cfg.T, cfg.M, cfg.eta)
    c_max = int(cfg.truncation_overrides.get("c_max", 40))
    rep = trace_verify(args.m, args.n, args.sign, win, ds,
                       variant=args.variant, c_max=c_max)
    tol = cfg.tolerances.get("trace", 1e-3)
    results = dict(m=rep.m, n=rep.n, sign=rep.sign, variant=rep.variant,
                   spectral_sum=rep.spectral_sum,
                   continuous_term=rep.continuous_term,
                   delta_term=rep.delta_term,
                   kloosterman_sum=rep.kloosterman_sum, lhs=rep.lhs,
                   rhs=rep.rhs, residual=rep.residual, scale=rep.scale,
                   rel_residual=rep.rel_residual, truncations=rep.truncations)
    return results, rep.rel_residual <= tol


def _cmd_moto_verify(cfg: RunConfig, args):
    from .lvalue import TestFunction
    from .motohashi import motohashi_verify
    ds = _dataset(cfg)
    win = TestFunction(cfg.T, cfg.M, cfg.eta)
    rep = motohashi_verify(args.n, win, ds)
    tol = cfg.tolerances.get("moto", 1e-2)
    ok = rep.residual <= tol * abs(rep.lhs) and rep.terms["H7"] <= 0.0
    results = dict(n=rep.n, lhs=rep.lhs, rhs=rep.rhs, residual=rep.residual,
                   terms=rep.terms, truncations=rep.truncations)
    return results, ok


def _cmd_moments(cfg: RunConfig, args):
    from .lvalue import TestFunction
    from .moments import (MollifierSpec, neg_moment_sym2, holder_chain,
                          remove_weight)
    ds = _dataset(cfg)
    win = TestFunction(cfg.T, cfg.M, cfg.eta)
    if args.kind == "first":
        from .kuznetsov import first_moment
        mol = MollifierSpec(cfg.T, cfg.delta)
        res = first_moment(ds, mol, win)
        tol = cfg.tolerances.get("first_moment", 1e-2)
        return res, res["residual"] <= tol * abs(res["lhs_direct"])
    if args.kind == "second":
        from .motohashi import second_moment_mollified
        mol = MollifierSpec(cfg.T, cfg.delta)
        res = second_moment_mollified(mol, win, ds)
        tol = cfg.tolerances.get("second_moment", 3e-2)
        ok = (res["residual"] <= tol * abs(res["lhs_direct"])
              and res["S7"] <= 0.0)
        return res, ok
    if args.kind == "neg":
        res = neg_moment_sym2(ds, win)
        return res, res["direct"] > 0.0
    # holder: assemble the chain from the three moments
    from .kuznetsov import first_moment
    from .motohashi import second_moment_mollified
    mol1 = MollifierSpec(cfg.T, min(cfg.delta, 0.2))
    mol2 = MollifierSpec(cfg.T, min(cfg.delta, 0.15))
    fm = first_moment(ds, mol1, win)
    sm = second_moment_mollified(mol2, win, ds)
    nm = neg_moment_sym2(ds, win)
    hb = holder_chain(fm["lhs_direct"] / win.T ** 2,
                      sm["lhs_direct"] / win.T ** 2,
                      nm["direct"] / win.T ** 2)
    res = dict(S1=hb.S1, S2=hb.S2, N2=hb.N2,
               count_weighted_lower=hb.count_weighted_lower)
    return res, hb.count_weighted_lower >= 0.0


def _cmd_nonvanish(cfg: RunConfig, args):
    from .moments import remove_weight
    ds = _dataset(cfg)
    res = remove_weight(ds, cfg.T, cfg.M, eps_num=args.threshold)
    ok = res["count"] >= 1 and res["inequality_margin"] >= 0.0
    return res, ok


def _cmd_barnes_check(cfg: RunConfig, args):
    from . import specfun
    rng = np.random.default_rng(cfg.seed)
    rows = []
    ok = True
    for _ in range(int(args.grid)):
        n = int(rng.integers(0, 4))
        a = complex(rng.uniform(-1.5, 2.5), rng.uniform(-1.0, 1.0))
        radius = rng.uniform(4.0 * (1 + abs(a)) + 1.0, 600.0)
        phi = rng.uniform(-7 * math.pi / 8, 7 * math.pi / 8)
        z = radius * complex(math.cos(phi), math.sin(phi))
        be = specfun.barnes_log_gamma(z, a, n)
        err = abs(be.value - specfun.log_gamma(z + a).value)
        rows.append(dict(z=[z.real, z.imag], a=[a.real, a.imag], n=n,
                         err=err, bound=be.remainder_bound))
        ok &= err <= be.remainder_bound
    return dict(grid=rows[:20], n_checked=len(rows),
                n_failed=sum(1 for r in rows if r["err"] > r["bound"])), ok


def _cmd_kbound_scan(cfg: RunConfig, args):
    from .bessel import check_K_uniform_bound
    ts = [0.5, 1.0, 2.0] + [float(k) for k in range(5, 101, 5)]
    rows = []
    ok = True
    for t in ts:
        xs = [1.01, 1.5, 2.0, 5.0, 10.0, 50.0, 100.0,
              t - t ** (1.0 / 3.0), t + t ** (1.0 / 3.0), 2.0 * t]
        for x in xs:
            if x <= 1.0:
                continue
            c = check_K_uniform_bound(t, x)
            rows.append((c.t, c.x, c.lhs, c.rhs, c.branch, c.passed))
            ok &= c.passed
    csv_path = os.path.splitext(cfg.output_path)[0] + ".csv"
    with open(csv_path + ".tmp", "w") as fh:
        fh.write("t,x,lhs,rhs,branch,pass\n")
        for r in rows:
            fh.write(f"{r[0]:.6g},{r[1]:.10g},{r[2]:.12e},{r[3]:.12e},{r[4]},{int(r[5])}\n")
    os.replace(csv_path + ".tmp", csv_path)
    return dict(n_certificates=len(rows),
                n_failed=sum(1 for r in rows if not r[5]),
                csv=os.path.basename(csv_path)), ok


# ----------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="maassmoments",
                                 description=__doc__.splitlines()[0])
    ap.add_argument("--config", help="key = value configuration file")
    ap.add_argument("--output", default=None, help="report path (JSON)")
    ap.add_argument("--T", type=float, default=16.0)
    ap.add_argument("--M", type=float, default=4.0)
    ap.add_argument("--delta", type=float, default=0.2)
    ap.add_argument("--eta", type=float, default=0.35)
    ap.add_argument("--dataset", default="")
    ap.add_argument("--seed", type=int, default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dataset-validate")
    p.add_argument("path")
    p = sub.add_parser("zeta-afe")
    p.add_argument("--t", type=float, nargs="+", default=[20.0])
    p.add_argument("--m-max", type=int, default=1200)
    p = sub.add_parser("lvalue")
    p.add_argument("--t", type=float, nargs="*", default=[])
    p.add_argument("--form", type=int, nargs="*", default=None)
    p = sub.add_parser("trace-verify")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--sign", type=int, choices=(1, -1), default=1)
    p.add_argument("--variant", choices=("full", "even"), default="full")
    p = sub.add_parser("moto-verify")
    p.add_argument("--n", type=int, required=True)
    p = sub.add_parser("moments")
    p.add_argument("kind", choices=("first", "second", "neg", "holder"))
    p = sub.add_parser("nonvanish-count")
    p.add_argument("--threshold", type=float, default=1e-6)
    p = sub.add_parser("barnes-check")
    p.add_argument("--grid", type=int, default=200)
    p = sub.add_parser("kbound-scan")
    return ap


_HANDLERS = {
    "dataset-validate": _cmd_dataset_validate,
    "zeta-afe": _cmd_zeta_afe,
    "lvalue": _cmd_lvalue,
    "trace-verify": _cmd_trace_verify,
    "moto-verify": _cmd_moto_verify,
    "moments": _cmd_moments,
    "nonvanish-count": _cmd_nonvanish,
    "barnes-check": _cmd_barnes_check,
    "kbound-scan": _cmd_kbound_scan,
}


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        cfg = RunConfig(T=args.T, M=args.M, delta=args.delta, eta=args.eta,
                        dataset_path=args.dataset, seed=args.seed,
                        output_path=args.output or f"{args.command}-report.json")
        if args.config:
            overrides = _load_config_file(args.config)
            for k, v in overrides.items():
                if k in ("T", "M", "delta", "eta"):
                    setattr(cfg, k, float(v))
                elif k == "dataset_path":
                    cfg.dataset_path = v
                elif k == "seed":
                    cfg.seed = int(v)
                elif k == "output_path":
                    cfg.output_path = v
                elif k.startswith("tol."):
                    cfg.tolerances[k[4:]] = float(v)
                elif k.startswith("trunc."):
                    cfg.truncation_overrides[k[6:]] = float(v)
                else:
                    raise ConfigError(f"unknown configuration key {k!r}")
        command = args.command
        if command == "moments":
            cfg.validate(f"moments:{args.kind}")
        else:
            cfg.validate(command)
    except (ConfigError, ValueError) as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        results, passed = _HANDLERS[command](cfg, args)
    except (ConfigError, ValueError) as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except MemoryError:
        print("computation budget exceeded", file=sys.stderr)
        return EXIT_BUDGET
    except RuntimeError as e:
        print(f"computation failed: {e}", file=sys.stderr)
        return EXIT_BUDGET

    cfg_dict = dict(T=cfg.T, M=cfg.M, delta=cfg.delta, eta=cfg.eta,
                    dataset_path=cfg.dataset_path, seed=cfg.seed,
                    tolerances=cfg.tolerances,
                    truncation_overrides=cfg.truncation_overrides)
    _write_report(cfg.output_path, command, cfg_dict, results, passed)
    print(f"{command}: {'pass' if passed else 'FAIL'} -> {cfg.output_path}")
    return EXIT_OK if passed else EXIT_ASSERT


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point: ``perfectsim {sample,tau-stats,check,verify}``.

Exit codes: 0 success, 1 configuration error, 2 backward scan cap exceeded,
3 a verification test failed. ``PERFECTSIM_MAX_BACK`` overrides ``max_back``.
Errors go to stderr as ``error: <code>: <message>``.
"""
from __future__ import annotations

import argparse
import io
import json
import math
import os
import re
import sys
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import __version__
from .coupling import DEFAULT_DEPTH_CAP, AkSequence, check_conditions
from .depth import ALGORITHMS, Sampler, martingale_diagnostic, regeneration_diagnostic
from .errors import ConfigError, DepthCapExceeded, PerfectSimError, UnsupportedKernel
from .hybrid import graph_conditions
from .kernels import AlternatingRenewalKernel, kernel_from_config
from .verify import (VerificationResult, empirical_law, measure_audit, stationary_oracle,
                     tv_distance, window_law)

FORMAT_VERSION = 1
_FIELDS = {"kernel", "algorithm", "coupling", "window", "seed", "replicates", "max_back",
           "depth_cap", "format", "reference_letter", "check", "verify"}
_CHECK_FIELDS = {"n_max", "regeneration_seeds", "regeneration_n"}
_VERIFY_FIELDS = {"samples", "window_length", "tv_threshold", "audit_depth", "audit_histories",
                  "martingale_seeds", "martingale_n"}


@dataclass
class RunConfig:
    kernel: object
    kernel_spec: dict
    algorithm: str = "cff"
    coupling: str = "modified"
    window: tuple = (0, 0)
    seeds: list = field(default_factory=lambda: [0])
    max_back: Optional[int] = None
    depth_cap: int = DEFAULT_DEPTH_CAP
    format: str = "csv"
    reference_letter: Optional[int] = None
    check: dict = field(default_factory=dict)
    verify: dict = field(default_factory=dict)

    def sampler(self) -> Sampler:
        ref = None
        if self.reference_letter is not None:
            ref = self.kernel.default_reference(self.reference_letter)
        env = os.environ.get("PERFECTSIM_MAX_BACK")
        max_back = int(env) if env else self.max_back
        return Sampler(self.kernel, self.algorithm, reference=ref, max_back=max_back,
                       depth_cap=self.depth_cap, coupling=self.coupling)


def _int(value, name, minimum=None):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"'{name}' must be an integer")
    if minimum is not None and value < minimum:
        raise ConfigError(f"'{name}' must be >= {minimum}")
    return value


def _sub(raw, allowed, name):
    if not isinstance(raw, dict):
        raise ConfigError(f"'{name}' must be an object")
    extra = set(raw) - allowed
    if extra:
        raise ConfigError(f"unknown field(s) in '{name}': {sorted(extra)}", code="config.unknown_field")
    return dict(raw)


def parse_seeds(text: str) -> list:
    m = re.fullmatch(r"\s*(-?\d+)\.\.(-?\d+)\s*", text)
    if not m:
        raise ConfigError(f"--seeds expects N..M, got {text!r}")
    lo, hi = int(m.group(1)), int(m.group(2))
    if hi < lo:
        raise ConfigError(f"--seeds range {text!r} is empty")
    return list(range(lo, hi + 1))


def load_config(raw: dict, seed: Optional[int] = None, seeds: Optional[str] = None,
                fmt: Optional[str] = None) -> RunConfig:
    raw = _sub(raw, _FIELDS, "config")
    if "kernel" not in raw:
        raise ConfigError("config needs a 'kernel'")
    kernel = kernel_from_config(raw["kernel"])
    algorithm = raw.get("algorithm", "cff")
    if algorithm not in ALGORITHMS:
        raise ConfigError(f"algorithm must be one of {ALGORITHMS}")
    coupling = raw.get("coupling", "modified")
    if coupling not in ("modified", "plain"):
        raise ConfigError("coupling must be 'modified' or 'plain'")
    window = raw.get("window", [0, 0])
    if (not isinstance(window, list) or len(window) != 2
            or not all(isinstance(x, int) and not isinstance(x, bool) for x in window)):
        raise ConfigError("window must be [m, n] with integers")
    if window[0] > window[1]:
        raise ConfigError(f"window [{window[0]}, {window[1]}] has m > n", code="window.invalid")
    if seeds is not None:
        seed_list = parse_seeds(seeds)
    else:
        first = seed if seed is not None else _int(raw.get("seed", 0), "seed", 0)
        reps = _int(raw.get("replicates", 1), "replicates", 1)
        seed_list = list(range(first, first + reps))
    if any(s < 0 for s in seed_list):
        raise ConfigError("seeds must be nonnegative")
    max_back = raw.get("max_back")
    if max_back is not None:
        _int(max_back, "max_back", 1)
    depth_cap = _int(raw.get("depth_cap", DEFAULT_DEPTH_CAP), "depth_cap", 1)
    out_format = fmt or raw.get("format", "csv")
    if out_format not in ("csv", "json"):
        raise ConfigError("format must be 'csv' or 'json'")
    ref = raw.get("reference_letter")
    if ref is not None:
        _int(ref, "reference_letter", 0)
        if ref >= kernel.alphabet.size:
            raise ConfigError("reference_letter outside the alphabet")
    check = _sub(raw.get("check", {}), _CHECK_FIELDS, "check")
    verify = _sub(raw.get("verify", {}), _VERIFY_FIELDS, "verify")
    a_seq = AkSequence(kernel, cap=depth_cap)
    if algorithm in ("cff", "adaptive") and a_seq[0] <= 0.0:
        raise ConfigError(f"{algorithm} needs a_0 > 0; use the hybrid algorithm",
                          code="kernel.unsupported")
    if algorithm == "hybrid" and a_seq[1] <= 0.0:
        raise ConfigError("hybrid needs a_1 > 0", code="kernel.unsupported")
    return RunConfig(kernel, raw["kernel"], algorithm, coupling, tuple(window), seed_list,
                     max_back, depth_cap, out_format, ref, check, verify)


# serialization

def fmt_float(x: float) -> str:
    if isinstance(x, float) and not math.isfinite(x):
        return "inf" if x > 0 else ("-inf" if x < 0 else "nan")
    return f"{float(x):.17g}"


class _Float(float):
    pass


def _prepare(obj):
    if isinstance(obj, (bool, type(None), str)):
        return obj
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _Float(float(obj))
    if isinstance(obj, dict):
        return {str(k): _prepare(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_prepare(v) for v in obj]
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj) -> str:
    """JSON with floats written at 17 significant digits."""
    def enc(o, indent=0):
        pad = "  " * (indent + 1)
        end = "  " * indent
        if isinstance(o, _Float):
            s = fmt_float(o)
            return s if s not in ("inf", "-inf", "nan") else json.dumps(s)
        if isinstance(o, dict):
            if not o:
                return "{}"
            items = [f"{pad}{json.dumps(k)}: {enc(v, indent + 1)}" for k, v in sorted(o.items())]
            return "{\n" + ",\n".join(items) + "\n" + end + "}"
        if isinstance(o, list):
            if not o:
                return "[]"
            if all(not isinstance(v, (dict, list)) for v in o):
                return "[" + ", ".join(enc(v, indent + 1) for v in o) + "]"
            return "[\n" + ",\n".join(pad + enc(v, indent + 1) for v in o) + "\n" + end + "]"
        return json.dumps(o)

    return enc(_prepare(obj)) + "\n"


def _csv(header: str, columns: list, rows: list) -> str:
    out = io.StringIO()
    out.write(f"# perfectsim {header} v{FORMAT_VERSION}\n")
    out.write(",".join(columns) + "\n")
    for row in rows:
        out.write(",".join(fmt_float(v) if isinstance(v, float) else str(v) for v in row) + "\n")
    return out.getvalue()


# commands

def cmd_sample(cfg: RunConfig) -> tuple:
    sampler = cfg.sampler()
    m, n = cfg.window
    runs = [sampler.sample(seed, m, n) for seed in cfg.seeds]
    if cfg.format == "json":
        body = dumps({"format": f"perfectsim sample v{FORMAT_VERSION}", "kernel": cfg.kernel.name,
                      "algorithm": cfg.algorithm, "window": [m, n],
                      "runs": [{"seed": r.seed, "tau_window": r.tau_window, "letters": r.labels}
                               for r in runs]})
    else:
        rows = [(r.seed, m, n, r.tau_window, " ".join(r.labels)) for r in runs]
        body = _csv("sample", ["seed", "window_start", "window_end", "tau_window", "letters"], rows)
    return 0, body


def cmd_tau_stats(cfg: RunConfig) -> tuple:
    sampler = cfg.sampler()
    anchor = cfg.window[1]
    results = [(seed, sampler.tau(seed, anchor, anchor, on_cap="return")) for seed in cfg.seeds]
    code = 2 if any(r.status != "coalesced" for _, r in results) else 0
    if cfg.format == "json":
        body = dumps({"format": f"perfectsim tau-stats v{FORMAT_VERSION}",
                      "rows": [{"seed": s, "anchor": anchor, "tau": r.tau, "status": r.status,
                                "uniforms_consumed": r.uniforms_consumed} for s, r in results]})
    else:
        rows = [(s, anchor, "" if r.tau is None else r.tau, r.status, r.uniforms_consumed)
                for s, r in results]
        body = _csv("tau-stats", ["seed", "anchor", "tau", "status", "uniforms_consumed"], rows)
    return code, body


def cmd_check(cfg: RunConfig) -> dict:
    kernel = cfg.kernel
    a_seq = AkSequence(kernel, cap=cfg.depth_cap)
    n_max = int(cfg.check.get("n_max", 100_000))
    rep = check_conditions(a_seq, n_max)
    report = {
        "kernel": kernel.name,
        "a_provenance": a_seq.provenance,
        "a_head": [a_seq[k] for k in range(6)],
        "conditions": rep.as_dict(),
        "condition_a": rep.divergence,
        "condition_b": rep.product_positive,
        "graph": graph_conditions(kernel).as_dict(),
    }
    seeds = int(cfg.check.get("regeneration_seeds", 10_000))
    n = int(cfg.check.get("regeneration_n", 50))
    regen = {}
    if a_seq[0] > 0.0:
        regen["cff"] = regeneration_diagnostic(kernel, "cff", seeds, n).as_dict()
        try:
            regen["adaptive"] = regeneration_diagnostic(kernel, "adaptive", seeds, n).as_dict()
        except UnsupportedKernel as exc:
            regen["adaptive"] = {"skipped": str(exc)}
    report["regeneration"] = regen
    return report


def _tv_threshold(law: dict, samples: int) -> float:
    # three times the expected TV of a multinomial sample of this size
    p = np.array(list(law.values()))
    return float(3 * 0.5 * np.sum(np.sqrt(2 * p * (1 - p) / (math.pi * samples))))


def cmd_verify(cfg: RunConfig) -> list:
    kernel = cfg.kernel
    v = cfg.verify
    results = []
    depth = int(v.get("audit_depth", 20))
    audit = measure_audit(kernel, depth, int(v.get("audit_histories", 200)))
    results.append(VerificationResult(f"measure_audit_depth_{depth}", audit, 1e-12, audit <= 1e-12))
    samples = int(v.get("samples", 20_000))
    length = int(v.get("window_length", 2))
    sampler = cfg.sampler()
    need_samples = kernel.memory is not None or _is_symmetric_renewal(kernel)
    windows = []
    if need_samples:
        first = cfg.seeds[0]
        windows = [sampler.sample(s, 1 - length, 0).letters for s in range(first, first + samples)]
    if kernel.memory is not None:
        law = window_law(stationary_oracle(kernel), length)
        thr = float(v.get("tv_threshold", _tv_threshold(law, samples)))
        tv = tv_distance(empirical_law(windows), law)
        results.append(VerificationResult(f"oracle_tv_window_{length}", tv, thr, tv <= thr))
    if _is_symmetric_renewal(kernel):
        plus = sum(w[-1] for w in windows) / len(windows)
        thr = 4 * math.sqrt(0.25 / len(windows))
        results.append(VerificationResult("marginal_half", abs(plus - 0.5), thr, abs(plus - 0.5) <= thr))
    if AkSequence(kernel)[0] > 0.0 and not kernel.has_forbidden_words:
        try:
            est = martingale_diagnostic(kernel, int(v.get("martingale_seeds", 20_000)),
                                        int(v.get("martingale_n", 20)))
            dev = abs(est.mean - 1.0)
            results.append(VerificationResult(f"martingale_mean_n_{est.n}", dev, 3 * est.stderr,
                                              dev <= 3 * est.stderr))
        except UnsupportedKernel:
            pass
    return results


def _is_symmetric_renewal(kernel) -> bool:
    return (isinstance(kernel, AlternatingRenewalKernel)
            and kernel.rates[0].config() == kernel.rates[1].config())


def _emit(body: str, out: Optional[str]) -> None:
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(body)
    else:
        sys.stdout.write(body)


def _fail(exc: PerfectSimError) -> int:
    sys.stderr.write(f"error: {exc.code}: {exc}\n")
    return 2 if isinstance(exc, DepthCapExceeded) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="perfectsim", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"perfectsim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("sample", "tau-stats", "check", "verify"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON run configuration")
        group = p.add_mutually_exclusive_group()
        group.add_argument("--seed", type=int, help="first seed (with 'replicates' from the config)")
        group.add_argument("--seeds", help="inclusive seed range N..M")
        p.add_argument("--out", help="write output here instead of stdout")
        p.add_argument("--format", choices=("csv", "json"))
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        try:
            with open(args.config, encoding="utf-8") as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        cfg = load_config(raw, args.seed, args.seeds, args.format)
        if args.command == "sample":
            code, body = cmd_sample(cfg)
        elif args.command == "tau-stats":
            code, body = cmd_tau_stats(cfg)
            if code == 2:
                sys.stderr.write("error: cap.exceeded: some seeds hit the backward scan cap\n")
        elif args.command == "check":
            code, body = 0, dumps(cmd_check(cfg))
        else:
            results = cmd_verify(cfg)
            code, body = 0, dumps([r.as_dict() for r in results])
            failed = [r.test for r in results if not r.passed]
            if failed:
                code = 3
                sys.stderr.write(f"error: verify.failed: {', '.join(failed)}\n")
        _emit(body, args.out)
        return code
    except PerfectSimError as exc:
        return _fail(exc)


if __name__ == "__main__":
    sys.exit(main())

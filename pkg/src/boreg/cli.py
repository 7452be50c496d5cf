"""Command-line entry point.

Exit codes: 0 success, 1 failed check or unexpected error, 2 configuration
or usage error, 3 blow-up, 4 periodic-seam violation.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import runner
from .config import ConfigError, RunConfig, load, preset_names
from .evolution import BlowUpError
from .spectral import ContractViolation, SeamViolation

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2
EXIT_BLOWUP = 3
EXIT_SEAM = 4

log = logging.getLogger("boreg")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="boreg", description="Benjamin-Ono regularity experiments")
    sub = p.add_subparsers(dest="command", required=True)
    helps = {
        "simulate": "integrate one scenario with windowed diagnostics",
        "sweep": "run a parameter lattice concurrently",
        "verify-cutoff": "certify the cut-off family properties",
        "verify-inequalities": "estimate commutator, Leibniz and interpolation constants",
        "convergence": "dt, N and mollification ladders with fitted orders",
    }
    for name, text in helps.items():
        s = sub.add_parser(name, help=text)
        s.add_argument("--config", help=f"TOML/JSON file or preset:<name> ({', '.join(preset_names())})")
        s.add_argument("--out", help="output directory (default: output.dir from the config)")
        s.add_argument("--seed", type=int, help="override the config seed")
        s.add_argument("--quiet", action="store_true", help="only print errors")
        if name == "sweep":
            s.add_argument("--workers", type=int, help="worker processes (default: CPU count)")
    return p


def _summary(command: str, result) -> str:
    if command == "simulate":
        m = result.manifest
        lines = [f"dt={m['dt']:.6g} steps={m['n_steps']}"]
        for label, s in m["summary"].items():
            lines.append(f"{label}: sup E_m={s['sup_E_m']:.6g} cum F_half={s['cum_F_half']:.6g} sup tail={s['sup_tail']:.6g}")
        return "\n".join(lines)
    if command == "sweep":
        ok = sum(r["status"] == "ok" for r in result)
        return f"{ok}/{len(result)} lattice points ok"
    flat = {k: v for k, v in result.items() if not isinstance(v, (dict, list))}
    for name, sub in result.items():
        if isinstance(sub, dict):
            flat.update({f"{name}.{k}": v for k, v in sub.items() if k.endswith("order") or k.startswith("monotone")})
    return json.dumps(flat, default=str)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.INFO, format="%(message)s")
    try:
        cfg: RunConfig = load(args.config).with_seed(args.seed)
        out = Path(args.out or cfg.output.dir)
        if args.command == "simulate":
            result = runner.simulate(cfg, out)
            passed = True
        elif args.command == "sweep":
            result = runner.sweep(cfg, out, args.workers)
            passed = True
        elif args.command == "verify-cutoff":
            result = runner.verify_cutoffs(cfg, out)
            passed = result["all_passed"]
        elif args.command == "verify-inequalities":
            result = runner.verify_inequalities(cfg, out)
            passed = result["all_passed"]
        else:
            result = runner.convergence(cfg, out)
            passed = True
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except BlowUpError as exc:
        log.error("blow-up: %s", exc)
        return EXIT_BLOWUP
    except SeamViolation as exc:
        log.error("seam violation: %s", exc)
        return EXIT_SEAM
    except ContractViolation as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - last-resort exit code
        log.error("error: %s: %s", type(exc).__name__, exc)
        return EXIT_FAILED
    log.info(_summary(args.command, result))
    log.info("outputs written to %s", out)
    return EXIT_OK if passed else EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())

"""Command line entry point ``dwb``.

Exit codes: 0 success, 2 configuration error, 3 solver or rank error, 4 I/O error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace

from . import experiments
from .config import ConfigError, ScenarioConfig
from .qp_core import InfeasibleError, RankDeficientError

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_IO = 0, 2, 3, 4


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="scenario JSON file (defaults are used when omitted)")
    common.add_argument("--seed", type=int, help="master seed override")
    common.add_argument("--out-dir", help="output directory override")
    common.add_argument("--trials", type=int, help="number of Monte-Carlo trials")
    common.add_argument("--quiet", action="store_true", help="suppress the summary on stdout")

    p = argparse.ArgumentParser(prog="dwb", description="Deceptive wireless beamforming simulator")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("array-response", parents=[common], help="beampatterns of DWB and nulling")
    sweep = sub.add_parser("power-sweep", parents=[common], help="Monte-Carlo power comparison")
    sweep.add_argument("--full", action="store_true", help="run 1000 trials")
    sub.add_parser("deceive", parents=[common], help="end-to-end range/Doppler deception demo")
    sub.add_parser("solve", parents=[common], help="solve one instance and dump S, X_e, diagnostics")
    return p


def _load_config(args) -> ScenarioConfig:
    cfg = ScenarioConfig.load(args.config) if args.config else ScenarioConfig()
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.out_dir is not None:
        updates["output_dir"] = args.out_dir
    if args.trials is not None:
        updates["n_trials"] = args.trials
    if getattr(args, "full", False):
        updates["n_trials"] = 1000
    return replace(cfg, **updates) if updates else cfg


def _say(args, text: str) -> None:
    if not args.quiet:
        print(text)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _load_config(args)
        out = cfg.output_dir
        if args.command == "array-response":
            res = experiments.array_response_experiment(cfg, out)
            _say(args, json.dumps({"psl_db": res["psl_db"], "peak_deg": res["peak_deg"]}, indent=2))
        elif args.command == "power-sweep":
            records = experiments.power_sweep(cfg, out)
            for row in experiments.summarize(records):
                _say(args, "NT={n_t} Nc={n_c} Ne={n_e} SNR={snr_db:g}dB  dwb={dwb_mean_w:.4g} W  "
                           "nulling={nulling_mean_w:.4g} W  saving={saving_pct:.1f}%  errors={errors}"
                     .format(**row))
        elif args.command == "deceive":
            rep = experiments.deception_demo(cfg, out)
            rep.pop("maps")
            _say(args, json.dumps(rep, indent=2, sort_keys=True))
        elif args.command == "solve":
            res = experiments.solve_instance(cfg, out)
            _say(args, json.dumps(res["diagnostics"], indent=2, sort_keys=True, default=float))
    except ConfigError as exc:
        print(f"dwb: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (RankDeficientError, InfeasibleError) as exc:
        print(f"dwb: solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"dwb: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

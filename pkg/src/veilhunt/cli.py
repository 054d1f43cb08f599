"""Command-line interface.

Subcommands: synth (write a dataset directory), run (dataset -> outputs),
eval (groups.json + truth -> metrics.csv), attack (transcript.jsonl ->
attack.json), bench (sweep gateway counts and key sizes -> timing.csv).
Exit codes: 0 success, 2 protocol abort, 3 invalid configuration.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .attack import leakage_attack
from .config import ConfigError, build_configs, known_keys, parse_config_file
from .coordinator import SessionError
from .metrics import evaluate, groups_from_doc, write_metrics_csv
from .model import load_taxonomy
from .pipeline import run_pipeline
from .ranking import ProtocolAbort
from .synth import SynthError, load_dataset, save_dataset, synthesize

EXIT_OK = 0
EXIT_PROTOCOL = 2
EXIT_CONFIG = 3


def _collect_values(args) -> dict[str, str]:
    values: dict[str, str] = {}
    if args.config:
        values.update(parse_config_file(args.config))
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, _, value = item.partition("=")
        values[key.strip()] = value.strip()
    for name in ("rng_seed", "num_gateways", "planted_topics", "leak_fraction", "key_bits", "theta"):
        flag = getattr(args, name, None)
        if flag is not None:
            values[name] = str(flag)
    if getattr(args, "classic_dice", False):
        values["classic_dice"] = "true"
    return values


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key=value configuration file")
    parser.add_argument(
        "--set",
        action="append",
        metavar="KEY=VALUE",
        help=f"override one parameter (known keys: {', '.join(known_keys())})",
    )
    parser.add_argument("--rng-seed", dest="rng_seed", type=int)
    parser.add_argument("--num-gateways", dest="num_gateways", type=int)
    parser.add_argument("--planted-topics", dest="planted_topics", type=int)
    parser.add_argument("--leak-fraction", dest="leak_fraction", type=float)
    parser.add_argument("--key-bits", dest="key_bits", type=int)
    parser.add_argument("--theta", dest="theta", type=float)
    parser.add_argument(
        "--classic-dice",
        action="store_true",
        help="cluster on classical Dice (both readings are always reported side by side)",
    )


def cmd_synth(args) -> int:
    synth_config, _ = build_configs(_collect_values(args))
    dataset = synthesize(synth_config)
    save_dataset(dataset, args.out)
    print(f"wrote dataset for {synth_config.num_gateways} gateways to {args.out}")
    return EXIT_OK


def cmd_run(args) -> int:
    values = _collect_values(args)
    _, params = build_configs(values)
    dataset = load_dataset(args.dataset)
    result = run_pipeline(dataset, params, out_dir=args.out, record=args.record)
    n_groups = sum(len(vc.groups) for vc in result.virtual_groups)
    print(
        f"{len(result.virtual_groups)} virtual groups, {n_groups} real groups; "
        f"outputs in {args.out}"
    )
    return EXIT_OK


def cmd_eval(args) -> int:
    groups_doc = json.loads(Path(args.groups).read_text())
    dataset_truth = json.loads(Path(args.truth).read_text())
    from .synth import GroundTruth

    truth = GroundTruth(
        dataset_truth["topic_of"],
        {k: tuple(v) for k, v in dataset_truth["topic_vocab"].items()},
        tuple(dataset_truth["background_vocab"]),
        {k: tuple(v) for k, v in dataset_truth["sensitive_tokens"].items()},
        {k: tuple(v) for k, v in dataset_truth["leaked_tokens"].items()},
    )
    evaluation = evaluate(groups_from_doc(groups_doc), truth)
    write_metrics_csv(evaluation, args.out)
    print(
        f"macro precision {evaluation.macro_precision:.3f} "
        f"recall {evaluation.macro_recall:.3f} f1 {evaluation.macro_f1:.3f} -> {args.out}"
    )
    return EXIT_OK


def cmd_attack(args) -> int:
    lines = Path(args.transcript).read_text().splitlines()
    taxonomy = load_taxonomy(args.taxonomy)
    truth = json.loads(Path(args.truth).read_text())
    leaked = {tok for toks in truth["leaked_tokens"].values() for tok in toks}
    sensitive = {tok for toks in truth["sensitive_tokens"].values() for tok in toks}
    report = leakage_attack(lines, taxonomy.nodes, leaked, sensitive)
    Path(args.out).write_text(report.to_json() + "\n")
    print(
        f"recovered {len(report.hypernyms_recovered)} hypernyms, "
        f"{len(report.leaked_recovered)} leaked, "
        f"{len(report.suppressed_recovered)} suppressed -> {args.out}"
    )
    return EXIT_OK


def cmd_bench(args) -> int:
    values = _collect_values(args)
    rows = []
    out_path = Path(args.out)
    for gateways in args.gateways:
        for key_bits in args.bits:
            sweep = dict(values)
            sweep["num_gateways"] = str(gateways)
            sweep["key_bits"] = str(key_bits)
            synth_config, params = build_configs(sweep)
            dataset = synthesize(synth_config)
            result = run_pipeline(dataset, params, out_dir=None, record=False)
            for phase, seconds in result.timings.items():
                rows.append((gateways, key_bits, phase, seconds))
            print(f"gateways={gateways} key_bits={key_bits} total={result.timings['total']:.2f}s")
    with open(out_path, "w", newline="", encoding="utf-8") as fh:
        import csv

        writer = csv.writer(fh)
        writer.writerow(["gateways", "key_bits", "phase", "seconds"])
        for row in rows:
            writer.writerow([row[0], row[1], row[2], f"{row[3]:.6f}"])
    print(f"wrote {out_path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="veilhunt", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="synthesize a dataset directory")
    _add_config_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("run", help="run the full two-stage pipeline")
    _add_config_flags(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--record", action="store_true", help="dump transcript.jsonl")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("eval", help="score groups.json against the planted truth")
    p.add_argument("--groups", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("attack", help="dictionary attack on a recorded transcript")
    p.add_argument("--transcript", required=True)
    p.add_argument("--taxonomy", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("bench", help="sweep gateway count and key size")
    _add_config_flags(p)
    p.add_argument("--gateways", type=lambda s: [int(x) for x in s.split(",")], default=[4, 8])
    p.add_argument("--bits", type=lambda s: [int(x) for x in s.split(",")], default=[512])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, SynthError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ProtocolAbort, SessionError) as exc:
        print(f"protocol abort: {exc}", file=sys.stderr)
        return EXIT_PROTOCOL


if __name__ == "__main__":
    sys.exit(main())

"""``mumkit`` command line: data generation, training, evaluation, ablations,
mix visualisation and gradient checks.

Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 numeric failure.
"""

import argparse
import sys
from pathlib import Path

import numpy as np
from dotenv import find_dotenv, load_dotenv
from loguru import logger
from pydantic import ValidationError

from mumkit.data.dataset import generate_dataset, load_dataset, save_dataset
from mumkit.errors import ConfigurationError, NumericError
from mumkit.mixing import generate_mask, mask_to_text, mix
from mumkit.model.checks import run_gradcheck_suite
from mumkit.model.posenet import MixPlan, PoseNet
from mumkit.tensorgrid import FeatureBatch
from mumkit.training.ablation import DEFAULT_SEEDS, GRIDS, run_ablation
from mumkit.training.experiment import evaluate_checkpoint, run_experiment
from mumkit.utils.config import RunConfig, apply_env_overrides, describe_defaults, load_run_config
from mumkit.utils.logging import configure_logging
from mumkit.utils.pixmap import montage, write_scaled_pgm
from mumkit.utils.version import version_stamp

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NUMERIC = 4


def _load(config_path: str) -> RunConfig:
    return apply_env_overrides(load_run_config(config_path))


def cmd_gen_data(args: argparse.Namespace) -> int:
    cfg = _load(args.config)
    save_dataset(generate_dataset(cfg.data), args.out)
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    configure_logging(Path(args.out) / "logs")
    cfg = _load(args.config)
    metrics = run_experiment(cfg, args.data, args.out)
    last = metrics.iloc[-1]
    logger.info(
        f"Finished {len(metrics)} epochs: pck@0.1={last['pck01']:.4f} "
        f"teacher pck@0.1={last['teacher_pck01']:.4f}"
    )
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    results = evaluate_checkpoint(args.ckpt, args.data)
    print("network,pck01,pck02,map")
    for who, r in results.items():
        print(f"{who},{r.pck01!r},{r.pck02!r},{r.map!r}")
    return EXIT_OK


def cmd_ablate(args: argparse.Namespace) -> int:
    configure_logging(Path(args.out) / "logs")
    cfg = _load(args.config)
    seeds = tuple(int(s) for s in args.seeds.split(",")) if args.seeds else DEFAULT_SEEDS
    if len(seeds) < 3:
        logger.warning(f"Ablation with {len(seeds)} seeds; summaries are meant for >= 3")
    summary = run_ablation(args.grid, cfg, args.data, args.out, seeds=seeds, workers=args.workers)
    print(summary.to_csv(index=False), end="")
    return EXIT_OK


def cmd_viz_mix(args: argparse.Namespace) -> int:
    """One group of labeled images: inputs, the image-level mix, and every stage mix.

    Every candidate stage is mixed here regardless of mix_prob so each site
    gets a picture.
    """
    cfg = _load(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    split = load_dataset(args.data)
    n_group = cfg.mix.n_group
    if len(split.labeled) < n_group:
        raise ConfigurationError(
            f"viz-mix needs {n_group} labeled images, dataset has {len(split.labeled)}"
        )
    images = FeatureBatch(np.stack([s.image for s in split.labeled[:n_group]])[:, None])
    net = PoseNet(cfg.model)
    cfg.model.check_mix_divisibility(cfg.mix)
    rng = np.random.default_rng(cfg.mix.seed)
    plan = MixPlan(image_mask=generate_mask(cfg.mix, rng))
    for k in cfg.model.mix_stages():
        plan.decisions[k] = True
        plan.stage_masks[k] = generate_mask(cfg.mix, rng)

    mixed = mix(images, plan.image_mask)  # type: ignore[arg-type]
    for g in range(n_group):
        write_scaled_pgm(out / f"input_{g}.pgm", images.data[g, 0])
        write_scaled_pgm(out / f"image_mixed_{g}.pgm", mixed.data[g, 0])
    _, _, trace = net.forward_student(images, cfg.mix, plan=plan)
    for site, features in trace.taps:
        if site == "input":
            continue
        for g in range(n_group):
            write_scaled_pgm(out / f"{site}_member{g}.pgm", montage(features.data[g], columns=8))

    texts = [f"# input\n{mask_to_text(plan.image_mask)}"]  # type: ignore[arg-type]
    texts += [f"# layer{k}\n{mask_to_text(m)}" for k, m in sorted(plan.stage_masks.items())]
    (out / "masks.txt").write_text("\n".join(texts), encoding="utf-8")
    logger.info(f"Wrote mix visualisations for {n_group} images to {out}")
    return EXIT_OK


def cmd_gradcheck(args: argparse.Namespace) -> int:
    reports = run_gradcheck_suite()
    failed = [r for r in reports if not r.passed]
    for r in reports:
        print(r.summary())
    if failed:
        raise NumericError(f"gradient check failed: {', '.join(r.name for r in failed)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mumkit",
        description="Pose-MUM semi-supervised keypoint training on synthetic figures.",
        epilog="Configuration keys and their defaults:\n\n" + describe_defaults()
        + "\nMUMKIT_SEED (environment or .env) overrides train.seed and data.seed.",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=version_stamp())
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate the synthetic dataset (SPD1)")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train one run")
    p.add_argument("--config", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on the validation split")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="run a named ablation grid across seeds")
    p.add_argument("--config", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--grid", default="teacher", choices=sorted(GRIDS))
    p.add_argument("--seeds", default="", help="comma separated (default 0,1,2)")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("viz-mix", help="write mixed-tile pictures as PGM files")
    p.add_argument("--config", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_viz_mix)

    p = sub.add_parser("gradcheck", help="finite-difference check of every layer and the network")
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv: list[str] | None = None) -> int:
    load_dotenv(find_dotenv(usecwd=True))
    args = build_parser().parse_args(argv)
    try:
        return int(args.func(args))
    except (ConfigurationError, ValidationError) as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG
    except NumericError as e:
        logger.error(f"Numeric failure: {e}" + (f" (dump: {e.dump_path})" if e.dump_path else ""))
        return EXIT_NUMERIC
    except OSError as e:
        logger.error(f"I/O error: {e}")
        return EXIT_IO
    except ValueError as e:
        logger.error(f"Invalid input: {e}")
        return EXIT_CONFIG
    except Exception:
        logger.exception("Unexpected failure")
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())

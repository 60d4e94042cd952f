"""Command-line entry point: extract, train, evaluate, predict, selftest."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

import numpy as np

from . import anfis as anfis_mod
from . import calibrate as cal_mod
from . import svm as svm_mod
from .errors import SpliceFuseError
from .features import glcm, haar_dwt2, haar_idwt2
from .pipeline import (EXIT_ERROR, PipelineConfig, cmd_evaluate, cmd_extract,
                       cmd_predict, cmd_train, k_label)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="splicefuse",
        description="Fusion of three image-splicing detectors with a neuro-fuzzy combiner",
    )
    parser.add_argument("--config", help="path to a key=value pipeline config file")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--workers", type=int, help="parallel (run, k) cells")
    parser.add_argument("--out", help="output directory (else config, else $SPLICEFUSE_OUT)")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("extract", help="compute the three feature CSVs from the dataset root")
    sub.add_parser("train", help="train every (run, k) cell from extracted features")
    sub.add_parser("evaluate", help="aggregate cell reports into the two metric tables")
    predict = sub.add_parser("predict", help="classify one 128x128 grayscale block")
    predict.add_argument("bundle", help="bundle directory from a trained cell")
    predict.add_argument("image", help="path to the block image (PGM or PNG)")
    sub.add_parser("selftest", help="run quick built-in numerical sanity checks")
    return parser


def _load_config(args) -> PipelineConfig:
    config = PipelineConfig.from_file(args.config) if args.config else PipelineConfig()
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.workers is not None:
        overrides["workers"] = args.workers
    if args.out is not None:
        overrides["out_dir"] = args.out
    return replace(config, **overrides) if overrides else config


def _selftest() -> int:
    checks = []

    def check(name, fn):
        try:
            fn()
            checks.append((name, None))
        except Exception as exc:
            checks.append((name, f"{type(exc).__name__}: {exc}"))

    def haar_roundtrip():
        rng = np.random.default_rng(7)
        m = rng.random((16, 16)) * 255
        back = haar_idwt2(haar_dwt2(m, 3))
        assert np.abs(back - m).max() < 1e-9

    def glcm_pairs():
        g = glcm(np.array([[0, 0], [1, 1]]), 2, (1, 0))
        assert np.array_equal(g.counts, [[1, 0], [0, 1]])

    def rbf_value():
        assert abs(svm_mod.rbf_kernel([0.0, 0.0], [1.0, 0.0], 1.0) - np.exp(-1.0)) < 1e-12

    def smo_two_points():
        model = svm_mod.train_svm([[0.0], [1.0]], [1, 0],
                                  svm_mod.KernelParams(c=1e6, gamma=1.0), tol=1e-8)
        f = svm_mod.decision_values(model, [[0.0], [1.0], [0.5]])
        assert f[0] > 0 > f[1] and abs(f[2]) < 1e-6

    def sigmoid_fit():
        f = np.concatenate([np.full(10, 1.0), np.full(10, -1.0)])
        y = np.concatenate([np.ones(10, dtype=int), np.zeros(10, dtype=int)])
        calibrator = cal_mod.fit_sigmoid(f, y)
        assert calibrator.a < 0
        assert cal_mod.sigmoid(calibrator, 1.0) > 0.9 > 0.5 > cal_mod.sigmoid(calibrator, -1.0)

    def anfis_gradient():
        rng = np.random.default_rng(3)
        rows = np.column_stack([rng.random((30, 3)), rng.random(30)])
        model = anfis_mod.init_fis(rows, radius=0.7)
        x, y = rows[:, :3], rows[:, 3]
        d_center, _ = anfis_mod.premise_gradients(model, x, y)
        h = 1e-5
        centers = model.centers()
        probe = centers.copy()
        probe[0, 0] += h
        model.set_premises(probe, model.sigmas())
        up = anfis_mod.rmse(model, x, y)
        probe[0, 0] -= 2 * h
        model.set_premises(probe, model.sigmas())
        down = anfis_mod.rmse(model, x, y)
        fd = (up - down) / (2 * h)
        assert abs(fd - d_center[0, 0]) <= 1e-5 * max(abs(fd), 1e-8)

    def threshold_rule():
        rule = anfis_mod.FuzzyRule(
            mfs=[anfis_mod.GaussianMf(0.5, 1.0) for _ in range(3)],
            consequent=np.array([0.5]),
        )
        model = anfis_mod.AnfisModel([rule], "constant")
        verdict, value = anfis_mod.fused_verdict(model, [0.2, 0.4, 0.9])
        assert value == 0.5 and verdict == 0

    check("haar_roundtrip", haar_roundtrip)
    check("glcm_pair_counts", glcm_pairs)
    check("rbf_kernel_value", rbf_value)
    check("smo_two_point_symmetry", smo_two_points)
    check("sigmoid_fit_separated", sigmoid_fit)
    check("anfis_premise_gradient", anfis_gradient)
    check("threshold_strictly_greater", threshold_rule)

    failed = 0
    for name, error in checks:
        if error is None:
            print(f"PASS {name}")
        else:
            print(f"FAIL {name}: {error}")
            failed += 1
    return 1 if failed else 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "selftest":
        return _selftest()
    if args.command == "predict":
        outcome = cmd_predict(args.bundle, args.image)
        for line in outcome.lines:
            print(line)
        return outcome.exit_code
    try:
        config = _load_config(args)
        if args.command == "extract":
            result = cmd_extract(config)
            print(f"corpus_size={result['corpus_size']} rejected={result['rejected']}")
            for tool, path in result["csv_paths"].items():
                print(f"wrote {path}")
        elif args.command == "train":
            outcomes = cmd_train(config)
            ok = sum(1 for o in outcomes if o.status == "ok")
            print(f"cells={len(outcomes)} ok={ok} failed={len(outcomes) - ok}")
            for outcome in outcomes:
                print(f"run{outcome.run_index} k={k_label(outcome.k)} {outcome.status}"
                      + (f" ({outcome.error})" if outcome.error else ""))
        elif args.command == "evaluate":
            result = cmd_evaluate(config)
            print(f"aggregated {result['reports']} reports")
            for metric, path in result["paths"].items():
                print(f"wrote {path}")
    except (SpliceFuseError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return 0


if __name__ == "__main__":
    sys.exit(main())

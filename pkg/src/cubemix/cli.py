"""Batch command-line entry points.

Subcommands: gen-model, sample, learn-subcubes, learn-products, eval-tvd,
sq-demo, sdt-learn, bench.  Every command re-emits its full run configuration
(including the exact thresholds in effect) inside the report it writes, so
runs are auditable and reproducible byte-for-byte from config plus seed.

Exit codes: 0 success, 1 module error, 2 configuration validation failure.
"""

from __future__ import annotations

import argparse
import itertools
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import io as cio
from .bruteforce import tvd_bruteforce
from .config import LearnConfig, moment_degree_cap
from .errors import CubemixError
from .linalg import moment_rows, sigma_inf_min
from .models import ProductMixture, SubcubeMixture, sample as model_sample
from .oracles import EmpiricalOracle
from .rng import child_seed, generator
from .sdt import (
    bayes_optimal_error,
    classifier_error,
    learn_sdt_classifier,
    random_sdt,
    sdt_sample,
)
from .sq import build_instance, embed_instance, instance_stats
from .tree import ModelSampleSource, NListFail, PoolSampleSource, n_list, scheffe_select
from . import product as cproduct


def _run_config(args: argparse.Namespace) -> dict:
    out = {k: v for k, v in vars(args).items() if k != "func"}
    return {k: (str(v) if isinstance(v, Path) else v) for k, v in out.items()}


def gen_random_model(
    kind: str,
    n: int,
    k: int,
    seed: int,
    uniform_bias: float = 0.34,
    nondegenerate: bool = False,
    sigma_threshold: float = 1e-3,
    probe_margin: float = 0.05,
    max_tries: int = 100,
):
    """Seeded random model; optional non-degeneracy rejection loop.

    Subcube entries are drawn from {0, 1/2, 1} with P(1/2) = uniform_bias.
    With ``nondegenerate``, resamples until (a) the moment-row matrix up to
    the span degree has sigma_inf_min >= sigma_threshold and, for subcubes,
    (b) an exact-oracle GrowByOne pass with the InSpan floor raised to
    ``probe_margin`` certifies the model's full numeric rank (the operational
    margin the sampled learner needs).  At most ``max_tries`` attempts; on
    exhaustion the last model is returned with a warning flag.
    """
    from .oracles import ExactOracle
    from .subcube import GrowFailure, grow_by_one

    rng_seed = seed
    model = None
    for attempt in range(max_tries if nondegenerate else 1):
        rng = generator(child_seed(rng_seed, "gen", attempt))
        raw = rng.dirichlet(np.ones(k) * 2.0)
        weights = np.round(raw, 9)
        weights[-1] = 1.0 - weights[:-1].sum()
        if kind == "subcube":
            probs = [(1 - uniform_bias) / 2, uniform_bias, (1 - uniform_bias) / 2]
            marg = rng.choice([0.0, 0.5, 1.0], size=(n, k), p=probs)
            model = SubcubeMixture(weights, marg)
        else:
            model = ProductMixture(weights, rng.random((n, k)))
        if not nondegenerate:
            return model, False
        subsets = [
            S
            for size in range(0, min(moment_degree_cap(k), n) + 1)
            for S in itertools.combinations(range(n), size)
        ][:2000]
        M = moment_rows(model.marginals, subsets)
        if sigma_inf_min(M) < sigma_threshold:
            continue
        if kind == "subcube":
            rank = int(np.linalg.matrix_rank(M, tol=1e-8))
            probe = LearnConfig(inspan_floor=probe_margin)
            grown = grow_by_one(ExactOracle(model), k, config=probe)
            if isinstance(grown, GrowFailure) or grown.r != rank:
                continue
        return model, False
    return model, True


def _cmd_gen_model(args) -> int:
    if args.kind == "sdt":
        tree = random_sdt(args.n, args.k, args.s, args.seed, dyadic=not args.arbitrary_probs)
        cio.write_sdt(args.out, tree)
        report = {
            "run_config": _run_config(args),
            "leaf_count": tree.leaf_count,
            "stochastic_depth": tree.stochastic_depth,
        }
    else:
        model, degraded = gen_random_model(
            args.kind,
            args.n,
            args.k,
            args.seed,
            uniform_bias=args.uniform_bias,
            nondegenerate=args.nondegenerate,
            sigma_threshold=args.sigma_threshold,
        )
        cio.write_model(args.out, model)
        report = {"run_config": _run_config(args), "degenerate_warning": degraded}
        if degraded:
            print("warning: non-degeneracy rejection loop exhausted", file=sys.stderr)
    if args.report:
        cio.write_report(args.report, report)
    return 0


def _cmd_sample(args) -> int:
    model = cio.read_model(args.model)
    xs = model_sample(model, args.seed, args.count)
    cio.write_samples(args.out, xs)
    return 0


def _moment_residual_report(tree_or_model, oracle: EmpiricalOracle, k: int) -> list:
    cap = min(moment_degree_cap(k), oracle.n, 4)
    rows = []
    from .bruteforce import prob_table, all_points

    table = prob_table(tree_or_model, oracle.n) if oracle.n <= 20 else None
    pts = all_points(oracle.n) if table is not None else None
    for size in range(1, cap + 1):
        for S in itertools.combinations(range(oracle.n), size):
            est = oracle.moment(S)
            if table is not None:
                mask = np.all(pts[:, list(S)] == 1, axis=1)
                learned = float(table[mask].sum())
            else:
                learned = None
            rows.append({"subset": list(S), "empirical": est, "learned": learned})
    return rows


def _cmd_learn_subcubes(args) -> int:
    xs, _ = cio.read_samples(args.samples)
    config = LearnConfig(epsilon=args.epsilon, node_sample_count=xs.shape[0])
    source = PoolSampleSource(xs)
    tree = n_list(source, (), (), args.k, config, seed=args.seed, learner="subcube")
    if isinstance(tree, NListFail):
        raise CubemixError(f"learning failed: {tree.reason}")
    cio.write_sampling_tree(args.out, tree)
    oracle = EmpiricalOracle(xs, confidence=config.oracle_confidence)
    report = {
        "run_config": _run_config(args),
        "thresholds": {
            "inspan": config.inspan_threshold(args.k, oracle.tolerance),
            "verify": config.verify_threshold_for(args.k, oracle.tolerance),
            "weight_floor": config.weight_floor_for(args.k),
            "oracle_tolerance": oracle.tolerance,
        },
        "tree_depth": tree.depth(),
        "moments": _moment_residual_report(tree, oracle, args.k),
    }
    if args.report:
        cio.write_report(args.report, report)
    return 0


def _cmd_learn_products(args) -> int:
    xs, _ = cio.read_samples(args.samples)
    config = LearnConfig(epsilon=args.epsilon, node_sample_count=xs.shape[0])
    oracle = EmpiricalOracle(xs, confidence=config.oracle_confidence)
    grid = cproduct.GridSpec(entry_step=args.entry_step, weight_step=args.weight_step)
    out = cproduct.nondegenerate_learn_products(oracle, args.k, grid, config)
    if not isinstance(out, cproduct.CandidateList) or not out.mixtures:
        raise CubemixError("product learner produced no candidates")
    best = scheffe_select(out.mixtures, xs, args.epsilon, cap=config.bruteforce_cap)
    model = out.mixtures[best]
    cio.write_model(args.out, model)
    report = {
        "run_config": _run_config(args),
        "candidates": len(out.mixtures),
        "enumerated": out.enumerated,
        "truncated": out.truncated,
        "selected_index": best,
        "moments": _moment_residual_report(model, oracle, args.k),
    }
    if args.report:
        cio.write_report(args.report, report)
    return 0


def _read_distribution(path: Path):
    data = json.loads(Path(path).read_text())
    if "root" in data:
        return cio.read_sampling_tree(path)
    return cio.read_model(path)


def _cmd_eval_tvd(args) -> int:
    d1 = _read_distribution(args.first)
    d2 = _read_distribution(args.second)
    n = d1.n
    value = tvd_bruteforce(d1, d2, n, cap=args.cap)
    print(f"{value:.12f}")
    if args.report:
        cio.write_report(args.report, {"run_config": _run_config(args), "tvd": value})
    return 0


def _cmd_sq_demo(args) -> int:
    inst = build_instance(args.m)
    n = args.n if args.n is not None else args.m + 2
    I = tuple(range(args.m))
    J = tuple(range(1, args.m + 1))
    stats = instance_stats(inst, n, I, J)
    embedded = embed_instance(inst, n, I)
    cio.write_model(args.out, embedded)
    moments = []
    for size in range(1, args.m + 1):
        for S in itertools.combinations(range(args.m), size):
            moments.append(
                {"subset": list(S), "moment": inst.mixture.moment(S), "uniform": 2.0**-size}
            )
    report = {
        "run_config": _run_config(args),
        "m": args.m,
        "k": inst.k,
        "delta": inst.delta,
        "delta_lower_bound": (2 * args.m) ** (-2.0 * args.m),
        "lambda1": inst.lambda1,
        "closed_form_checks": {
            "chi_pair": stats.chi_pair,
            "chi_sq": stats.chi_sq,
            "chi_sq_closed": inst.delta**2 * 4.0**args.m,
            "tvd": stats.tvd,
            "tvd_closed": abs(inst.delta) * 2.0 ** (args.m - 1),
        },
        "moments": moments,
    }
    cio.write_report(args.report, report)
    print(f"delta = {inst.delta:.6e}; all closed-form checks passed")
    return 0


def _cmd_sdt_learn(args) -> int:
    xs, labels = cio.read_samples(args.samples)
    if labels is None:
        raise CubemixError("sdt-learn needs labeled samples (bits<TAB>label lines)")
    clf = learn_sdt_classifier(xs, labels, args.k, args.epsilon, seed=args.seed)
    report = {
        "run_config": _run_config(args),
        "b_star": clf.b_star,
        "pi_star": clf.pi_star,
        "empirical_error": float((clf.predict(xs) != labels).mean()),
    }
    if args.tree:
        truth = cio.read_sdt(args.tree)
        report["classifier_error"] = classifier_error(truth, clf)
        report["bayes_optimal_error"] = bayes_optimal_error(truth)
    cio.write_report(args.report, report)
    print(json.dumps({k: report[k] for k in report if k != "run_config"}, indent=1))
    return 0


def _cmd_bench(args) -> int:
    rows = []
    for spec in args.sizes.split(","):
        n_str, k_str = spec.split(":")
        n, k = int(n_str), int(k_str)
        model, _ = gen_random_model("subcube", n, k, args.seed, nondegenerate=True)
        t0 = time.perf_counter()
        xs = model_sample(model, child_seed(args.seed, "bench", n, k), args.count)
        t_sample = time.perf_counter() - t0
        config = LearnConfig(epsilon=args.epsilon, node_sample_count=args.count)
        t0 = time.perf_counter()
        tree = n_list(PoolSampleSource(xs), (), (), k, config,
                      seed=child_seed(args.seed, "learn", n, k))
        t_learn = time.perf_counter() - t0
        tvd = (
            tvd_bruteforce(tree, model, n)
            if not isinstance(tree, NListFail) and n <= 20
            else None
        )
        rows.append(
            {"n": n, "k": k, "sample_s": t_sample, "learn_s": t_learn, "tvd": tvd}
        )
        print(f"n={n} k={k}: sample {t_sample:.2f}s learn {t_learn:.2f}s tvd={tvd}")
    cio.write_report(args.out, {"run_config": _run_config(args), "rows": rows})
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cubemix", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-model", help="random subcube/product mixture or SDT")
    g.add_argument("--kind", choices=("subcube", "product", "sdt"), default="subcube")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--k", type=int, required=True)
    g.add_argument("--s", type=int, default=1, help="stochastic depth (sdt only)")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--uniform-bias", type=float, default=0.34)
    g.add_argument("--nondegenerate", action="store_true")
    g.add_argument("--sigma-threshold", type=float, default=1e-3)
    g.add_argument("--arbitrary-probs", action="store_true")
    g.add_argument("--out", type=Path, required=True)
    g.add_argument("--report", type=Path)
    g.set_defaults(func=_cmd_gen_model)

    g = sub.add_parser("sample", help="draw samples from a model file")
    g.add_argument("model", type=Path)
    g.add_argument("--count", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", type=Path, required=True)
    g.set_defaults(func=_cmd_sample)

    g = sub.add_parser("learn-subcubes", help="learn a subcube mixture from samples")
    g.add_argument("samples", type=Path)
    g.add_argument("--k", type=int, required=True)
    g.add_argument("--epsilon", type=float, default=0.1)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", type=Path, required=True)
    g.add_argument("--report", type=Path)
    g.set_defaults(func=_cmd_learn_subcubes)

    g = sub.add_parser("learn-products", help="learn a product mixture from samples")
    g.add_argument("samples", type=Path)
    g.add_argument("--k", type=int, required=True)
    g.add_argument("--epsilon", type=float, default=0.1)
    g.add_argument("--entry-step", type=float, default=0.125)
    g.add_argument("--weight-step", type=float, default=0.125)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", type=Path, required=True)
    g.add_argument("--report", type=Path)
    g.set_defaults(func=_cmd_learn_products)

    g = sub.add_parser("eval-tvd", help="brute-force TVD between two distributions")
    g.add_argument("first", type=Path)
    g.add_argument("second", type=Path)
    g.add_argument("--cap", type=int, default=20)
    g.add_argument("--report", type=Path)
    g.set_defaults(func=_cmd_eval_tvd)

    g = sub.add_parser("sq-demo", help="build and verify the hard instance")
    g.add_argument("--m", type=int, required=True)
    g.add_argument("--n", type=int, default=None)
    g.add_argument("--out", type=Path, required=True)
    g.add_argument("--report", type=Path, required=True)
    g.set_defaults(func=_cmd_sq_demo)

    g = sub.add_parser("sdt-learn", help="learn a classifier from labeled samples")
    g.add_argument("samples", type=Path)
    g.add_argument("--k", type=int, required=True)
    g.add_argument("--epsilon", type=float, default=0.1)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--tree", type=Path, help="true SDT file for error evaluation")
    g.add_argument("--report", type=Path, required=True)
    g.set_defaults(func=_cmd_sdt_learn)

    g = sub.add_parser("bench", help="timing table over an n:k grid")
    g.add_argument("--sizes", type=str, required=True, help="comma list like 8:2,12:3")
    g.add_argument("--count", type=int, default=50_000)
    g.add_argument("--epsilon", type=float, default=0.1)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", type=Path, required=True)
    g.set_defaults(func=_cmd_bench)

    return p


def dispatch(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        _validate(args)
    except CubemixError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (CubemixError, OSError, json.JSONDecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _validate(args) -> None:
    for name in ("k", "n", "count", "m"):
        value = getattr(args, name, None)
        if value is not None and value < 1:
            raise CubemixError(f"--{name} must be positive, got {value}")
    eps = getattr(args, "epsilon", None)
    if eps is not None and not (0.0 < eps <= 1.0):
        raise CubemixError(f"--epsilon must be in (0, 1], got {eps}")


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()

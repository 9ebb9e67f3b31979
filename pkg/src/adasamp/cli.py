"""Command-line interface.

Subcommands: train, compare, bounds, probe-stability, synth-data,
verify-sampler. Every experiment flag can also come from a flat key=value
config file (--config PATH, keys named like the flags without the leading
dashes); explicit flags win over the file, the file wins over defaults.
Exits 0 on success, 2 with a diagnostic line on stderr on any rejection.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

import numpy as np
from scipy import stats

from . import bounds
from .data import save_csv, synth_data
from .harness import (
    ExperimentConfig,
    dumps_json,
    probe_stability,
    run_comparison,
    run_experiment,
)
from .weight_tree import WeightTree

# config-file key -> argparse dest, for keys whose flag name is not the dest
KEY_ALIASES = {"lambda": "decay", "M": "loss_bound", "track-kl": "track_kl",
               "test-n": "test_n", "domain-radius": "domain_radius"}


def load_config_file(path) -> dict:
    """Flat `key = value` lines; blank lines and #-comments are ignored."""
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key = value")
            key, _, raw = line.partition("=")
            key, raw = key.strip(), raw.strip()
            dest = KEY_ALIASES.get(key, key.replace("-", "_"))
            values[dest] = raw
    return values


def _coerce(raw: str, like):
    if isinstance(like, bool):
        lowered = raw.lower()
        if lowered in ("true", "1", "yes", "on"):
            return True
        if lowered in ("false", "0", "no", "off"):
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    if isinstance(like, int):
        return int(raw)
    if isinstance(like, float):
        return float(raw)
    return raw


def apply_config_file(args: argparse.Namespace, parser_defaults: dict) -> None:
    """Fill config-file values into args wherever the flag was left at default."""
    if getattr(args, "config", None) is None:
        return
    file_values = load_config_file(args.config)
    explicit = getattr(args, "_explicit", set())
    for dest, raw in file_values.items():
        if dest not in parser_defaults:
            raise ValueError(f"unknown config key {dest!r}")
        if dest in explicit:
            continue
        like = parser_defaults[dest]
        if like is None:
            like = _NONE_DEFAULT_TYPES.get(dest, "")
        setattr(args, dest, _coerce(raw, like))


# types for keys whose built-in default is None
_NONE_DEFAULT_TYPES = {"csv": "", "out": "", "target": 0.0, "domain_radius": 0.0}


class _TrackingParser(argparse.ArgumentParser):
    """Records which dests were set explicitly on the command line, so config
    files can fill in the rest without clobbering flags."""

    def parse_args(self, argv=None, namespace=None):
        args = super().parse_args(argv, namespace)
        explicit = set()
        seen = list(argv) if argv is not None else sys.argv[1:]
        for action in self._iter_all_actions():
            if any(opt in seen for opt in action.option_strings):
                explicit.add(action.dest)
        args._explicit = explicit
        return args

    def _iter_all_actions(self):
        for action in self._actions:
            if isinstance(action, argparse._SubParsersAction):
                for sub in action.choices.values():
                    yield from sub._actions
            else:
                yield action


def _add_experiment_flags(p: argparse.ArgumentParser) -> None:
    defaults = ExperimentConfig()
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--csv", help="load the dataset from this CSV instead of synthesizing")
    p.add_argument("--seed", type=int, default=defaults.seed)
    p.add_argument("--n", type=int, default=defaults.n, help="training examples")
    p.add_argument("--test-n", type=int, default=defaults.test_n, dest="test_n")
    p.add_argument("--dim", type=int, default=defaults.dim)
    p.add_argument("--classes", type=int, default=defaults.classes)
    p.add_argument("--imbalance", type=float, default=defaults.imbalance)
    p.add_argument("--noise", type=float, default=defaults.noise)
    p.add_argument("--separation", type=float, default=defaults.separation)
    p.add_argument("--iters", type=int, default=defaults.iters)
    p.add_argument("--alpha", type=float, default=defaults.alpha,
                   help="reweighting amplitude (0 = uniform sampling)")
    p.add_argument("--lambda", type=float, default=defaults.decay, dest="decay",
                   help="multiplicative weight decay in (0, 1)")
    p.add_argument("--utility", choices=["01", "l1"], default="l1")
    p.add_argument("--rule", choices=["sgd", "adagrad"], default=defaults.rule)
    p.add_argument("--schedule", choices=["constant", "inverse_decay", "strongly_convex"],
                   default=defaults.schedule)
    p.add_argument("--batch", type=int, default=defaults.batch)
    p.add_argument("--mu", type=float, default=defaults.mu, help="L2 regularization strength")
    p.add_argument("--M", type=float, default=defaults.loss_bound, dest="loss_bound",
                   help="loss clamp")
    p.add_argument("--domain-radius", type=float, default=None, dest="domain_radius")
    p.add_argument("--eta", type=float, default=defaults.eta)
    p.add_argument("--kappa", type=float, default=defaults.kappa)
    p.add_argument("--delta", type=float, default=defaults.delta)
    p.add_argument("--trials", type=int, default=defaults.trials)
    p.add_argument("--cadence", type=int, default=defaults.cadence)
    p.add_argument("--target", type=float, default=None,
                   help="explicit loss target for iterations-to-target")
    p.add_argument("--track-kl", action="store_true", dest="track_kl",
                   help="record the full conditional KL to uniform every iteration")
    p.add_argument("--out", help="output directory for metrics and reports")


def _experiment_config(args: argparse.Namespace) -> ExperimentConfig:
    fields = {f.name for f in dataclasses.fields(ExperimentConfig)}
    chosen = {k: v for k, v in vars(args).items() if k in fields}
    if args.utility == "01":
        chosen["utility"] = "zero_one"
    return ExperimentConfig(**chosen)


def cmd_train(args) -> int:
    cfg = _experiment_config(args)
    result = run_experiment(cfg)
    print(dumps_json(result.report["aggregate"]))
    if result.out_dir:
        print(f"wrote metrics and report.json under {result.out_dir}")
    return 0


def cmd_compare(args) -> int:
    cfg = _experiment_config(args)
    out = run_comparison(cfg, alphas=args.alphas if args.alphas else None)
    print(dumps_json(out["comparison"]))
    return 0


def cmd_synth_data(args) -> int:
    ds = synth_data(args.n, args.dim, args.classes, args.imbalance, args.noise,
                    seed=args.seed, separation=args.separation)
    save_csv(ds, args.out)
    print(f"wrote {ds.n} examples ({ds.num_classes} classes, dim {ds.feature_dim}) to {args.out}")
    return 0


_BOUND_BUILDERS = {
    "stab-convex": lambda a: ("stability_convex",
                              bounds.sgd_stability_convex(a.L, a.eta, a.T, a.n)),
    "stab-nonconvex": lambda a: ("stability_nonconvex",
                                 bounds.sgd_stability_nonconvex(a.L, a.smoothness, a.eta,
                                                                a.T, a.n, a.M)),
    "stab-initial-risk": lambda a: ("stability_initial_risk",
                                    bounds.sgd_stability_initial_risk(a.L, a.eta, a.T, a.n,
                                                                      a.smoothness, a.risk_h0)),
}


def cmd_bounds(args) -> int:
    if args.formula in _BOUND_BUILDERS:
        name, value = _BOUND_BUILDERS[args.formula](args)
        report = {"formula": name, "value": value}
    elif args.formula == "stab-strongly-convex":
        beta, gamma = bounds.sgd_stability_strongly_convex(args.L, args.mu, args.n, args.T)
        report = {"formula": "stability_strongly_convex", "beta": beta, "gamma": gamma}
    elif args.formula == "chisq":
        report = bounds.gen_bound_chisq(args.chisq, args.M, args.n, args.beta,
                                        args.delta).to_json()
    elif args.formula == "kl":
        report = bounds.gen_bound_kl(args.kl, args.M, args.n, args.T, args.beta,
                                     args.gamma, args.delta).to_json()
    elif args.formula == "sgd-strongly-convex":
        report = bounds.gen_bound_sgd_strongly_convex(args.kl, args.M, args.L, args.mu,
                                                      args.n, args.T, args.delta).to_json()
    elif args.formula == "derandomized":
        report = bounds.gen_bound_derandomized(args.kl, args.M, args.n, args.T, args.beta,
                                               args.gamma, args.delta).to_json()
    else:
        raise ValueError(f"unknown formula {args.formula!r}")
    print(dumps_json(report))
    return 0


def cmd_probe_stability(args) -> int:
    cfg = _experiment_config(args)
    res = probe_stability(cfg, args.perturbations, probe_seeds=args.probe_seeds)
    report = {
        "beta_emp": res.beta_emp,
        "beta_bound": res.beta_bound,
        "gamma_emp": res.gamma_emp,
        "gamma_bound": res.gamma_bound,
        "data_diff_median": float(np.median(res.data_diffs)),
        "hyper_diff_median": float(np.median(res.hyper_diffs)),
        "perturbations": args.perturbations,
    }
    print(dumps_json(report))
    ok = res.beta_emp <= res.beta_bound and res.gamma_emp <= res.gamma_bound
    if not ok:
        print("empirical stability exceeded the closed-form coefficient", file=sys.stderr)
        return 1
    return 0


def cmd_verify_sampler(args) -> int:
    """Distribution, goodness-of-fit, and touched-node checks on random trees."""
    rng = np.random.default_rng(args.seed)
    failures = []
    for n in args.sizes:
        w = rng.uniform(0.5, 1.5, size=n)
        tree = WeightTree(w)
        exact = w / w.sum()
        max_err = max(abs(tree.prob(i) - exact[i]) for i in range(n))
        counts = np.bincount(tree.sample_many(args.draws, rng), minlength=n)
        pvalue = float(stats.chisquare(counts, exact * args.draws).pvalue)
        v0 = tree.sample_visits
        tree.sample(rng)
        sample_touch = tree.sample_visits - v0
        w0 = tree.update_writes
        tree.update(n // 2, 2.0)
        update_touch = tree.update_writes - w0
        ok = (max_err < 1e-12 and pvalue > 1e-3
              and sample_touch == tree.depth and update_touch == tree.depth + 1)
        if not ok:
            failures.append(n)
        print(dumps_json({"n": n, "depth": tree.depth, "max_prob_error": max_err,
                          "chisq_pvalue": pvalue, "sample_touches": sample_touch,
                          "update_touches": update_touch, "ok": ok}))
    if failures:
        print(f"sampler verification failed for n in {failures}", file=sys.stderr)
        return 1
    print("sampler verification passed")
    return 0


def build_parser() -> _TrackingParser:
    parser = _TrackingParser(prog="adasamp",
                             description="adaptive-sampling SGD experiments and bound evaluation")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run one sampler configuration for several trials")
    _add_experiment_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("compare", help="uniform vs adaptive arms on shared seeds")
    _add_experiment_flags(p)
    p.add_argument("--alphas", type=float, nargs="*", default=None,
                   help="adaptive arm amplitudes (default: just --alpha)")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("bounds", help="evaluate one closed-form coefficient or bound")
    p.add_argument("--formula", required=True,
                   choices=["stab-convex", "stab-nonconvex", "stab-initial-risk",
                            "stab-strongly-convex", "chisq", "kl", "sgd-strongly-convex",
                            "derandomized"])
    p.add_argument("--L", type=float, default=1.0)
    p.add_argument("--eta", type=float, default=0.1)
    p.add_argument("--T", type=int, default=100)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--M", type=float, default=1.0)
    p.add_argument("--mu", type=float, default=0.1)
    p.add_argument("--smoothness", type=float, default=1.0)
    p.add_argument("--risk-h0", type=float, default=1.0, dest="risk_h0")
    p.add_argument("--kl", type=float, default=0.0)
    p.add_argument("--chisq", type=float, default=0.0)
    p.add_argument("--beta", type=float, default=0.0)
    p.add_argument("--gamma", type=float, default=0.0)
    p.add_argument("--delta", type=float, default=0.05)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("probe-stability", help="empirical stability vs closed forms")
    _add_experiment_flags(p)
    p.add_argument("--perturbations", type=int, default=50)
    p.add_argument("--probe-seeds", type=int, default=8, dest="probe_seeds")
    p.set_defaults(func=cmd_probe_stability)

    p = sub.add_parser("synth-data", help="write a synthetic dataset CSV")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--dim", type=int, default=8)
    p.add_argument("--classes", type=int, default=2)
    p.add_argument("--imbalance", type=float, default=0.7)
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--separation", type=float, default=3.4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="CSV path to write")
    p.set_defaults(func=cmd_synth_data)

    p = sub.add_parser("verify-sampler", help="distribution and complexity checks")
    p.add_argument("--sizes", type=int, nargs="*", default=[2, 7, 64, 1000])
    p.add_argument("--draws", type=int, default=100000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify_sampler)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if hasattr(args, "config"):
            defaults = {a.dest: a.default for a in parser._iter_all_actions()}
            apply_config_file(args, defaults)
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entrypoint() -> None:
    sys.exit(main(sys.argv[1:]))


if __name__ == "__main__":
    entrypoint()

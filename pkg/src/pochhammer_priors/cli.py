"""Command-line interface: ``phprior <command> [options]``.

Every output file carries the full run configuration so a run can be
repeated exactly. Exit status is 0 on success, 1 on computation or input
errors and 2 on invalid arguments.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .dm import (
    chain_summaries,
    homog_mh_sample,
    homog_posterior,
    homog_posterior_double_root,
    homog_posterior_mean_alpha,
    homog_posterior_mean_pi,
    mwg_sample,
)
from .errors import MomentError, PochhammerError, PoleCollisionError
from .files import InputError, read_counts_csv, read_json, read_tuple_csv, write_csv, write_json
from .harness import ScenarioConfig, run_benchmark
from .models import (
    FIG3_PRIORS,
    AllelicPartition,
    NBCoupledPrior,
    esf_log_prob,
    esf_posterior,
    figure4_curves,
    form_moment,
    nb_generate,
    yule_simon_posterior,
)
from .numeric import Precision, QuadratureError
from .pochhammer import PochhammerParams, density_curve, figure1_curves, figure2_curves, pph_residues
from .residues import ResidueExpansion
from .tables import MCMCConfig, MultiwayTable, table_posterior_cramers_v

log = logging.getLogger("pochhammer_priors")

__all__ = ["main", "build_parser"]


class _UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# shared argument groups
# ---------------------------------------------------------------------------


def _add_prior(p: argparse.ArgumentParser, m=0, b=2):
    g = p.add_argument_group("prior")
    g.add_argument("--m", type=int, default=m, help="numerator rising-factorial length")
    g.add_argument("--a", default="1", help="offset a (rationals such as 3/2 accepted)")
    g.add_argument("--b", type=int, default=b, help="denominator rising-factorial length")
    g.add_argument("--c", default="1", help="scale c (rationals accepted)")
    g.add_argument("--d", type=int, default=0, help="power tilt alpha^d")


def _add_mcmc(p: argparse.ArgumentParser, iterations=10_000, burn_in=2_000, thin=1):
    g = p.add_argument_group("mcmc")
    g.add_argument("--iterations", type=int, default=iterations)
    g.add_argument("--burn-in", type=int, default=burn_in)
    g.add_argument("--thin", type=int, default=thin)
    g.add_argument("--stepsize", default="adapt", help='proposal sd on the log scale, or "adapt"')
    g.add_argument("--seed", type=int, default=0)


def _prior(args) -> PochhammerParams:
    return PochhammerParams(args.m, args.a, args.b, args.c, args.d)


def _stepsize(args) -> tuple[float, bool]:
    if args.stepsize == "adapt":
        return 0.5, True
    try:
        sigma = float(args.stepsize)
    except ValueError:
        raise _UsageError(f"--stepsize must be a number or 'adapt', got {args.stepsize!r}") from None
    if not sigma > 0:
        raise _UsageError("--stepsize must be positive")
    return sigma, False


def _config(args) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k != "func"}
    cfg["version"] = __version__
    return cfg


def _precision(args) -> Precision | None:
    return Precision.parse(args.precision) if getattr(args, "precision", None) else None


def _expansion_summary(exp: ResidueExpansion, precision=None) -> dict:
    out = {
        "log_norm_const": exp.log_norm_const,
        "precision": str(exp.precision_used),
        "numeric_fallback": exp.numeric_fallback,
        "median": exp.ppf(0.5),
        "q025": exp.ppf(0.025),
        "q975": exp.ppf(0.975),
        "mean": None,
    }
    if exp.form.degree_den - exp.form.degree_num >= 3:
        out["mean"] = form_moment(exp.form, 1, precision)
    return out


def _grid(spec: str) -> np.ndarray:
    """``lo:hi:n`` (linear) or ``log:lo:hi:n`` (log-spaced)."""
    parts = spec.split(":")
    try:
        if parts[0] == "log" and len(parts) == 4:
            lo, hi, n = float(parts[1]), float(parts[2]), int(parts[3])
            if lo <= 0 or hi <= lo or n < 2:
                raise ValueError
            return np.logspace(math.log10(lo), math.log10(hi), n)
        if len(parts) == 3:
            lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
            if lo < 0 or hi <= lo or n < 2:
                raise ValueError
            return np.linspace(lo, hi, n)
    except ValueError:
        pass
    raise _UsageError(f"bad grid {spec!r}; use lo:hi:n or log:lo:hi:n with 0 <= lo < hi, n >= 2")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _write_curve(path, curve: dict, cfg: dict):
    cols = list(curve)
    write_csv(path, cols, zip(*(curve[c] for c in cols)), cfg)


def cmd_density(args) -> int:
    cfg = _config(args)
    if args.figure is None:
        if args.out is None:
            raise _UsageError("density needs --out (or --figure with --out-dir)")
        grid = _grid(args.grid)
        _write_curve(args.out, density_curve(_prior(args), grid), cfg)
        return 0
    out_dir = Path(args.out_dir)
    if not out_dir.is_dir():
        raise FileNotFoundError(f"output directory {out_dir} does not exist")
    if args.figure == "fig1":
        curves = figure1_curves()
    elif args.figure == "fig2":
        curves = figure2_curves()
    elif args.figure == "fig3":
        curves = {}
        for name, prior in FIG3_PRIORS.items():
            sample = nb_generate(prior, args.draws, seed=args.seed)
            counts, freq = sample.histogram(args.max_count)
            curves[name] = {"count": counts, "frequency": freq}
    else:
        curves = {k: {"z": v["centers"], "density": v["density"]}
                  for k, v in figure4_curves(n_draws=args.draws, seed=args.seed).items()}
    for name, curve in curves.items():
        _write_curve(out_dir / f"{args.figure}_{name}.csv", curve, dict(cfg, curve=name))
    print(f"wrote {len(curves)} curve files to {out_dir}")
    return 0


def _write_chain(path, chain, cfg):
    it = chain.burn_in + chain.thin * np.arange(1, chain.draws.shape[0] + 1)
    header = ["iteration"] + [f"alpha_{k + 1}" for k in range(chain.draws.shape[1])]
    write_csv(path, header, ([int(i)] + row.tolist() for i, row in zip(it, chain.draws)), cfg)


def cmd_fit(args) -> int:
    cfg = _config(args)
    corpus = read_counts_csv(args.counts)
    prior = _prior(args)
    out_dir = Path(args.out_dir)
    if not out_dir.is_dir():
        raise FileNotFoundError(f"output directory {out_dir} does not exist")
    summary: dict = {"config": cfg, "prior": prior.as_dict(), "S": corpus.S, "K": corpus.K}
    if corpus.K == 1:
        summary.update(method="prior", note="a single category carries no information about alpha; "
                       "the posterior equals the prior", pi_mean=[[1.0]] * corpus.S,
                       alpha=_expansion_summary(pph_residues(prior, _precision(args)), _precision(args)))
        write_json(out_dir / "summary.json", summary)
        return 0
    if args.mode == "homogeneous" and corpus.S == 1:
        if prior.a == 0 and prior.c == corpus.K:
            post = homog_posterior_double_root(corpus, prior, _precision(args))
        else:
            try:
                post = homog_posterior(corpus, prior, precision=_precision(args))
            except PoleCollisionError as exc:
                raise PoleCollisionError(
                    f"{exc}. Perturb --a slightly, or use --a 0 --c {corpus.K} for the double-root form"
                ) from None
        summary["method"] = f"closed_form:{post.method}"
        alpha = _expansion_summary(post.expansion, _precision(args))
        try:
            alpha["mean"] = homog_posterior_mean_alpha(post)
        except MomentError:
            alpha["mean"] = None
        summary["alpha"] = alpha
        summary["log_C_n"] = post.log_C_n
        summary["pi_mean"] = [[homog_posterior_mean_pi(post, k) for k in range(corpus.K)]]
        write_json(out_dir / "summary.json", summary)
        return 0
    sigma, adapt = _stepsize(args)
    if args.mode == "homogeneous":
        log.warning("homogeneous mode with %d documents has no closed form; running MCMC", corpus.S)
        chain = homog_mh_sample(corpus, prior, args.iterations, sigma, args.burn_in, args.seed, adapt, args.thin)
    else:
        chain = mwg_sample(corpus, prior, args.iterations, sigma, args.burn_in, args.seed, adapt, args.thin)
    stats = chain_summaries(chain, corpus, pi_draws=args.pi_draws, seed=args.seed)
    summary["method"] = "mcmc"
    summary.update(stats.as_dict())
    summary["final_stepsizes"] = chain.final_stepsizes
    write_json(out_dir / "summary.json", summary)
    _write_chain(out_dir / "chain.csv", chain, cfg)
    return 0


def cmd_benchmark(args) -> int:
    cfg = _config(args)
    if args.config:
        raw = read_json(args.config)
        settings = raw.get("configs") or [{k: raw[k] for k in ("scenario", "setting") if k in raw}]
        methods = raw.get("methods", args.methods)
        iterations = raw.get("iterations", args.iterations)
        burn_in = raw.get("burn_in", args.burn_in)
        defaults = {k: raw[k] for k in ("replicates", "seed", "K", "S", "N", "q") if k in raw}
        cfg["file"] = raw
    else:
        if args.scenario is None or args.setting is None:
            raise _UsageError("benchmark needs --config or both --scenario and --setting")
        settings = [{"scenario": args.scenario, "setting": args.setting}]
        methods, iterations, burn_in = args.methods, args.iterations, args.burn_in
        defaults = {"replicates": args.replicates, "seed": args.seed}
    if isinstance(methods, str):
        methods = [m for m in methods.split(",") if m]
    try:
        configs = [ScenarioConfig(**{**defaults, **s}) for s in settings]
    except TypeError as exc:
        raise _UsageError(f"invalid benchmark config: {exc}") from None
    out_dir = Path(args.out_dir)
    if not out_dir.is_dir():
        raise FileNotFoundError(f"output directory {out_dir} does not exist")
    report = run_benchmark(configs, methods, iterations, burn_in, workers=args.workers)
    rows = report.to_csv_rows()
    write_csv(out_dir / "report.csv", rows[0], rows[1:], cfg)
    write_json(out_dir / "report.json", {"run_config": cfg, "report": json.loads(report.to_json())})
    for r in report.rows:
        print(f"{r.method:>10} s{r.scenario}/{r.setting}: ABSx100 {r.abs_mean:.4f} ({r.abs_sd:.4f})  "
              f"COV {r.cov_mean:.3f} ({r.cov_sd:.3f})  failures {r.failures}")
    return 1 if any(r.failures for r in report.rows) else 0


def cmd_table(args) -> int:
    cfg = _config(args)
    header, rows = read_tuple_csv(args.observations)
    alphabets = None
    if args.alphabets:
        alphabets = read_json(args.alphabets)
        if isinstance(alphabets, dict):
            alphabets = [alphabets[h] for h in header]
    try:
        table = MultiwayTable.from_labels(rows, alphabets) if rows or alphabets else \
            MultiwayTable(tuple([1] * len(header)), np.empty((0, len(header))))
    except (ValueError, KeyError) as exc:
        raise InputError(f"{args.observations}: cannot build level alphabets: {exc}") from None
    out_header = ["j", "j_prime", "mean", "q025", "q975"]
    if table.p < 2:
        write_csv(args.out, out_header, [], cfg)
        return 0
    sigma, adapt = _stepsize(args)
    mcmc = MCMCConfig(args.iterations, args.burn_in, args.thin, sigma, adapt, args.seed)
    summary = table_posterior_cramers_v(table, _prior(args), mcmc)
    write_csv(args.out, out_header, summary.rows(), cfg)
    return 0


def cmd_nb_generate(args) -> int:
    cfg = _config(args)
    sample = nb_generate(NBCoupledPrior(_prior(args)), args.draws, seed=args.seed)
    counts, freq = sample.histogram(args.max_count)
    write_csv(args.out, ["count", "frequency"], zip(counts, freq), cfg)
    print(f"zero fraction {sample.zero_fraction:.5f}; mode of nonzero counts {sample.nonzero_mode}")
    return 0


def _parse_partition(args) -> AllelicPartition:
    if args.sizes:
        try:
            sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
        except ValueError:
            raise _UsageError("--sizes must be comma-separated integers") from None
        return AllelicPartition.from_sizes(sizes)
    raw = read_json(args.partition)
    try:
        return AllelicPartition.from_pairs([(int(j), int(mj)) for j, mj in raw])
    except (TypeError, ValueError):
        raise InputError(f"{args.partition}: expected a JSON list of [j, m_j] pairs") from None


def cmd_esf(args) -> int:
    cfg = _config(args)
    if bool(args.sizes) == bool(args.partition):
        raise _UsageError("give exactly one of --sizes or --partition")
    part = _parse_partition(args)
    out = {"config": cfg, "partition": part.pairs(), "n": part.n}
    if args.alpha is not None:
        out["log_prob"] = esf_log_prob(part, args.alpha)
    exp = esf_posterior(part, _prior(args), _precision(args))
    out["posterior"] = _expansion_summary(exp, _precision(args))
    write_json(args.out, out)
    return 0


def cmd_yule(args) -> int:
    cfg = _config(args)
    try:
        counts = [int(s) for s in args.counts.split(",") if s.strip()]
    except ValueError:
        raise _UsageError("--counts must be comma-separated integers") from None
    exp = yule_simon_posterior(counts, _prior(args), _precision(args))
    write_json(args.out, {"config": cfg, "counts": counts, "posterior": _expansion_summary(exp, _precision(args))})
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="phprior", description="Pochhammer priors for sparse count models.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("density", help="prior density curves or figure presets")
    _add_prior(p)
    p.add_argument("--grid", default="log:0.001:1000:400", help="lo:hi:n or log:lo:hi:n")
    p.add_argument("--out", help="output CSV (alpha, density, cdf)")
    p.add_argument("--figure", choices=["fig1", "fig2", "fig3", "fig4"])
    p.add_argument("--out-dir", default=".")
    p.add_argument("--draws", type=int, default=100_000, help="Monte-Carlo draws for fig3/fig4")
    p.add_argument("--max-count", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_density)

    p = sub.add_parser("fit", help="posterior of alpha and pi for a count matrix")
    p.add_argument("--counts", required=True, help="CSV with header cat_1..cat_K")
    p.add_argument("--mode", choices=["homogeneous", "heterogeneous"], default="heterogeneous")
    p.add_argument("--pi-draws", choices=["plugin", "dirichlet"], default="plugin")
    p.add_argument("--precision", help='"double" or "extended[:bits]"')
    p.add_argument("--out-dir", required=True)
    _add_prior(p)
    _add_mcmc(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("benchmark", help="simulation study")
    p.add_argument("--config", help="JSON benchmark config")
    p.add_argument("--scenario", type=int)
    p.add_argument("--setting", type=int)
    p.add_argument("--methods", default="dm,ph1d", help="comma-separated, e.g. dm,jeffreys,ph1h,ph1d")
    p.add_argument("--replicates", type=int, default=20)
    p.add_argument("--iterations", type=int, default=10_000)
    p.add_argument("--burn-in", type=int, default=2_000)
    p.add_argument("--seed", type=int, default=2024)
    p.add_argument("--workers", type=int, default=int(os.environ.get("PHPRIOR_THREADS", "1")))
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("table", help="posterior Cramér's V for a multiway table")
    p.add_argument("--observations", required=True, help="CSV with header pos_1..pos_p")
    p.add_argument("--alphabets", help="JSON list (or header-keyed object) of level alphabets")
    p.add_argument("--out", required=True)
    _add_prior(p)
    _add_mcmc(p, iterations=5_000, burn_in=1_000, thin=10)
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("nb-generate", help="simulate NB counts under the coupled prior")
    _add_prior(p)
    p.add_argument("--draws", type=int, default=100_000)
    p.add_argument("--max-count", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_nb_generate)

    p = sub.add_parser("esf", help="Ewens sampling formula probability and posterior")
    p.add_argument("--sizes", help="allele sizes, e.g. 2,1,1")
    p.add_argument("--partition", help="JSON list of [j, m_j] pairs")
    p.add_argument("--alpha", type=float, help="also report the ESF log-probability at this alpha")
    p.add_argument("--precision")
    p.add_argument("--out", required=True)
    _add_prior(p)
    p.set_defaults(func=cmd_esf)

    p = sub.add_parser("yule", help="Yule-Simon posterior of alpha")
    p.add_argument("--counts", required=True, help="comma-separated counts >= 1")
    p.add_argument("--precision")
    p.add_argument("--out", required=True)
    _add_prior(p, b=3)
    p.set_defaults(func=cmd_yule)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except _UsageError as exc:
        parser.error(str(exc))
    except (PochhammerError, InputError, QuadratureError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

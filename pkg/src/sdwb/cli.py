"""Command-line interface."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import io
from ._linalg import FactorizationError
from .bootstrap import MultiplierField, SdwbConfig, bootstrap_max_stats, sdwb_cov
from .experiments import (
    COVERAGE_COLUMNS,
    FwerRow,
    StudyConfig,
    coverage_study,
    fwer_study,
    make_dgp,
)
from .fields import simulate
from .inference import joint_ci, limit_cov_oracle, stack_adjacent_differences, stepdown_changepoint
from .kernels import TaperKernel, psd_check
from .sampling import SamplingDesign, generate_sites

PATH_KEYS = {"in", "sites", "out", "sites_out", "draws_out"}


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="seed for all randomness")
    p.add_argument("--threads", type=int, default=None, help="worker processes (0 = auto, env SDWB_THREADS)")
    p.add_argument("--config", default=None, help="JSON run config supplying defaults")
    p.add_argument("--save-config", default=None, help="write the resolved run config to this path")


def _boot(p: argparse.ArgumentParser, b_default: float = 5.0, B_default: int = 1000) -> None:
    p.add_argument("--kernel", default="bartlett", choices=["bartlett", "parzen"])
    p.add_argument("--b", type=float, default=b_default, help="taper bandwidth")
    p.add_argument("--B", type=int, default=B_default, help="bootstrap replicates")
    p.add_argument("--tau", type=float, default=0.05)
    p.add_argument("--psd-repair", default="clip", choices=["clip", "none"])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sdwb", description="Spatially dependent wild bootstrap")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a random field at random sites")
    _common(p)
    p.add_argument("--dgp", default="matern", help="matern, cp-car1 or factor")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--p", type=int, default=10)
    p.add_argument("--lambda", dest="lambda_n", type=float, default=25.0)
    p.add_argument("--out", required=False)
    p.add_argument("--sites-out", default=None, help="sites CSV (default: <out stem>_sites.csv)")
    p.add_argument("--long", action="store_true", help="write long-form site_id,j,value")

    p = sub.add_parser("ci", help="joint confidence intervals for the mean")
    _common(p)
    p.add_argument("--in", dest="in", required=False, help="wide field CSV")
    p.add_argument("--sites", required=False)
    p.add_argument("--lambda", dest="lambda_n", type=float, default=25.0)
    _boot(p)
    p.add_argument("--out", default=None, help="CI CSV (default: standard output)")
    p.add_argument("--draws-out", default=None, help="write bootstrap max statistics")

    p = sub.add_parser("changepoint", help="stepdown change-point test on a panel")
    _common(p)
    p.add_argument("--in", dest="in", required=False, help="panel CSV station_id,x,y,t,value")
    p.add_argument("--transform", default="none", choices=["none", "log1p"])
    p.add_argument("--window", default=None, help="t_min,t_max (inclusive)")
    p.add_argument("--lambda", dest="lambda_n", type=float, default=15.0)
    p.add_argument("--reuse-draws", action="store_true")
    _boot(p, b_default=4.0, B_default=1500)
    p.add_argument("--out", default=None)

    for name, helptext in (("coverage-study", "Monte Carlo coverage of joint CIs"),
                           ("fwer-study", "Monte Carlo FWER of the stepdown test")):
        p = sub.add_parser(name, help=helptext)
        _common(p)
        p.add_argument("--dgp", default="matern")
        p.add_argument("--n", type=int, default=100)
        p.add_argument("--p", type=int, default=10)
        p.add_argument("--lambda", dest="lambda_n", type=float, default=25.0)
        p.add_argument("--bandwidths", default="1,2,3,4,5,6,7,8,9,10")
        p.add_argument("--R", type=int, default=500)
        p.add_argument("--B", type=int, default=1000)
        p.add_argument("--levels", default="0.95,0.99", help="confidence levels 1 - tau")
        p.add_argument("--kernel", default="bartlett", choices=["bartlett", "parzen"])
        p.add_argument("--psd-repair", default="clip", choices=["clip", "none"])
        p.add_argument("--allow-large-p", action="store_true")
        p.add_argument("--out", default=None)

    p = sub.add_parser("psd-check", help="min eigenvalue of the taper Gram matrix")
    _common(p)
    p.add_argument("--kernel", default="bartlett", choices=["bartlett", "parzen"])
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--lambda", dest="lambda_n", type=float, default=15.0)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--bandwidths", default="1,2,3,4,5,6,7,8,9,10")
    p.add_argument("--sites", default=None, help="use these sites instead of random ones")

    p = sub.add_parser("limit-cov", help="limit variances of the scaled sample mean")
    _common(p)
    p.add_argument("--dgp", default="matern")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--p", type=int, default=1)
    p.add_argument("--lambda", dest="lambda_n", type=float, default=25.0)
    p.add_argument("--kappa-inv", type=float, default=None, help="default lambda^d / n")
    return parser


def _parse(argv: list[str]) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        cfg = io.RunConfig.load(args.config)
        if cfg.command != args.command:
            raise ValueError(f"config is for '{cfg.command}', not '{args.command}'")
        base = Path(args.config).resolve().parent
        defaults = {}
        for key, value in cfg.params.items():
            key = key.replace("-", "_")
            if key in PATH_KEYS and value is not None and not Path(value).is_absolute():
                value = str(base / value)
            defaults[key] = value
        sub = parser._subparsers._group_actions[0].choices[args.command]  # type: ignore[union-attr]
        sub.set_defaults(**defaults)
        args = parser.parse_args(argv)
    return args


def _run_config(args: argparse.Namespace, config_path: str) -> io.RunConfig:
    """Resolved arguments, with file paths made relative to the config's directory."""
    skip = {"command", "config", "save_config"}
    base = Path(config_path).resolve().parent
    params = {}
    for key, value in sorted(vars(args).items()):
        if key in skip:
            continue
        if key in PATH_KEYS and value is not None and value != "-":
            value = os.path.relpath(Path(value).resolve(), base)
        params[key] = value
    return io.RunConfig(args.command, params)


def _require(args, *names):
    for name in names:
        if getattr(args, name) is None:
            raise ValueError(f"--{name.replace('_', '-')} is required")


def _emit(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _threads(args) -> int:
    return 1 if args.threads is None else args.threads


def cmd_simulate(args) -> None:
    _require(args, "out")
    design = SamplingDesign(args.lambda_n)
    model = make_dgp(args.dgp, args.p, seed=args.seed)
    sites = generate_sites(design, args.n, seed=args.seed)
    y = simulate(sites, model, seed=args.seed)
    out = Path(args.out)
    sites_out = args.sites_out or str(out.with_name(out.stem + "_sites.csv"))
    io.write_field_csv(y, out, long=args.long)
    io.write_sites_csv(sites, sites_out)


def _sdwb_config(args) -> SdwbConfig:
    return SdwbConfig(TaperKernel.from_name(args.kernel), args.b, args.B, args.seed, psd_repair=args.psd_repair)


def cmd_ci(args) -> None:
    _require(args, "in", "sites")
    sites = io.read_sites_csv(args.sites, args.lambda_n)
    y = io.read_field_csv(args.__dict__["in"], sites)
    cfg = _sdwb_config(args)
    lambda_d = args.lambda_n**sites.d
    mult = MultiplierField(sites, cfg.taper, cfg.bandwidth, cfg.psd_repair)
    ci = joint_ci(y, cfg, lambda_d, args.tau, multiplier=mult)
    io.write_ci_csv(ci, args.out)
    if args.draws_out:
        sigma = sdwb_cov(y, cfg.taper, cfg.bandwidth, lambda_d).diag
        draws = bootstrap_max_stats(y, cfg, lambda_d, sigma_diag=sigma, multiplier=mult)
        io.write_draws_csv(draws.stats, args.draws_out)


def cmd_changepoint(args) -> None:
    _require(args, "in")
    window = tuple(_floats(args.window)) if args.window else None
    panel = io.ingest_panel(args.__dict__["in"], window=window, transform=args.transform)
    if panel.dropped:
        print(f"dropped {len(panel.dropped)} incomplete station(s): {', '.join(panel.dropped)}", file=sys.stderr)
    y = io.panel_to_field(panel, args.lambda_n)
    diffs = stack_adjacent_differences(y)
    cfg = _sdwb_config(args)
    res = stepdown_changepoint(diffs, cfg, args.lambda_n**y.sites.d, args.tau, reuse_draws=args.reuse_draws)
    out = res.to_dict()
    out["times"] = [float(t) for t in panel.times]
    out["dropped_stations"] = list(panel.dropped)
    _emit(json.dumps(out, indent=2) + "\n", args.out)


def _study(args) -> StudyConfig:
    design = SamplingDesign.for_sample_size(args.lambda_n, args.n)
    return StudyConfig(
        dgp=make_dgp(args.dgp, args.p, seed=args.seed),
        design=design,
        n=args.n,
        bandwidths=tuple(_floats(args.bandwidths)),
        replications=args.R,
        bootstrap=args.B,
        levels=tuple(_floats(args.levels)),
        taper=TaperKernel.from_name(args.kernel),
        base_seed=args.seed,
        dgp_name=args.dgp,
        psd_repair=args.psd_repair,
        threads=_threads(args),
        allow_large_p=args.allow_large_p,
    )


def _manifest(study: StudyConfig, kind: str, extra: dict | None = None) -> str:
    data = {
        "study": kind,
        "dgp_name": study.dgp_name,
        "dgp": io.model_to_dict(study.dgp),
        "design": io.design_to_dict(study.design),
        "n": study.n,
        "bandwidths": list(study.bandwidths),
        "replications": study.replications,
        "bootstrap": study.bootstrap,
        "levels": list(study.levels),
        "taper": study.taper.kind,
        "base_seed": study.base_seed,
        "psd_repair": study.psd_repair,
    }
    data.update(extra or {})
    return json.dumps(data, indent=2) + "\n"


def cmd_coverage(args) -> None:
    _require(args, "out")
    study = _study(args)
    table = coverage_study(study)
    io.write_rows_csv(table.rows, args.out, COVERAGE_COLUMNS)
    extra = {"repair_rate": {f"{b:g}": r for b, r in table.repair_rate.items()}}
    Path(args.out).with_suffix(".json").write_text(_manifest(study, "coverage", extra))


def cmd_fwer(args) -> None:
    _require(args, "out")
    study = _study(args)
    rows = fwer_study(study)
    io.write_rows_csv(rows, args.out, tuple(FwerRow.__dataclass_fields__))
    Path(args.out).with_suffix(".json").write_text(_manifest(study, "fwer"))


def cmd_psd_check(args) -> None:
    taper = TaperKernel.from_name(args.kernel)
    if args.sites:
        sites = io.read_sites_csv(args.sites, args.lambda_n)
    else:
        sites = generate_sites(SamplingDesign(args.lambda_n, d=args.d), args.n, seed=args.seed)
    print("b,min_eigenvalue,factorizable")
    for b in _floats(args.bandwidths):
        min_eig = psd_check(taper, sites, b)
        try:
            MultiplierField(sites, taper, b, repair="none")
            ok = True
        except FactorizationError:
            ok = False
        print(f"{b:g},{min_eig:.10g},{str(ok).lower()}")


def cmd_limit_cov(args) -> None:
    kappa_inv = args.kappa_inv if args.kappa_inv is not None else args.lambda_n**2 / args.n
    design = SamplingDesign(args.lambda_n, kappa_inv=kappa_inv)
    model = make_dgp(args.dgp, args.p, seed=args.seed)
    for j, v in enumerate(limit_cov_oracle(model, design), start=1):
        print(f"{j},{v:.12g}")


COMMANDS = {
    "simulate": cmd_simulate,
    "ci": cmd_ci,
    "changepoint": cmd_changepoint,
    "coverage-study": cmd_coverage,
    "fwer-study": cmd_fwer,
    "psd-check": cmd_psd_check,
    "limit-cov": cmd_limit_cov,
}


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = _parse(argv)
        if args.save_config:
            _run_config(args, args.save_config).save(args.save_config)
        COMMANDS[args.command](args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except Exception as exc:  # noqa: BLE001 - single-line diagnostic for any failure
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"sdwb: error: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

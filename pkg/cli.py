"""
Command-line front end for the SRBM product-form toolkit
diagnose | project | plot | simulate | tandem | check

Exit codes: 0 product form, 3 not product form, 2 invalid instance or
arguments, 1 internal error. check exits 0 for a consistent document and
1 when the recomputation disagrees with it.
"""

import argparse
import logging
import sys
import traceback
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

import document_io as dio
import figures
import geometry as geo
import product_form as pf
import projection as pj
import simulator as sim
import tandem as td
from config_manager import ConfigManager, Tolerances
from exceptions import DegeneratePair, IndexOutOfRange, InstanceError, LcpRayTermination, SrbmError
from srbm_model import validate

EXIT_PRODUCT_FORM = 0
EXIT_INTERNAL = 1
EXIT_INVALID = 2
EXIT_NOT_PRODUCT_FORM = 3

LOG_FORMAT = '%(asctime)s - %(levelname)s - %(message)s'


def setup_logging(level: int = logging.INFO, log_file: Optional[str] = None):
    """Log to standard error, and to log_file when given"""
    handlers = [logging.StreamHandler(sys.stderr)]
    if log_file:
        handlers.append(logging.FileHandler(log_file))
    logging.basicConfig(level=level, format=LOG_FORMAT, handlers=handlers, force=True)


def _verdict_exit(verdict: bool) -> int:
    return EXIT_PRODUCT_FORM if verdict else EXIT_NOT_PRODUCT_FORM


def _load_valid(path: str, tol: Tolerances) -> Tuple[dio.Instance, geo.GeometryBundle]:
    instance = dio.read_instance(path)
    validation = validate(instance.data, tol)
    if not validation.is_valid:
        raise InstanceError(f"{path} is not a valid SRBM: completely-S {validation.exists}, "
                            f"stable {validation.stable_necessary}")
    return instance, geo.compute_rays(instance.data, tol)


def _pair_indices(pair: List[int], d: int) -> Tuple[int, int]:
    i, j = pair[0] - 1, pair[1] - 1
    if not 0 <= i < j < d:
        raise IndexOutOfRange(f"--pair {pair[0]} {pair[1]} needs 1 <= i < j <= {d}")
    return i, j


def cmd_diagnose(args, config: ConfigManager, tol: Tolerances) -> int:
    instance = dio.read_instance(args.instance)
    doc = dio.diagnose_instance(instance, tol, vp_target=args.vp_target,
                                timestamp=args.json_out is None)
    dio.write_diagnosis(doc, args.json_out)

    if doc.verdict == dio.VERDICT_INVALID:
        return EXIT_INVALID
    if not doc.product_form.agree:
        logging.error("Skew symmetry and the symmetry-point test disagree")
        return EXIT_INTERNAL
    return _verdict_exit(doc.product_form.product_form)


def cmd_project(args, config: ConfigManager, tol: Tolerances) -> int:
    instance, bundle = _load_valid(args.instance, tol)
    i, j = _pair_indices(args.pair, instance.data.d)
    payload = {"pair": [i + 1, j + 1], "tolerances": tol}

    if geo.is_degenerate(bundle, i, j, tol):
        payload.update({"degenerate": True, "c_ij": bundle.c[i, j]})
        dio.write_json(payload, args.json_out)
        logging.error(f"Pair ({i + 1}, {j + 1}) is degenerate: c_{i + 1}{j + 1} = {bundle.c[i, j]:.3e}")
        return EXIT_INVALID

    pair = pj.pair_srbm(instance.data, bundle, i, j, tol)
    report = pj.pair_diagnosis(pair, tol)
    payload.update({
        "degenerate": False,
        "pair_srbm": pair,
        "symmetry_points": pj.pair_symmetry_points(pair, tol),
        "product_form": report,
    })
    dio.write_json(payload, args.json_out)
    return _verdict_exit(report.product_form)


def cmd_plot(args, config: ConfigManager, tol: Tolerances) -> int:
    if not (args.svg or args.csv):
        logging.error("plot needs --svg and/or --csv")
        return EXIT_INVALID
    instance, bundle = _load_valid(args.instance, tol)
    i, j = _pair_indices(args.pair, instance.data.d)
    samples = args.samples or int(config.get_setting("plot", "samples", 360))

    try:
        fig_data = figures.slice_figure(instance.data, bundle, i, j, samples, tol)
    except DegeneratePair as e:
        logging.error(f"Cannot draw pair ({i + 1}, {j + 1}): {e}")
        return EXIT_INVALID
    except ValueError as e:
        logging.error(str(e))
        return EXIT_INVALID

    if args.svg:
        figures.write_svg(fig_data, args.svg,
                          margin=float(config.get_setting("plot", "margin", 0.1)),
                          width=float(config.get_setting("plot", "width_inches", 6.0)),
                          height=float(config.get_setting("plot", "height_inches", 6.0)))
    if args.csv:
        figures.write_slice_csv(fig_data, args.csv)
    return EXIT_PRODUCT_FORM


def _log_progress(reading: Dict[str, Any]):
    logging.debug(f"Simulation running at {reading['steps_per_second']:.3g} steps/s, "
                  f"{reading['memory_mb']:.0f} MB resident")


def cmd_simulate(args, config: ConfigManager, tol: Tolerances) -> int:
    instance, _ = _load_valid(args.instance, tol)
    data = instance.data
    try:
        sim_config = sim.SimConfig.from_config(
            config, step=args.step, horizon=args.horizon, burn_in=args.burn_in, seed=args.seed,
            batches=args.batches, replications=args.replications, workers=args.workers,
            dump_path=args.dump, boundary_bridge=False if args.no_bridge else None)
    except (TypeError, ValueError) as e:
        logging.error(f"Invalid simulation settings: {e}")
        return EXIT_INVALID

    estimate = sim.simulate(data, sim_config, tol, progress=_log_progress)
    payload = {"config": sim_config, "tolerances": tol, "estimate": estimate}
    code = EXIT_PRODUCT_FORM

    if args.check_alpha:
        alpha = pf.alpha_formula(data, tol)
        if np.any(alpha <= 0):
            logging.warning(f"Product-form rates are not positive: {alpha.tolist()}")
        verdict = sim.empirical_product_form_test(estimate, alpha, **config.get_section("empirical_test"))
        payload["empirical_check"] = verdict
        code = _verdict_exit(verdict.passed)

    dio.write_json(payload, args.json_out)
    return code


def cmd_tandem(args, config: ConfigManager, tol: Tolerances) -> int:
    if args.instance:
        instance = dio.read_instance(args.instance)
        if instance.tandem is None:
            raise InstanceError(f"{args.instance} has no tandem section")
        spec = instance.tandem
    elif args.beta and args.c:
        spec = td.TandemSpec(args.beta, args.c)
    else:
        logging.error("tandem needs an instance file or both --beta and --c")
        return EXIT_INVALID
    payload = td.build_srbm(spec).to_dict()
    payload["tolerances"] = tol
    dio.write_json(payload, args.out)
    return EXIT_PRODUCT_FORM


def cmd_check(args, config: ConfigManager, tol: Tolerances) -> int:
    """Recompute a stored diagnosis from its own instance and tolerances; 0 when it holds"""
    check = dio.read_diagnosis(args.document)
    for mismatch in check.mismatches:
        logging.error(f"{args.document}: {mismatch}")
    if not check.consistent:
        return EXIT_INTERNAL
    logging.info(f"{args.document} is consistent: {check.stored.get('verdict')}")
    return EXIT_PRODUCT_FORM


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="srbm-pf",
        description="Product-form diagnosis, projection, plotting and simulation of SRBMs")
    parser.add_argument("--profile", help="configuration profile (default, quick, fine, strict, ...)")
    parser.add_argument("--config-dir", help="directory holding settings.json and profiles.json")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("--verbose", "-v", action="store_true", help="debug logging")
    verbosity.add_argument("--quiet", "-q", action="store_true", help="warnings and errors only")
    parser.add_argument("--tol", type=float, help="relative verdict tolerance (default 1e-8)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("diagnose", help="validate an instance and decide product form")
    p.add_argument("instance")
    p.add_argument("--json-out", help="write the document here instead of standard output")
    p.add_argument("--vp-target", type=float, nargs=3, metavar=("Z1", "Z2", "Z3"),
                   help="add the conjectured path to this point (three-station tandems)")
    p.set_defaults(handler=cmd_diagnose)

    p = sub.add_parser("project", help="two-dimensional SRBM of a coordinate pair")
    p.add_argument("instance")
    p.add_argument("--pair", type=int, nargs=2, required=True, metavar=("I", "J"))
    p.add_argument("--json-out")
    p.set_defaults(handler=cmd_project)

    p = sub.add_parser("plot", help="SVG and CSV of a slice ellipse")
    p.add_argument("instance")
    p.add_argument("--pair", type=int, nargs=2, required=True, metavar=("I", "J"))
    p.add_argument("--svg")
    p.add_argument("--csv")
    p.add_argument("--samples", type=int)
    p.set_defaults(handler=cmd_plot)

    p = sub.add_parser("simulate", help="estimate the stationary law by simulation")
    p.add_argument("instance")
    p.add_argument("--step", type=float)
    p.add_argument("--horizon", type=float)
    p.add_argument("--burn-in", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--batches", type=int)
    p.add_argument("--replications", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--dump", help="CSV of the sampled path")
    p.add_argument("--no-bridge", action="store_true", help="plain projection at the boundary")
    p.add_argument("--check-alpha", action="store_true",
                   help="compare the estimate with the product-form rates; exit 0 or 3")
    p.add_argument("--json-out")
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("tandem", help="expand a tandem queue into raw SRBM data")
    p.add_argument("instance", nargs="?")
    p.add_argument("--beta", type=float, nargs="+")
    p.add_argument("--c", type=float, nargs="+")
    p.add_argument("--out")
    p.set_defaults(handler=cmd_tandem)

    p = sub.add_parser("check", help="re-validate a stored diagnosis document; exit 0 or 1")
    p.add_argument("document")
    p.set_defaults(handler=cmd_check)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)

    config = ConfigManager(args.config_dir)
    if args.profile and not config.switch_profile(args.profile):
        return EXIT_INVALID
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else \
        getattr(logging, str(config.get_setting("logging", "level", "INFO")).upper(), logging.INFO)
    setup_logging(level, config.get_setting("logging", "file"))

    tol = Tolerances.from_config(config)
    if args.tol is not None:
        tol = tol.with_verdict(args.tol)

    try:
        return args.handler(args, config, tol)
    except LcpRayTermination as e:
        logging.error(f"Reflection step failed after retries: {e}")
        return EXIT_INTERNAL
    except SrbmError as e:
        logging.error(f"Invalid input: {e}")
        return EXIT_INVALID
    except Exception as e:
        logging.error(f"Internal error: {e}")
        logging.error(traceback.format_exc())
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())

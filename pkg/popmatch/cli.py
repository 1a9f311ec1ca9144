"""
popmatch command line

Subcommands: solve, verify, gen, oracle, convert. Exit status 0 means found or
holds, 1 means none exists or the check fails, 2 is an input, flavor or usage
error and 3 an exceeded enumeration budget.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Callable, Dict, Optional, Sequence

from pydantic import ValidationError

from popmatch.config import Settings, load_settings
from popmatch.errors import BudgetExceededError, ConfigError, FlavorError, InstanceFormatError
from popmatch.generator import GeneratorConfig, generate_instance
from popmatch.house_allocation import (
    HACriterion,
    aggregate_to_partial_order,
    certainly_popular_ha,
    popular_ha,
    verify_ha,
)
from popmatch.instance_io import (
    instance_to_dict,
    parse_instance,
    parse_matching,
    serialize_instance,
    serialize_matching,
)
from popmatch.models import Layers, MarketInstance, MarketModel, Matching, Robust, Verdict
from popmatch.oracle import EnumerationBudget, Property, brute_check, brute_exists
from popmatch.preferences import independent_to_layers, layers_to_independent, with_scenario
from popmatch.robust_ha import k_robust_popular_ha
from popmatch.two_sided import (
    Criterion,
    certainly_dominant,
    certainly_stable,
    duplicate_instance,
    gale_shapley,
    robust_to_uncertain,
    solve_robust_two_sided,
    verify_two_sided,
)
from popmatch.utils import canonical_json, plural

logger = logging.getLogger(__name__)

EXIT_FOUND = 0
EXIT_NONE = 1
EXIT_ERROR = 2
EXIT_BUDGET = 3

SOLVERS: Dict[str, Callable[[MarketInstance], Optional[Matching]]] = {
    "stable": gale_shapley,
    "certainly-stable": certainly_stable,
    "certainly-dominant": certainly_dominant,
    "k-robust-stable": lambda instance: solve_robust_two_sided(instance, Criterion.STABLE),
    "k-robust-dominant": lambda instance: solve_robust_two_sided(instance, Criterion.DOMINANT),
    "popular-ha": popular_ha,
    "certainly-popular-ha": certainly_popular_ha,
    "k-robust-popular-ha": k_robust_popular_ha,
}

# No polynomial algorithm is known for these; the oracle answers them on small instances
ORACLE_ONLY = ("certainly-popular", "k-robust-popular", "sum-popular", "sum-dominant", "sum-popular-ha")

CRITERIA = [p.value for p in Property]


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError as e:
        raise InstanceFormatError(f"{path} is not UTF-8 text: {e.reason}") from e


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _verdict_json(verdict: Verdict) -> str:
    data: Dict[str, object] = {"holds": verdict.holds}
    if not verdict.holds:
        witness = verdict.witness
        data["witness"] = [list(p) for p in witness.sorted_pairs()] if isinstance(witness, Matching) else list(witness)
        data["reason"] = verdict.reason
        data["scenario"] = verdict.scenario
    return canonical_json(data)


def run_solve(args: argparse.Namespace, settings: Settings) -> int:
    instance = parse_instance(_read(args.instance))
    if args.problem in ORACLE_ONLY:
        raise FlavorError(f"{args.problem} has no polynomial solver; run `oracle --property ... --exists` instead")
    matching = SOLVERS[args.problem](instance)
    if matching is None:
        print(f"No {args.problem} matching exists", file=sys.stderr)
        return EXIT_NONE
    _emit(serialize_matching(matching), args.out)
    print(f"Found {args.problem} matching with {plural(len(matching), 'pair')}", file=sys.stderr)
    return EXIT_FOUND


def _first_profile_only(instance: MarketInstance) -> MarketInstance:
    profile = {u: instance.lists_of(u)[0] for u in instance.ranking_agents}
    return with_scenario(instance, Layers(profiles=(profile,)))


def _verify(instance: MarketInstance, matching: Matching, criterion: Property) -> Verdict:
    robust = isinstance(instance.scenario, Robust)
    name = criterion.value
    if name.startswith("certainly-") and robust:
        raise FlavorError(f"{name} needs the layers or independent flavor; use k-robust-{criterion.base}")
    if name.startswith("k-robust-") and not robust:
        raise FlavorError(f"{name} needs the robust flavor")
    if criterion.base == name:
        instance = _first_profile_only(instance)

    if instance.is_ha:
        if criterion.base != "popular":
            raise FlavorError(f"house allocation supports popularity criteria only, not {name}")
        if criterion == Property.POPULAR:
            return verify_ha(instance, matching, HACriterion.POPULAR)
        return verify_ha(instance, matching, HACriterion(name))

    aggregated = name.startswith("sum-")
    return verify_two_sided(instance, matching, Criterion(criterion.base), aggregated=aggregated)


def run_verify(args: argparse.Namespace, settings: Settings) -> int:
    instance = parse_instance(_read(args.instance))
    matching = parse_matching(_read(args.matching), instance)
    verdict = _verify(instance, matching, Property(args.criterion))
    _emit(_verdict_json(verdict), args.out)
    return EXIT_FOUND if verdict.holds else EXIT_NONE


def run_gen(args: argparse.Namespace, settings: Settings) -> int:
    try:
        config = GeneratorConfig(
            seed=args.seed,
            model=MarketModel(args.model),
            n_a=args.n_a,
            n_b=args.n_b,
            list_len_min=args.list_len_min,
            list_len_max=args.list_len_max,
            flavor=args.flavor,
            layers=args.layers,
            set_size=args.set_size,
            uncertain_agents=args.uncertain_agents,
            k=args.k,
            cap_min=args.cap_min,
            cap_max=args.cap_max,
        )
    except ValidationError as e:
        raise InstanceFormatError(f"invalid generator settings: {e.errors()[0]['msg']}") from e
    _emit(serialize_instance(generate_instance(config)), args.out)
    return EXIT_FOUND


def run_oracle(args: argparse.Namespace, settings: Settings) -> int:
    instance = parse_instance(_read(args.instance))
    budget = EnumerationBudget.from_settings(settings)
    prop = Property(args.property)
    if args.check:
        matching = parse_matching(_read(args.check), instance)
        verdict = brute_check(instance, matching, prop, budget)
        _emit(_verdict_json(verdict), args.out)
        return EXIT_FOUND if verdict.holds else EXIT_NONE
    found = brute_exists(instance, prop, budget)
    if found is None:
        print(f"No {prop.value} matching exists", file=sys.stderr)
        return EXIT_NONE
    _emit(serialize_matching(found), args.out)
    return EXIT_FOUND


def run_convert(args: argparse.Namespace, settings: Settings) -> int:
    instance = parse_instance(_read(args.instance))
    if args.to == "duplicated":
        data = duplicate_instance(instance).to_dict()
    elif args.to == "uncertain":
        data = instance_to_dict(robust_to_uncertain(instance))
    elif args.to == "partial-order":
        data = aggregate_to_partial_order(instance).to_dict()
    elif args.to == "independent":
        data = instance_to_dict(layers_to_independent(instance))
    else:
        data = instance_to_dict(independent_to_layers(instance))
    _emit(canonical_json(data), args.out)
    return EXIT_FOUND


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="popmatch", description="Popular, dominant and stable matchings under uncertain preferences"
    )
    parser.add_argument("--log-level", default=None, help="Logging level (default: POPMATCH_LOG_LEVEL or INFO)")
    parser.add_argument("--budget-matchings", type=int, default=None, help="Oracle limit on enumerated matchings")
    parser.add_argument("--budget-profiles", type=int, default=None, help="Oracle limit on enumerated profiles")
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="Find a matching with the requested property")
    solve.add_argument("instance")
    solve.add_argument("--problem", required=True, choices=sorted(SOLVERS) + list(ORACLE_ONLY))
    solve.add_argument("--out", default=None, help="Matching file to write (default: stdout)")
    solve.set_defaults(handler=run_solve)

    verify = sub.add_parser("verify", help="Check a matching against a criterion")
    verify.add_argument("instance")
    verify.add_argument("matching")
    verify.add_argument("--criterion", required=True, choices=CRITERIA)
    verify.add_argument("--out", default=None)
    verify.set_defaults(handler=run_verify)

    gen = sub.add_parser("gen", help="Generate a seeded random instance")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--model", choices=[m.value for m in MarketModel], default=MarketModel.TWO_SIDED.value)
    gen.add_argument("--n-a", type=int, default=3)
    gen.add_argument("--n-b", type=int, default=3)
    gen.add_argument("--list-len-min", type=int, default=1)
    gen.add_argument("--list-len-max", type=int, default=None)
    gen.add_argument("--flavor", choices=["layers", "independent", "robust"], default="layers")
    gen.add_argument("--layers", type=int, default=1)
    gen.add_argument("--set-size", type=int, default=2)
    gen.add_argument("--uncertain-agents", type=int, default=None)
    gen.add_argument("--k", type=int, default=1)
    gen.add_argument("--cap-min", type=int, default=1)
    gen.add_argument("--cap-max", type=int, default=1)
    gen.add_argument("--out", default=None)
    gen.set_defaults(handler=run_gen)

    oracle = sub.add_parser("oracle", help="Decide a property by exhaustive enumeration")
    oracle.add_argument("instance")
    oracle.add_argument("--property", required=True, choices=CRITERIA)
    mode = oracle.add_mutually_exclusive_group(required=True)
    mode.add_argument("--check", metavar="MATCHING", default=None)
    mode.add_argument("--exists", action="store_true")
    oracle.add_argument("--out", default=None)
    oracle.set_defaults(handler=run_oracle)

    convert = sub.add_parser("convert", help="Write a reduced or converted instance")
    convert.add_argument("instance")
    targets = ["duplicated", "uncertain", "partial-order", "independent", "layers"]
    convert.add_argument("--to", required=True, choices=targets)
    convert.add_argument("--out", default=None)
    convert.set_defaults(handler=run_convert)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        settings = load_settings(args.log_level, args.budget_matchings, args.budget_profiles)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR

    logging.basicConfig(
        level=settings.log_level,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        stream=sys.stderr,
    )
    try:
        return args.handler(args, settings)
    except (InstanceFormatError, FlavorError) as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR
    except BudgetExceededError as e:
        logger.error(f"{args.command} stopped: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_BUDGET
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR
    except Exception as e:
        logger.exception(f"Unexpected error in {args.command}: {str(e)}")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())

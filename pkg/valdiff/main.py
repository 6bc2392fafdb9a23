"""
Command-line entry point.

    python valdiff/main.py series eval --expr "(1+t)*(1-t)" --prec 3
    python valdiff/main.py hensel solve --poly "s0(x)^2 - (1+t)" --start "1" --prec 5
    python valdiff/main.py transum --op "e^D-1" --rhs "x^(-2)" --order 6

Every run prints one JSON document on stdout; logs go to stderr.
Exit codes: 0 success, 1 domain error, 2 parse or usage error.
"""

import argparse
import json
import sys
import traceback
from typing import List, Optional

from dotenv import load_dotenv

load_dotenv()

# Import after the environment is loaded: modules read their caps at import
from algebra.hensel import MAX_ITER
from api.routes import Envelope, dispatch, error_response, internal_error_response
from utils.errors import ParseError, UsageError, ValdiffError
from utils.logger import log_error, log_info


class _ArgumentParser(argparse.ArgumentParser):
    """argparse that raises instead of printing usage and exiting."""

    def error(self, message):
        raise UsageError(message)


def _common_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--residue", choices=["q", "ratshift", "expgroup"], default="q",
                        help="residue field instance (default: q)")
    common.add_argument("--gamma-dim", type=int, default=None, help="dimension n of Γ = ℚ^n (default: 1)")
    common.add_argument("--gamma-sigma", default=None,
                        help='lower-triangular matrix of σ on Γ, e.g. "[[1,0],[1,1]]" or "2" (default: identity)')
    common.add_argument("--prec", default=None, help='precision cap, e.g. "10" or "(10,0)"')
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_flags()
    parser = _ArgumentParser(prog="valdiff", description="Computations in valued difference fields")
    commands = parser.add_subparsers(dest="command", parser_class=_ArgumentParser, required=True)

    def leaf(group, name: str, help_text: str) -> argparse.ArgumentParser:
        return group.add_parser(name, parents=[common], help=help_text)

    series = commands.add_parser("series", help="Hahn series arithmetic")
    series_actions = series.add_subparsers(dest="action", parser_class=_ArgumentParser, required=True)
    for name, help_text in [("eval", "evaluate an expression"), ("invert", "1/a"), ("rv", "class of a in RV")]:
        leaf(series_actions, name, help_text).add_argument("--expr", required=True)
    sigma = leaf(series_actions, "sigma", "σ^k(a)")
    sigma.add_argument("--expr", required=True)
    sigma.add_argument("--times", type=int, default=1)

    trop = commands.add_parser("trop", help="tropical evaluation and regularity")
    trop_actions = trop.add_subparsers(dest="action", parser_class=_ArgumentParser, required=True)
    p = leaf(trop_actions, "eval", "F_v(γ) and its minimizers")
    p.add_argument("--poly", required=True)
    p.add_argument("--gamma", required=True, help='γ, or "γ1; γ2" for several variables')
    p = leaf(trop_actions, "zeros", "tropical zeros of an ordinary polynomial")
    p.add_argument("--poly", required=True)
    p = leaf(trop_actions, "regular", "is v(F(a)) = F_v(v(a))")
    p.add_argument("--poly", required=True)
    p.add_argument("--point", required=True, help='a, or "a1; a2" for several variables')
    p = leaf(trop_actions, "adjust", "adjust a finite pc-trace to regular entries")
    p.add_argument("--trace", required=True, help='entries separated by ";"')
    p.add_argument("--limit", required=True, help="a pseudolimit of the trace")
    p.add_argument("--poly", required=True, action="append")

    hensel = commands.add_parser("hensel", help="σ-hensel configuration and refinement")
    hensel_actions = hensel.add_subparsers(dest="action", parser_class=_ArgumentParser, required=True)
    p = leaf(hensel_actions, "config", "test (G, a) for σ-hensel configuration")
    p.add_argument("--poly", required=True)
    p.add_argument("--start", required=True)
    p = leaf(hensel_actions, "solve", "iterate the refinement step")
    p.add_argument("--poly", required=True)
    p.add_argument("--start", required=True)
    p.add_argument("--max-iter", type=int, default=MAX_ITER)

    kapranov = commands.add_parser("kapranov", help="lifting tropical zeros to roots")
    kapranov_actions = kapranov.add_subparsers(dest="action", parser_class=_ArgumentParser, required=True)
    p = leaf(kapranov_actions, "lift", "a root of value γ")
    p.add_argument("--poly", required=True)
    p.add_argument("--gamma", required=True, help='γ, or "γ1; γ2" for several variables')
    p = leaf(kapranov_actions, "roots", "all roots of an ordinary one-variable polynomial")
    p.add_argument("--poly", required=True)

    transum = commands.add_parser("transum", help="solve Σ h_i f(x+i) = rhs in flat transseries")
    transum.add_argument("--op", required=True, help='difference operator, e.g. "e^D-1"')
    transum.add_argument("--rhs", required=True, help='flat right-hand side, e.g. "x^(-2)"')
    transum.add_argument("--order", type=int, default=None, help="truncation order of the ∂-expansion")
    return parser


def _emit(model: Envelope):
    print(json.dumps(model.model_dump(by_alias=True), sort_keys=True))


def run(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _emit(dispatch(args))
        return 0
    except (ParseError, UsageError) as e:
        log_error(f"[CLI] {e.kind}: {e.message}")
        _emit(error_response(e))
        return 2
    except ValdiffError as e:
        log_error(f"[CLI] {e.kind}: {e.message}")
        _emit(error_response(e))
        return 1
    except SystemExit as e:
        # --help
        return int(e.code or 0)
    except Exception as e:
        log_error(f"[CLI] unexpected error: {e}\n{traceback.format_exc()}")
        _emit(internal_error_response(e))
        return 1


def main():
    log_info("[CLI] valdiff starting")
    sys.exit(run())


if __name__ == "__main__":
    main()

#!/usr/bin/env python3
"""
nirenberg-s3 - Main Entry Point

Numerical companion for the half-Laplacian Nirenberg problem on S^3: Morse
and degree analysis of K, bubble asymptotics, reduced-model predictions and
subcritical continuation.

Usage:
    python main.py COMMAND [--config FILE] [--out DIR] [--seed N] [--L N] [--zonal] [--debug]

Examples:
    python main.py analyze                       # K = x4 + 2 with defaults
    python main.py validate --config run.toml    # identity suite and Pohozaev fluxes
    python main.py continue --zonal --L 512      # zonal continuation in tau
"""

import argparse
import logging
import os
import sys

# Add the current directory to Python path to ensure imports work
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

try:
    from nirenberg_s3.cli.commands import COMMANDS, EXIT_CONFIG, run_command
    from nirenberg_s3.cli.run_config import load_run_config
    from nirenberg_s3.core.errors import ConfigError
except ImportError as e:
    print(f"❌ Import Error: {e}")
    print("Please ensure all dependencies are properly installed. Run: pip install -r requirements.txt")
    sys.exit(1)


def setup_logging(debug: bool = False):
    logging.basicConfig(
        level=logging.DEBUG if debug else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    # jax logs every compilation at DEBUG
    logging.getLogger("jax").setLevel(logging.WARNING)


def main(argv=None) -> int:
    """Main function"""
    parser = argparse.ArgumentParser(
        description="nirenberg-s3 - prescribed half-curvature on S^3: degree, bubbles and blow-up numerics",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Example usage:
  python main.py analyze                          # critical points and Index(K)
  python main.py validate                         # spectral, asymptotic and flux checks
  python main.py solve --config run.toml          # single Newton solve
  python main.py continue --zonal --L 512         # branches from tau = 0.5 down to 0.005
  python main.py predict && python main.py report # reduced model vs. computed branches

Exit codes:
  0 ok, 1 configuration error, 2 degenerate K, 3 validation inconclusive, 4 solver failure
        """
    )

    parser.add_argument(
        "command",
        choices=list(COMMANDS),
        help="What to run"
    )

    parser.add_argument(
        "--config",
        type=str,
        default=None,
        help="TOML run configuration (default: built-in defaults)"
    )

    parser.add_argument(
        "--out",
        type=str,
        default=None,
        help="Output directory (default: ./outputs)"
    )

    parser.add_argument(
        "--seed",
        type=int,
        default=None,
        help="Seed for every random choice"
    )

    parser.add_argument(
        "--L",
        type=int,
        default=None,
        help="Band limit (the zonal band limit with --zonal)"
    )

    parser.add_argument(
        "--zonal",
        action="store_true",
        help="Use the axisymmetric (zonal) discretisation"
    )

    parser.add_argument(
        "--debug",
        action="store_true",
        help="Enable debug mode"
    )

    args = parser.parse_args(argv)
    setup_logging(args.debug)

    print(f"🚀 nirenberg-s3: {args.command}")
    print("=" * 50)

    try:
        cfg = load_run_config(args.config).with_overrides(
            seed=args.seed, L=args.L, zonal=args.zonal, out=args.out
        )
    except ConfigError as e:
        print(f"❌ Config error: {e}")
        return EXIT_CONFIG

    print(f"📝 K = {cfg.general.K}, layout = {cfg.layout}, L = {cfg.resolution}, seed = {cfg.seed}")
    print(f"📂 Output: {cfg.out}")

    try:
        code, message = run_command(args.command, cfg)
    except KeyboardInterrupt:
        print("\n👋 User interrupted, stopping...")
        return 130
    except Exception as e:
        print(f"❌ {args.command} failed: {e}")
        if args.debug:
            import traceback
            traceback.print_exc()
        return EXIT_CONFIG

    print(message)
    print("=" * 50)
    return code


if __name__ == "__main__":
    sys.exit(main())

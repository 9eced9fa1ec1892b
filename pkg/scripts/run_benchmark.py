#!/usr/bin/env python3
"""Run the example configs that share the synthetic logistic problem and
print the comparison table (final/best loss, sample counts, output CSVs).

Equivalent to:

    stochopt compare --config scripts/configs/logistic_aras.ini \
                     --config scripts/configs/logistic_sgd.ini \
                     --config scripts/configs/logistic_svrg.ini
"""

import argparse
import sys
from pathlib import Path

from stochopt.harness import main as cli

CONFIGS = ("logistic_aras.ini", "logistic_sgd.ini", "logistic_svrg.ini")


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument(
        "--configs-dir",
        default=str(Path(__file__).parent / "configs"),
        help="directory holding the example configs",
    )
    args = parser.parse_args(argv)
    cli_args = ["compare"]
    for name in CONFIGS:
        cli_args += ["--config", str(Path(args.configs_dir) / name)]
    return cli(cli_args)


if __name__ == "__main__":
    sys.exit(main())

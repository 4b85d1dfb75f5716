#!/usr/bin/env python3
"""Pilot that calibrates the acceptance margin for the debiasing experiment.

Measures the mean macF1 and spAUC gaps between the fused-trained detector and
the plain baseline over matched seeds on the standard flipped-bias recipe,
and prints half of each gap. Those halves are the regression thresholds
frozen in tests/test_acceptance.py; rerun this after changing the recipe or
the trainer defaults and update the thresholds if they moved.
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from endef.experiments import (  # noqa: E402
    default_detector_spec,
    default_entity_spec,
    default_train_config,
    flipped_bias_spec,
    run_paired_comparison,
)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seeds", type=int, default=10)
    args = parser.parse_args(argv)

    outcome = run_paired_comparison(
        flipped_bias_spec(),
        default_detector_spec(),
        default_entity_spec(),
        default_train_config(),
        seeds=range(args.seeds),
    )
    gap_macf1 = outcome.gap("macf1")
    gap_spauc = outcome.gap("spauc")
    print(f"pilot over {args.seeds} seeds")
    print(f"  mean macF1 gap : {gap_macf1:+.6f}   -> threshold {gap_macf1 / 2:.4f}")
    print(f"  mean spAUC gap : {gap_spauc:+.6f}   -> threshold {gap_spauc / 2:.4f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

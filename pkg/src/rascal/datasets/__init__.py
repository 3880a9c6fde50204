"""Bundled simulated dataset shaped like a 7-item mathematics self-concept scale.

4026 persons x 7 items on a 1..4 scale, generated with::

    rascal simulate --n 4026 --seed 2011 --out <dir>

i.e. abilities N(0, 1), item difficulties and Andrich thresholds set to the
reported calibration, and items 03BR, 03CR and 03GR written reverse-keyed.
"""

from pathlib import Path

HERE = Path(__file__).resolve().parent
BUNDLED_RESPONSES = HERE / "selfconcept_sim_4026x7.csv"
BUNDLED_KEYS = HERE / "selfconcept_sim_keys.csv"
BUNDLED_SEED = 2011

"""
A density sweep in miniature
============================

The full comparison uses 80 to 200 vehicles, 15 seeds and 300 s runs.  This
version keeps the shape of the experiment but finishes in under a minute.
"""

import sys

from uavroute import ScenarioConfig, density_sweep, sweep_csv

base = ScenarioConfig().replace(duration=60.0)
rows = density_sweep(base, [80, 200], seeds=[1, 2, 3])
sys.stdout.write(sweep_csv(rows))

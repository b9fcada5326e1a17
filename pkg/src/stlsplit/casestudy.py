"""Built-in robot monitoring scenario.

A planar single integrator with unit speed per axis patrols between a TARGET
and a HOME station, charges at a CHARGER for four consecutive samples, and
never leaves the SAFETY area.
"""
from __future__ import annotations

from .parser import ScenarioFile, parse_scenario

# x0 sits on the SAFETY boundary, so only a zero margin is feasible
CASESTUDY_TEXT = """\
[SYSTEM]
A = 1 0; 0 1
B = 1 0; 0 1
input_lo = -1 -1
input_hi = 1 1
x0 = 0 5
horizon = 45

[REGIONS]
SAFETY = [0,8] x [0,7]
TARGET = [1,3] x [4,6]
HOME = [5,7] x [4,6]
CHARGER = [5,7] x [1,3]

[SPEC]
formula = G[0,35] F[0,5] inbox(TARGET)
          & G[15,40] F[0,5] inbox(HOME)
          & F[20,42] G[0,3] inbox(CHARGER)
          & G[0,45] inbox(SAFETY)

[SPLIT]
kappas = 0, 15, 30, 45
taus = 3

[SOLVER]
M = 10000
epsilon = 0
lambda = 1
node_budget = 200000
time_budget_s = 120
seed = 0
"""


def build_casestudy() -> ScenarioFile:
    """The robot scenario as a validated :class:`ScenarioFile`."""
    return parse_scenario(CASESTUDY_TEXT)

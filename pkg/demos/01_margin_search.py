"""Watch the margin search settle on a gate chain with three varying parameters.

Run: python demos/01_margin_search.py
"""
import numpy as np

from isle.circuit import CircuitTiming, get_builtin
from isle.explorer import ExplorerConfig, isle_explorer
from isle.gates import SurrogateModel
from isle.harness import calibrate_tc
from isle.params import RandomSource, make_parameter_set

timing = CircuitTiming(get_builtin("GateChain"), SurrogateModel(), make_parameter_set("ThrPar"))
t_c = calibrate_tc(timing, 0.15, 100_000, RandomSource(1, (0,)))
print(f"target delay {t_c * 1e12:.2f} ps (15% of chips slower)")

for mode in ("d1", "d2"):
    res = isle_explorer(timing, ExplorerConfig(t_c=t_c, mode=mode), RandomSource(1, (2, 0)))
    print(f"\n{mode}: margin {res.eps_min * 1e12:+.2f} ps, {res.n_full_sims} full simulations, "
          f"loss {res.loss:.4f}, violations {res.safety_violations}")
    # passes that revealed points, around the one that set the margin
    busy = [r for r in res.trace if r.new_whites]
    k = int(np.argmin([abs(r.eps - res.eps_min) for r in busy]))
    print("   eps[ps]  new  fail  in-margin  whites")
    for r in busy[max(k - 4, 0): k + 5]:
        print(f"  {r.eps * 1e12:+7.2f}  {r.new_whites:4d}  {r.new_loss_points:4d}  "
                  f"{r.points_in_margin:9d}  {r.white_points:6d}")

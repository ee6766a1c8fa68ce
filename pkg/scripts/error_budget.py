"""Error budget of the blockade entangler for the three level schemes."""
from ensembleqc.errorbudget import (BudgetInputs, absorption_probability, budget, rb43d_inputs,
                                    rb58d_inputs, rydberg_45p58d_inputs)

for name, inp, two in (("Rb 5s-43d ensemble", rb43d_inputs(), False),
                       ("Rb 5s-58d ensemble", rb58d_inputs(), False)):
    s0, p = absorption_probability(inp, two)
    print(f"{name:22s} sigma0 = {s0:.3e} m^2  P_abs = {p:.3f}")

rep = budget(BudgetInputs(rydberg_45p58d_inputs()))
print("45p-58d single atom")
for k, v in rep.as_dict().items():
    print(f"  {k:16s} {v:.4g}" if isinstance(v, float) else f"  {k:16s} {v}")

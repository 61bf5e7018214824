# %% [markdown]
# # Command-line sweep
# Runs a small planner sweep through the CLI entry point and prints the summary table.

# %%
import tempfile
from pathlib import Path

from raqmdp.cli import main

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

# %%
out = Path(tempfile.mkdtemp())
# shipped scenario with a smaller search budget so the demo stays quick
scenario = out / "scenario.ini"
scenario.write_text((CONFIGS / "stationary_object.ini").read_text().replace("budget = 20000", "budget = 3000"))
spec = out / "sweep.ini"
spec.write_text(
    f"[sweep]\nscenario = {scenario}\nparameter = planner\n"
    "values = mcts-p0, ra-qmdp\nranges = 60\nseeds = 0\n"
)
code = main(["sweep", "--spec", str(spec), "--out", str(out / "results")])
print("exit code", code)
print((out / "results" / "summary.csv").read_text())

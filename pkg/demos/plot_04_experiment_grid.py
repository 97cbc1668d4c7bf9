"""
The full experiment grid
========================

Runs every feature family (lexicon categories, trained topics, inferred
topics and their combinations) for two topic counts on the bundled fixture,
then writes the plot-ready tables. Output goes to a temporary directory.
"""

import shutil
import tempfile
from pathlib import Path

from psyling.config import load_config
from psyling.pipeline import emit_figures, run_experiment
from psyling.synthetic import bundled_fixture

work = Path(tempfile.mkdtemp()) / "fixture"
shutil.copytree(bundled_fixture(), work)
config = load_config(work / "config.toml")

report = run_experiment(config)
for row in report.rows:
    print(f"{row.feature_set:14s} K={row.K!s:4s} RMSE={row.mean_rmse:.3f} "
          f"significant={row.n_significant_topics} max|r|={row.max_abs_r:.3f} {row.selected_features}")
for b in report.baselines:
    print("baseline", b)

for path in emit_figures(report, config.output_dir):
    print(path.name)
    print(path.read_text())

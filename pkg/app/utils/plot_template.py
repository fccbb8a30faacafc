"""
Stand-alone matplotlib script rendered next to a curve CSV. The library
itself never imports a plotting package.
"""
from typing import Sequence

from jinja2 import Environment, StrictUndefined

from app import __version__


PLOT_SCRIPT_TEMPLATE = """#!/usr/bin/env python
# Plot script for {{ csv_name }} (landscape-law {{ version }})
import csv
from pathlib import Path

import matplotlib.pyplot as plt

HERE = Path(__file__).resolve().parent
COLUMNS = {{ columns | tojson }}

with open(HERE / {{ csv_name | tojson }}, newline="") as f:
    rows = [line for line in f if line.strip() and not line.startswith("#")]
table = list(csv.DictReader(rows))
x = [float(row[{{ x | tojson }}]) for row in table]

fig, ax = plt.subplots(figsize=(7, 4.5))
for column in COLUMNS:
    ax.step(x, [float(row[column]) for row in table], where="post", label=column)
{% if logx %}ax.set_xscale("log")
{% endif %}ax.set_xlabel({{ x | tojson }})
ax.set_ylabel({{ ylabel | tojson }})
ax.set_title({{ title | tojson }})
ax.legend()
fig.tight_layout()
fig.savefig(HERE / {{ image_name | tojson }}, dpi=150)
"""

_env = Environment(undefined=StrictUndefined, keep_trailing_newline=True)
_template = _env.from_string(PLOT_SCRIPT_TEMPLATE)


def render_plot_script(
    csv_name: str,
    columns: Sequence[str],
    title: str,
    x: str = "mu",
    ylabel: str = "fraction",
    logx: bool = True,
) -> str:
    image_name = csv_name.rsplit(".", 1)[0] + ".png"
    return _template.render(
        csv_name=csv_name,
        columns=list(columns),
        title=title,
        x=x,
        ylabel=ylabel,
        logx=logx,
        image_name=image_name,
        version=__version__,
    )

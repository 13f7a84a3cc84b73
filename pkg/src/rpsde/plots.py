"""Gnuplot script emission for the CSV artifacts.

Scripts are plain text written next to the CSV; nothing is executed.  The
CSV schema is recognized from its header line, and an explicitly requested
kind must match the header or the call fails naming the expected one.
"""

import os

from .errors import SchemaError

_KIND_HEADERS = {
    "cauchy": "n,gap",
    "trajectory": "t,x",
    "rps": "phase_t,x",
    "measure": "phase,sample_index,x",
    "report": "n,estimate,se",
    "conditions": "t,beta,L",
    "contraction": "t,log_gap",
}

_TEMPLATES = {
    "cauchy": """set datafile separator ','
set logscale y
set xlabel 'pullback depth n'
set ylabel 'sup-norm gap'
plot '{csv}' skip 1 using 1:2 with linespoints title 'gap'
""",
    "trajectory": """set datafile separator ','
set xlabel 't'
set ylabel 'x'
plot '{csv}' skip 1 using 1:2 with lines title 'x1'
""",
    "rps": """set datafile separator ','
set xlabel 'phase t'
set ylabel 'S(t)'
plot '{csv}' skip 1 using 1:2 with lines title 'limit window'
""",
    "measure": """set datafile separator ','
binwidth = 0.1
bin(x, w) = w * floor(x / w) + w / 2.0
set boxwidth binwidth
set style fill solid 0.5
set xlabel 'x'
set ylabel 'count'
plot '{csv}' skip 1 using (bin($3, binwidth)):(1.0) smooth freq with boxes title 'samples'
""",
    "report": """set datafile separator ','
set logscale y
set xlabel 'n (periods)'
set ylabel 'estimate'
plot '{csv}' skip 1 using 1:2:3 with yerrorbars title 'estimate'
""",
    "conditions": """set datafile separator ','
set xlabel 't'
plot '{csv}' skip 1 using 1:2 with lines title 'beta(t)', \\
     '{csv}' skip 1 using 1:3 with lines title 'L(t)'
""",
    "contraction": """set datafile separator ','
set xlabel 't'
set ylabel 'log |X - Y|'
plot '{csv}' skip 1 using 1:2 with linespoints title 'log gap'
""",
}


def _kind_of_header(header: str):
    for kind, prefix in _KIND_HEADERS.items():
        if header.startswith(prefix):
            return kind
    return None


def emit_plot(csv_path: str, kind: str = "auto") -> str:
    """Write ``<csv>.gp`` next to the CSV and return its path."""
    with open(csv_path) as fh:
        header = fh.readline().strip()
    detected = _kind_of_header(header)
    if kind == "auto":
        if detected is None:
            known = {k: v for k, v in _KIND_HEADERS.items()}
            raise SchemaError(f"unrecognized CSV header {header!r}; known schemas: {known}")
        kind = detected
    else:
        if kind not in _KIND_HEADERS:
            raise SchemaError(f"unknown plot kind {kind!r} (choose from {sorted(_KIND_HEADERS)})")
        if detected != kind:
            raise SchemaError(
                f"CSV header {header!r} does not match kind {kind!r} "
                f"(expected header starting with {_KIND_HEADERS[kind]!r})"
            )
    out = csv_path + ".gp"
    with open(out, "w") as fh:
        fh.write(_TEMPLATES[kind].format(csv=os.path.basename(csv_path)))
    return out

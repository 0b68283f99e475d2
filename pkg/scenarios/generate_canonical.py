"""Regenerate canonical_transco.net from the builder in gasjitter.synthetic.

    python scenarios/generate_canonical.py
"""

from pathlib import Path

from gasjitter.netfile import serialize_network
from gasjitter.synthetic import canonical_transco

HEADER = """\
# Synthetic two-supply transmission line, about 2000 miles and 72 mainline
# nodes. M00 is the southern supply (slack, 800 psi); M71 the northern one.
# Flows from both ends meet at M63 (mile ~1775). Pressure bounds 500-800 psi.
# Generated by scenarios/generate_canonical.py; values are SI.
"""

if __name__ == "__main__":
    out = Path(__file__).with_name("canonical_transco.net")
    out.write_text(HEADER + "\n" + serialize_network(canonical_transco()))
    print(f"wrote {out}")

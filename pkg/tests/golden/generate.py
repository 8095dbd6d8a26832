"""Regenerate the golden CLI fixtures in this directory.

Run from the repository root:

    python3 tests/golden/generate.py

The refine and match outputs are committed and compared byte for byte,
so only regenerate them after an intentional behavior change.
"""

import pathlib
import sys

HERE = pathlib.Path(__file__).resolve().parent
sys.path.insert(0, str(HERE.parent))

from discobox import cli  # noqa: E402
from cli_helpers import make_refine_input, make_single_roi  # noqa: E402

REFINE_ARGS = ["--set", "roi_size=16", "--set", "mf_iters=5"]
MATCH_ARGS = ["--set", "roi_size=8", "--set", "icm_iters=1"]


def main():
    make_refine_input(HERE / "refine_input.dbxb", [11, 12, 13], size=16)
    make_single_roi(HERE / "match_a.dbxb", 21, size=8)
    make_single_roi(HERE / "match_b.dbxb", 22, size=8)

    rc = cli.main(["refine", "--input", str(HERE / "refine_input.dbxb"),
                   "--output", str(HERE / "refine_expected.dbxb"),
                   "--bank-out", str(HERE / "bank_expected.dbxb"), *REFINE_ARGS])
    assert rc == 0, rc
    rc = cli.main(["match", "--a", str(HERE / "match_a.dbxb"),
                   "--b", str(HERE / "match_b.dbxb"),
                   "--out", str(HERE / "match_expected.dbxb"), *MATCH_ARGS])
    assert rc == 0, rc
    print("golden fixtures written to", HERE)


if __name__ == "__main__":
    main()

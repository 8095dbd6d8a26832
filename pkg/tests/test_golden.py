"""Byte-exact regression tests against committed CLI outputs."""

import pathlib

from discobox import cli

GOLDEN = pathlib.Path(__file__).resolve().parent / "golden"

from golden.generate import MATCH_ARGS, REFINE_ARGS  # noqa: E402


def test_refine_golden_bit_exact(tmp_path):
    out = tmp_path / "out.dbxb"
    bank = tmp_path / "bank.dbxb"
    rc = cli.main(["refine", "--input", str(GOLDEN / "refine_input.dbxb"),
                   "--output", str(out), "--bank-out", str(bank), *REFINE_ARGS])
    assert rc == 0
    assert out.read_bytes() == (GOLDEN / "refine_expected.dbxb").read_bytes()
    assert bank.read_bytes() == (GOLDEN / "bank_expected.dbxb").read_bytes()


def test_match_golden_bit_exact(tmp_path):
    out = tmp_path / "out.dbxb"
    rc = cli.main(["match", "--a", str(GOLDEN / "match_a.dbxb"),
                   "--b", str(GOLDEN / "match_b.dbxb"),
                   "--out", str(out), *MATCH_ARGS])
    assert rc == 0
    assert out.read_bytes() == (GOLDEN / "match_expected.dbxb").read_bytes()

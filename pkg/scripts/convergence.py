"""Localization-error study: affine velocity, exact discrete push-forward.

Runs to T = 0.25 with dt/h = 1/4 for m = 32..256 and prints the max cell
error (in density units) and successive ratios.
"""
import sys

sys.path.insert(0, str(__import__("pathlib").Path(__file__).resolve().parent.parent / "tests"))

from test_acceptance import _affine_error  # noqa: E402

prev = None
for m in (32, 64, 128, 256):
    err, exited = _affine_error(m)
    ratio = "" if prev is None else f"  ratio {prev / err:.3f}"
    print(f"m={m:4d}  max error {err:.4e}  exited {exited:.1e}{ratio}")
    prev = err

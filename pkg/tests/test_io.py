import json
import math

import numpy as np
from hypothesis import given, strategies as st

from spgame import io


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_float_format_round_trips(x):
    s = io.fmt_float(x)
    assert float(s) == x
    digits = s.lstrip("-").split("e")[0].replace(".", "").lstrip("0")
    assert len(digits) <= 17


def test_json_keeps_order_and_nulls_nonfinite():
    text = io.dumps_json({"b": 1.5, "a": [np.float64(math.inf), np.int64(3)], "c": np.bool_(True)})
    assert list(json.loads(text)) == ["b", "a", "c"]
    assert json.loads(text)["a"] == [None, 3]
    assert text.endswith("\n")


def test_csv_layout(tmp_path):
    path = io.write_csv(tmp_path / "t.csv", ["x", "y"], [[0.1, 2], [1e-300, -3.5]])
    assert path.read_text() == "x,y\n0.1,2.0\n1e-300,-3.5\n"

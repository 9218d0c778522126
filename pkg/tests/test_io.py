import io
import json

from cavitybec.io import format_value, read_csv, write_csv, write_json


def test_format_value():
    assert format_value(0.1) == "1.0000000000000001e-01"
    assert format_value(True) == "1" and format_value(False) == "0"
    assert format_value(None) == ""
    assert format_value("low") == "low"
    assert format_value(3) == "3"


def test_csv_roundtrip(tmp_path):
    path = tmp_path / "out.csv"
    text = write_csv(path, ("a", "b"), [(1.5, "x"), (2.25, "y")], params={"eta": 80.06},
                     comments=["note"])
    lines = text.splitlines()
    assert lines[0].startswith("# params: eta=8.0060")
    assert lines[1] == "# note"
    assert lines[2] == "# columns: a,b"
    cols, rows = read_csv(path)
    assert cols == ["a", "b"]
    assert [float(r[0]) for r in rows] == [1.5, 2.25]


def test_csv_is_deterministic():
    rows = [(0.1, 0.2), (0.3, 0.4)]
    assert write_csv(io.StringIO(), ("a", "b"), rows) == write_csv(io.StringIO(), ("a", "b"), rows)


def test_json_records(tmp_path):
    path = tmp_path / "out.json"
    write_json(path, ("a", "b"), [(1.0, "x")], params={"kappa": 363.9})
    data = json.loads(path.read_text())
    assert data["params"] == {"kappa": 363.9}
    assert data["rows"] == [{"a": 1.0, "b": "x"}]

import math
import pickle

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from streamforge.instances import (
    ArffError,
    ArffFileStream,
    AttributeSpec,
    ClassTarget,
    Instance,
    InstanceSchema,
    NumericTarget,
    SchemaError,
    parse_arff,
    take,
    to_dense,
    to_sparse,
    validate,
)

ARFF = """% weather
@relation weather
@attribute outlook {sunny, overcast, rainy}
@attribute temperature numeric
@attribute 'wind speed' real
@attribute play {yes, no}

@data
sunny, 85, 3.5, no
overcast, 83, ?, yes
'rainy', 70, 1, yes {2.5}
"""


def test_parse_dense_arff():
    schema, rows = parse_arff(ARFF)
    assert schema.relation == "weather"
    assert [a.name for a in schema.attributes] == ["outlook", "temperature", "wind speed"]
    assert schema.attributes[0].values == ("sunny", "overcast", "rainy")
    assert schema.target == ClassTarget("play", ("yes", "no"))
    assert len(rows) == 3
    assert rows[0].values.tolist() == [0.0, 85.0, 3.5]
    assert rows[0].label == 1
    assert math.isnan(rows[1].values[2])
    assert rows[2].weight == 2.5 and rows[2].values[0] == 2.0


def test_parse_sparse_arff_fills_zeros():
    text = "@relation s\n@attribute a numeric\n@attribute b numeric\n@attribute c numeric\n@attribute y {n,p}\n@data\n{1 4.5, 3 p}\n{}\n"
    schema, rows = parse_arff(text)
    assert rows[0].values.tolist() == [0.0, 4.5, 0.0] and rows[0].label == 1
    assert rows[1].values.tolist() == [0.0, 0.0, 0.0] and rows[1].label == 0
    assert schema.n_attributes == 3


def test_numeric_target_range_and_choice():
    text = "@relation r\n@attribute y numeric\n@attribute x numeric\n@data\n1,5\n3,6\n2,7\n"
    schema, rows = parse_arff(text, target="y")
    assert schema.target == NumericTarget("y", 1.0, 3.0)
    assert [r.label for r in rows] == [1.0, 3.0, 2.0]
    assert rows[0].values.tolist() == [5.0]


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("@relation r\n@attribute a numeric\n@attribute y {p,q}\n1,p\n", "unexpected header line"),
        ("@relation r\n@attribute a numeric\n@attribute y {p,q}\n", "missing @data"),
        ("@relation r\n@attribute a string\n@attribute y {p,q}\n@data\n", "unsupported attribute type"),
        ("@relation r\n@attribute a numeric\n@attribute y {p,q}\n@data\n1,z\n", "unknown value 'z'"),
        ("@relation r\n@attribute a numeric\n@attribute y {p,q}\n@data\n1,p,3\n", "row has 3 values"),
        ("@relation r\n@attribute a numeric\n@attribute y {p,q}\n@data\nx,p\n", "bad numeric value"),
        ("@relation r\n@attribute a numeric\n@attribute y {p,q\n@data\n", "unterminated"),
    ],
)
def test_malformed_arff_reports_line(text, fragment):
    with pytest.raises(ArffError, match=fragment) as err:
        parse_arff(text)
    assert err.value.line is not None


def test_arff_file_stream_is_lazy_and_picklable(tmp_path):
    path = tmp_path / "w.arff"
    path.write_text(ARFF)
    stream = ArffFileStream(path)
    first = stream.next()
    clone = pickle.loads(pickle.dumps(stream))
    assert clone.next() == stream.next()
    assert first.label == 1
    assert stream.next() is not None and stream.next() is None
    stream.restart()
    assert len(list(take(stream))) == 3


def test_schema_validation():
    with pytest.raises(SchemaError):
        AttributeSpec.categorical("a", [])
    with pytest.raises(SchemaError):
        ClassTarget("y", ("only",))
    with pytest.raises(SchemaError):
        NumericTarget("y", 2.0, 2.0)
    with pytest.raises(SchemaError):
        InstanceSchema((AttributeSpec("a"), AttributeSpec("a")), ClassTarget("y", ("p", "q")))
    schema = InstanceSchema((AttributeSpec.categorical("c", "xy"), AttributeSpec("n")), ClassTarget("y", ("p", "q")))
    validate(Instance([1, 0.3], 0), schema)
    with pytest.raises(SchemaError):
        validate(Instance([2, 0.3], 0), schema)
    with pytest.raises(SchemaError):
        validate(Instance([1, 0.3], 5), schema)
    with pytest.raises(SchemaError):
        validate(Instance([1.0], 0), schema)


def test_instance_rejects_bad_input():
    with pytest.raises(ValueError):
        Instance([1.0], 0, weight=-1)
    with pytest.raises(ValueError):
        Instance([1.0, 2.0], indices=[1, 0], n_attributes=3)
    with pytest.raises(ValueError):
        Instance([1.0], indices=[5], n_attributes=3)
    inst = Instance([1.0, 2.0])
    with pytest.raises(ValueError):
        inst.values[0] = 3.0


@given(st.lists(st.sampled_from([0.0, 0.0, 1.5, -2.0, 7.25]), min_size=1, max_size=30))
def test_sparse_dense_round_trip(values):
    dense = Instance(values, 1)
    sparse = to_sparse(dense)
    assert sparse.is_sparse
    assert sparse == dense
    assert to_dense(sparse) == dense
    for i, v in enumerate(values):
        assert sparse.value(i) == v
    assert np.all(sparse.values != 0.0)

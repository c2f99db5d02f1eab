import pytest
from hypothesis import given
from hypothesis import strategies as st

from streamforge.taskspec import (
    ComponentSpec,
    TaskParseError,
    TaskSpec,
    format_task,
    parse_component,
    parse_task,
)


def test_nested_components_and_bare_values():
    spec = parse_task("PrequentialEvaluation -l (VerticalHoeffdingTree -p 4 -b wk 1000) -s (streams.generators.RandomTreeGenerator -c 10) -f 5000")
    assert spec.task == "PrequentialEvaluation"
    learner = spec.flags["l"]
    assert learner == ComponentSpec("VerticalHoeffdingTree", {"p": "4", "b": "wk 1000"})
    assert spec.flags["s"].name == "streams.generators.RandomTreeGenerator"
    assert spec.flags["f"] == "5000"


def test_negative_numbers_are_values_and_quotes_keep_spaces():
    c = parse_component('Gen -x -3.5 -f "my data/file (1).arff" -e 1e-7')
    assert c.flags == {"x": "-3.5", "f": "my data/file (1).arff", "e": "1e-7"}
    assert c.get("x") == "-3.5" and c.get("missing", "d") == "d"


def test_bare_name_is_a_component():
    spec = parse_task("PrequentialEvaluation -l VHT -s WaveformGenerator")
    assert spec.as_component().component("l") == ComponentSpec("VHT")
    with pytest.raises(TaskParseError):
        parse_task("PrequentialEvaluation -l (VHT -p 2)").as_component().get("l")


@pytest.mark.parametrize(
    "text, message, offset",
    [
        ("PrequentialEvaluation -s (", "unbalanced", 25),
        ("PrequentialEvaluation -s (A))", "unbalanced", 28),
        ("PrequentialEvaluation -l A -l B", "duplicate flag -l", 27),
        ("PrequentialEvaluation -l", "missing value for -l", 22),
        ("Evaluate -l A", "unknown task", 0),
        ("", "empty task string", 0),
        ("PrequentialEvaluation stray -l A", "expected a flag", 22),
        ('PrequentialEvaluation -l "open', "unterminated", 25),
    ],
)
def test_parse_errors_carry_offsets(text, message, offset):
    with pytest.raises(TaskParseError, match=message) as err:
        parse_task(text)
    assert err.value.position == offset
    assert f"(at offset {offset})" in str(err.value)


names = st.from_regex(r"[A-Za-z][A-Za-z0-9_.]{0,8}", fullmatch=True)
flags = st.from_regex(r"[A-Za-z][A-Za-z0-9]{0,4}", fullmatch=True)
words = st.one_of(
    st.from_regex(r"[A-Za-z0-9_./:]{1,8}", fullmatch=True).filter(lambda w: not w.startswith("-")),
    st.floats(-1e6, 1e6, allow_nan=False).map(repr),
    st.text(st.characters(codec="ascii", exclude_characters='"\\\x00'), min_size=1, max_size=10).filter(lambda s: s.strip() == s and s),
)
values = st.one_of(st.lists(words, min_size=1, max_size=3).map(" ".join), st.deferred(lambda: components))
components = st.builds(ComponentSpec, names, st.dictionaries(flags, values, max_size=3))


@given(st.dictionaries(flags, values, max_size=4))
def test_round_trip(fl):
    spec = TaskSpec("PrequentialEvaluation", fl)
    assert parse_task(format_task(spec)) == spec


def test_documented_examples():
    spec = parse_task("PrequentialEvaluation -l classifiers.ensemble.Bagging -s (ArffFileStream -f covtypeNorm.arff) -f 100000")
    assert spec.flags["l"] == "classifiers.ensemble.Bagging"
    assert spec.flags["s"] == ComponentSpec("ArffFileStream", {"f": "covtypeNorm.arff"})
    assert spec.flags["f"] == "100000"
    spec = parse_task("PrequentialEvaluation -s (WaveformGenerator) -l (VAMR -p 2) -f 1000")
    assert spec.flags == {"s": ComponentSpec("WaveformGenerator"), "l": ComponentSpec("VAMR", {"p": "2"}), "f": "1000"}
    with pytest.raises(TaskParseError, match="unbalanced") as err:
        parse_task("Prequential -s (")
    assert err.value.position == 15

import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from evidoc.errors import ProtocolError
from evidoc.jsonrepair import extract_json_object, remove_trailing_commas


def test_fenced_block():
    assert extract_json_object('```json\n{"a":1}\n```') == {"a": 1}


def test_prose_and_trailing_commas():
    text = 'Sure! {"a": [1,2,],} thanks'
    repaired = remove_trailing_commas('{"a": [1,2,],}')
    assert json.loads(repaired) == {"a": [1, 2]}  # strict parser oracle
    assert extract_json_object(text) == {"a": [1, 2]}


def test_no_braces():
    with pytest.raises(ProtocolError) as err:
        extract_json_object("no braces here")
    assert err.value.raw == "no braces here"


def test_commas_inside_strings_untouched():
    assert extract_json_object('{"s": "a,}", "t": [",]"],}') == {"s": "a,}", "t": [",]"]}


def test_braces_inside_strings_do_not_confuse_scan():
    assert extract_json_object('x {"s": "}{", "n": {"m": 1}} y') == {"s": "}{", "n": {"m": 1}}


def test_skips_non_json_brace_group():
    assert extract_json_object('use {braces} then {"ok": true}') == {"ok": True}


def test_unbalanced_fails():
    with pytest.raises(ProtocolError):
        extract_json_object('{"a": 1')


def test_arrays_alone_are_not_objects():
    with pytest.raises(ProtocolError):
        extract_json_object("[1, 2]")


def test_fence_without_language():
    assert extract_json_object('Here:\n```\n{"b": null}\n```\nDone') == {"b": None}


def test_single_quotes_are_not_repaired():
    with pytest.raises(ProtocolError):
        extract_json_object("{'a': 1}")


json_values = st.recursive(
    st.none() | st.booleans() | st.integers() | st.text(),
    lambda children: st.lists(children, max_size=4) | st.dictionaries(st.text(), children, max_size=4),
    max_leaves=12,
)


@given(st.dictionaries(st.text(), json_values, max_size=5))
def test_idempotent_on_valid_json(obj):
    text = json.dumps(obj)
    assert extract_json_object(text) == obj
    assert extract_json_object(json.dumps(extract_json_object(text))) == obj

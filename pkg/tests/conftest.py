import pytest

from lamrec.surface import parse_context, parse_term, parse_type
from lamrec.syntax import Lang

FIX, ISO, EQUI = Lang.FIX, Lang.ISO, Lang.EQUI


@pytest.fixture
def tm():
    return parse_term


@pytest.fixture
def ty():
    return lambda s: parse_type(s, Lang.EQUI)


@pytest.fixture
def ctx():
    return parse_context

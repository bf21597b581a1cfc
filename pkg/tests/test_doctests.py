import doctest
import importlib
import pkgutil

import pytest

import canonsys

MODULES = sorted(m.name for m in pkgutil.walk_packages(canonsys.__path__, "canonsys."))


@pytest.mark.parametrize("name", MODULES)
def test_docstring_examples(name):
    mod = importlib.import_module(name)
    res = doctest.testmod(mod, optionflags=doctest.NORMALIZE_WHITESPACE)
    assert res.failed == 0

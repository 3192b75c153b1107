import pytest

from poptree import presets


@pytest.fixture
def full_tree():
    return presets.full_tree()


@pytest.fixture
def simplified_tree():
    return presets.simplified_tree()


@pytest.fixture
def bayes_priors():
    return presets.bayes_priors()

import pytest

from corpus import build_corpus


@pytest.fixture(scope="session")
def corpus():
    return build_corpus()


@pytest.fixture(scope="session")
def chain_k2_n5(corpus):
    return corpus["chain_k2_n5"]


@pytest.fixture(scope="session")
def chain_k3_n6(corpus):
    return corpus["chain_k3_n6"]

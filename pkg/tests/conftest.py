import pytest

from sgflow import kernel as K


@pytest.fixture(scope="session")
def table():
    return K.default_table(1)


@pytest.fixture(scope="session")
def consts(table):
    return K.kernel_constants(table)
